#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtprune/analytics.hpp"
#include "vtprune/cost.hpp"
#include "vtprune/model.hpp"
#include "vtprune/prune.hpp"

namespace vtprune {

/// One experiment's full configuration. Exactly one of schedule / budget is
/// set; a budget is solved at stage_layers with the given policy.
struct RunConfig {
    ModelConfig model{};
    std::size_t vision_count = 144;
    std::size_t text_count = 16;
    std::size_t sample_count = 8;
    std::uint64_t sample_seed = 1;
    double planted_fraction = 0.0;
    double planted_gain = 4.0;

    std::optional<PruneSchedule> schedule;
    std::optional<double> budget;
    std::vector<std::size_t> stage_layers = {1, 10, 20};
    SolvePolicy policy{};

    double fraction_text = 0.2;
    double fraction_vision = 0.1;
    std::size_t decode_steps = 0;
    std::string output_dir;

    void validate() const;
    /// The schedule to run: the explicit one, or the budget solved in place.
    PruneSchedule resolve_schedule() const;
};

RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json schedule_to_json(const PruneSchedule& schedule, const std::string& policy_name,
                                std::uint64_t seed = 0);
PruneSchedule schedule_from_json(const nlohmann::json& doc);

nlohmann::json cost_report_to_json(const CostReport& report);
nlohmann::json histogram_to_json(const ShiftHistogram& hist);
nlohmann::json miou_to_json(const MiouMatrix& miou);

std::string histogram_to_csv(const ShiftHistogram& hist);
std::string miou_to_csv(const MiouMatrix& miou);

/// Table-shaped cost rows: method,tokens,flops_T,ratio.
struct CostCsvRow {
    std::string method;
    double tokens = 0.0;
    std::uint64_t flops = 0;
    double ratio = 1.0;
};
std::string cost_rows_to_csv(const std::vector<CostCsvRow>& rows);

/// Retained-set log rows: sample_id,layer,kept (kept is space-separated).
std::string retained_log_to_csv(
    const std::vector<std::pair<std::string, RetainedSet>>& rows);

void write_text_file(const std::filesystem::path& path, const std::string& content);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

} // namespace vtprune
