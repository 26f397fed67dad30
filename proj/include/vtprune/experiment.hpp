#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vtprune/reports.hpp"

namespace vtprune {

/// Deterministic per-sample seed: fork `index` off the run's sample_seed.
std::uint64_t sample_seed_for(std::uint64_t base_seed, std::size_t index);

std::string sample_name(std::size_t index);

struct SimulationOutput {
    std::vector<AttentionMaps> maps;       // unpruned, one per sample
    std::vector<std::vector<std::size_t>> planted; // per sample, may be empty
    nlohmann::json summary;
};

/// Runs prefill without pruning over sample_count seeded samples. When
/// trace_dir is set, each sample's maps are written under it.
SimulationOutput run_simulation(const RunConfig& cfg,
                                const std::optional<std::filesystem::path>& trace_dir);

struct PruneOutput {
    PruneSchedule schedule;
    std::vector<std::pair<std::string, RetainedSet>> retained_log;
    std::optional<CostReport> cost;
    nlohmann::json summary;
};

/// Simulates samples and applies the schedule hook during prefill,
/// logging every stage decision and the analytical cost of the run.
PruneOutput run_prune(const RunConfig& cfg);

/// Re-ranks stored attention maps under the schedule without running a
/// model: at each stage layer the recorded t2v columns of the still-retained
/// tokens are scored and the top k survive.
PruneOutput replay_prune(const std::vector<AttentionMaps>& corpus,
                         const PruneSchedule& schedule);

} // namespace vtprune
