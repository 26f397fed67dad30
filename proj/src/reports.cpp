#include "vtprune/reports.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "vtprune/errors.hpp"

namespace vtprune {

namespace {

using nlohmann::json;

std::string fmt(const char* spec, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, value);
    return buf;
}

} // namespace

void RunConfig::validate() const {
    model.validate();
    if (schedule.has_value() == budget.has_value()) {
        throw InvalidArgument("RunConfig: exactly one of schedule / budget must be set");
    }
    if (schedule) {
        if (schedule->total_layers != model.num_layers) {
            throw InvalidArgument("RunConfig: schedule layer count vs model num_layers");
        }
        schedule->validate();
    }
    if (!(fraction_text > 0.0) || fraction_text > 1.0 ||
        !(fraction_vision > 0.0) || fraction_vision > 1.0) {
        throw InvalidArgument("RunConfig: fractions must be in (0, 1]");
    }
    if (text_count == 0) {
        throw InvalidArgument("RunConfig: text_count must be >= 1");
    }
    if (sample_count == 0) {
        throw InvalidArgument("RunConfig: sample_count must be >= 1");
    }
}

PruneSchedule RunConfig::resolve_schedule() const {
    validate();
    if (schedule) {
        return *schedule;
    }
    return solve_schedule(*budget, vision_count, model.num_layers, stage_layers, policy);
}

namespace {

SolvePolicy policy_from_json(const json& doc) {
    SolvePolicy policy;
    policy.final_keep = doc.value("final_keep", policy.final_keep);
    policy.stage_ratio = doc.value("stage_ratio", policy.stage_ratio);
    const std::string semantics = doc.value("budget_semantics", std::string("post_prune_average"));
    if (semantics == "post_prune_average") {
        policy.semantics = BudgetSemantics::post_prune_average;
    } else if (semantics == "full_timeline_average") {
        policy.semantics = BudgetSemantics::full_timeline_average;
    } else {
        throw InvalidArgument("RunConfig: unknown budget_semantics '" + semantics + "'");
    }
    return policy;
}

json policy_to_json(const SolvePolicy& policy) {
    return {{"final_keep", policy.final_keep},
            {"stage_ratio", policy.stage_ratio},
            {"budget_semantics", policy.semantics == BudgetSemantics::post_prune_average
                                     ? "post_prune_average"
                                     : "full_timeline_average"}};
}

} // namespace

RunConfig run_config_from_json(const json& doc) {
    RunConfig cfg;
    try {
        if (doc.contains("model")) {
            const json& m = doc.at("model");
            cfg.model.num_layers = m.value("num_layers", cfg.model.num_layers);
            cfg.model.hidden_dim = m.value("hidden_dim", cfg.model.hidden_dim);
            cfg.model.ffn_dim = m.value("ffn_dim", cfg.model.ffn_dim);
            cfg.model.num_heads = m.value("num_heads", cfg.model.num_heads);
            cfg.model.seed = m.value("seed", cfg.model.seed);
        }
        cfg.vision_count = doc.value("vision_count", cfg.vision_count);
        cfg.text_count = doc.value("text_count", cfg.text_count);
        cfg.sample_count = doc.value("sample_count", cfg.sample_count);
        cfg.sample_seed = doc.value("sample_seed", cfg.sample_seed);
        cfg.planted_fraction = doc.value("planted_fraction", cfg.planted_fraction);
        cfg.planted_gain = doc.value("planted_gain", cfg.planted_gain);
        if (doc.contains("schedule")) {
            cfg.schedule = schedule_from_json(doc.at("schedule"));
        }
        if (doc.contains("budget")) {
            cfg.budget = doc.at("budget").get<double>();
        }
        if (doc.contains("stage_layers")) {
            cfg.stage_layers = doc.at("stage_layers").get<std::vector<std::size_t>>();
        }
        if (doc.contains("policy")) {
            cfg.policy = policy_from_json(doc.at("policy"));
        }
        cfg.fraction_text = doc.value("fraction_text", cfg.fraction_text);
        cfg.fraction_vision = doc.value("fraction_vision", cfg.fraction_vision);
        cfg.decode_steps = doc.value("decode_steps", cfg.decode_steps);
        cfg.output_dir = doc.value("output_dir", cfg.output_dir);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("RunConfig: malformed JSON: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
    json doc = {{"model",
                 {{"num_layers", cfg.model.num_layers},
                  {"hidden_dim", cfg.model.hidden_dim},
                  {"ffn_dim", cfg.model.ffn_dim},
                  {"num_heads", cfg.model.num_heads},
                  {"seed", cfg.model.seed}}},
                {"vision_count", cfg.vision_count},
                {"text_count", cfg.text_count},
                {"sample_count", cfg.sample_count},
                {"sample_seed", cfg.sample_seed},
                {"planted_fraction", cfg.planted_fraction},
                {"planted_gain", cfg.planted_gain},
                {"stage_layers", cfg.stage_layers},
                {"policy", policy_to_json(cfg.policy)},
                {"fraction_text", cfg.fraction_text},
                {"fraction_vision", cfg.fraction_vision},
                {"decode_steps", cfg.decode_steps},
                {"output_dir", cfg.output_dir}};
    if (cfg.schedule) {
        doc["schedule"] = schedule_to_json(*cfg.schedule, cfg.policy.name());
    }
    if (cfg.budget) {
        doc["budget"] = *cfg.budget;
    }
    return doc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("load_run_config: cannot open " + path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw IoError("load_run_config: malformed JSON in " + path.string() + ": " + e.what());
    }
    return run_config_from_json(doc);
}

json schedule_to_json(const PruneSchedule& schedule, const std::string& policy_name,
                      std::uint64_t seed) {
    json stages = json::array();
    for (const ScheduleStage& stage : schedule.stages) {
        stages.push_back({{"after_layer", stage.prune_after_layer}, {"keep", stage.keep_count}});
    }
    return {{"stages", stages},
            {"total_layers", schedule.total_layers},
            {"policy", policy_name},
            {"seed", seed}};
}

PruneSchedule schedule_from_json(const json& doc) {
    PruneSchedule schedule;
    try {
        schedule.total_layers = doc.at("total_layers").get<std::size_t>();
        for (const json& stage : doc.at("stages")) {
            schedule.stages.push_back({stage.at("after_layer").get<std::size_t>(),
                                       stage.at("keep").get<std::size_t>()});
        }
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("schedule_from_json: malformed JSON: ") + e.what());
    }
    schedule.validate();
    return schedule;
}

json cost_report_to_json(const CostReport& report) {
    return {{"prefill_per_layer", report.prefill_per_layer},
            {"prefill_total", report.prefill_total},
            {"prefill_tflops", format_tflops(report.prefill_total)},
            {"prune_per_stage", report.prune_per_stage},
            {"prune_total", report.prune_total},
            {"decode_per_step", report.decode_per_step},
            {"decode_total", report.decode_total},
            {"grand_total", report.grand_total},
            {"grand_tflops", format_tflops(report.grand_total)},
            {"dense_prefill_total", report.dense_prefill_total},
            {"dense_grand_total", report.dense_grand_total},
            {"prefill_ratio_vs_dense", report.prefill_ratio_vs_dense},
            {"ratio_vs_dense", report.ratio_vs_dense}};
}

json histogram_to_json(const ShiftHistogram& hist) {
    return {{"fraction", hist.fraction},
            {"sample_count", hist.sample_count},
            {"num_layers", hist.num_layers},
            {"counts", hist.counts}};
}

json miou_to_json(const MiouMatrix& miou) {
    json rows = json::array();
    for (std::size_t i = 0; i < miou.values.rows; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < miou.values.cols; ++j) {
            row.push_back(miou.values.at(i, j));
        }
        rows.push_back(std::move(row));
    }
    return {{"fraction", miou.fraction},
            {"sample_count", miou.sample_count},
            {"num_layers", miou.values.rows},
            {"values", rows}};
}

std::string histogram_to_csv(const ShiftHistogram& hist) {
    std::string out = "layer,count\n";
    for (std::size_t b = 1; b < hist.counts.size(); ++b) {
        out += std::to_string(b) + "," + std::to_string(hist.counts[b]) + "\n";
    }
    return out;
}

std::string miou_to_csv(const MiouMatrix& miou) {
    std::string out = "layer";
    for (std::size_t j = 0; j < miou.values.cols; ++j) {
        out += "," + std::to_string(j);
    }
    out += "\n";
    for (std::size_t i = 0; i < miou.values.rows; ++i) {
        out += std::to_string(i);
        for (std::size_t j = 0; j < miou.values.cols; ++j) {
            out += "," + fmt("%.6f", miou.values.at(i, j));
        }
        out += "\n";
    }
    return out;
}

std::string cost_rows_to_csv(const std::vector<CostCsvRow>& rows) {
    std::string out = "method,tokens,flops_T,ratio\n";
    for (const CostCsvRow& row : rows) {
        out += row.method + "," + fmt("%g", row.tokens) + "," + format_tflops(row.flops) + "," +
               fmt("%.4f", row.ratio) + "\n";
    }
    return out;
}

std::string retained_log_to_csv(
    const std::vector<std::pair<std::string, RetainedSet>>& rows) {
    std::string out = "sample_id,layer,kept\n";
    for (const auto& [sample_id, retained] : rows) {
        out += sample_id + "," + std::to_string(retained.layer_index) + ",";
        for (std::size_t i = 0; i < retained.kept.size(); ++i) {
            if (i > 0) {
                out += " ";
            }
            out += std::to_string(retained.kept[i]);
        }
        out += "\n";
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("write_text_file: cannot create " + path.parent_path().string() + ": " +
                          ec.message());
        }
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("write_text_file: cannot open " + path.string());
    }
    out << content;
    if (!out) {
        throw IoError("write_text_file: short write to " + path.string());
    }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
    write_text_file(path, doc.dump(2) + "\n");
}

} // namespace vtprune
