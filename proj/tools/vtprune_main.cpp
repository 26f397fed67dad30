// Command-line surface: simulate traces, prune with a schedule or baseline,
// run the attention analytics, and evaluate the FLOPs model.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vtprune/analytics.hpp"
#include "vtprune/cost.hpp"
#include "vtprune/errors.hpp"
#include "vtprune/experiment.hpp"
#include "vtprune/reports.hpp"
#include "vtprune/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vtprune;

namespace {

PruneSchedule parse_schedule_spec(const std::string& spec, std::size_t total_layers) {
    PruneSchedule schedule;
    schedule.total_layers = total_layers;
    std::size_t pos = 0;
    while (pos < spec.size()) {
        const std::size_t comma = spec.find(',', pos);
        const std::string item = spec.substr(pos, comma == std::string::npos ? spec.npos : comma - pos);
        const std::size_t colon = item.find(':');
        if (colon == std::string::npos) {
            throw InvalidArgument("--schedule expects LAYER:KEEP pairs, got '" + item + "'");
        }
        try {
            schedule.stages.push_back({std::stoul(item.substr(0, colon)),
                                       std::stoul(item.substr(colon + 1))});
        } catch (const std::exception&) {
            throw InvalidArgument("--schedule expects LAYER:KEEP pairs, got '" + item + "'");
        }
        pos = comma == std::string::npos ? spec.size() : comma + 1;
    }
    schedule.validate();
    return schedule;
}

BudgetSemantics parse_semantics(const std::string& name) {
    if (name == "post-prune" || name == "post_prune_average") {
        return BudgetSemantics::post_prune_average;
    }
    if (name == "full-timeline" || name == "full_timeline_average") {
        return BudgetSemantics::full_timeline_average;
    }
    throw InvalidArgument("--budget-semantics must be 'post-prune' or 'full-timeline'");
}

// Options shared by the commands that run the toy model.
struct ModelOptions {
    RunConfig cfg;
    std::string config_path;

    CLI::Option* opt_layers = nullptr;
    CLI::Option* opt_hidden = nullptr;
    CLI::Option* opt_ffn = nullptr;
    CLI::Option* opt_heads = nullptr;
    CLI::Option* opt_seed = nullptr;
    CLI::Option* opt_vision = nullptr;
    CLI::Option* opt_text = nullptr;
    CLI::Option* opt_samples = nullptr;
    CLI::Option* opt_sample_seed = nullptr;
    CLI::Option* opt_planted_fraction = nullptr;
    CLI::Option* opt_planted_gain = nullptr;

    std::size_t layers = 8, hidden = 32, ffn = 64, heads = 4;
    std::uint64_t seed = 0, sample_seed = 1;
    std::size_t vision = 64, text = 8, samples = 4;
    double planted_fraction = 0.0, planted_gain = 4.0;

    void add(CLI::App& cmd) {
        cmd.add_option("--config", config_path, "Run configuration JSON file");
        opt_layers = cmd.add_option("--layers", layers, "Transformer layer count");
        opt_hidden = cmd.add_option("--hidden", hidden, "Hidden dimension");
        opt_ffn = cmd.add_option("--ffn", ffn, "Feed-forward inner dimension");
        opt_heads = cmd.add_option("--heads", heads, "Attention head count");
        opt_seed = cmd.add_option("--seed", seed, "Model weight seed");
        opt_vision = cmd.add_option("--vision", vision, "Vision tokens per sample");
        opt_text = cmd.add_option("--text", text, "Text tokens per sample");
        opt_samples = cmd.add_option("--samples", samples, "Number of samples");
        opt_sample_seed = cmd.add_option("--sample-seed", sample_seed, "Sample stream seed");
        opt_planted_fraction = cmd.add_option("--planted-fraction", planted_fraction,
                                              "Fraction of vision tokens given a planted text signal");
        opt_planted_gain = cmd.add_option("--planted-gain", planted_gain,
                                          "Embedding gain of planted vision tokens");
    }

    // Config file first, explicit flags on top.
    RunConfig resolve() {
        if (!config_path.empty()) {
            cfg = load_run_config(config_path);
        }
        if (opt_layers->count()) cfg.model.num_layers = layers;
        if (opt_hidden->count()) cfg.model.hidden_dim = hidden;
        if (opt_ffn->count()) cfg.model.ffn_dim = ffn;
        if (opt_heads->count()) cfg.model.num_heads = heads;
        if (opt_seed->count()) cfg.model.seed = seed;
        if (opt_vision->count()) cfg.vision_count = vision;
        if (opt_text->count()) cfg.text_count = text;
        if (opt_samples->count()) cfg.sample_count = samples;
        if (opt_sample_seed->count()) cfg.sample_seed = sample_seed;
        if (opt_planted_fraction->count()) cfg.planted_fraction = planted_fraction;
        if (opt_planted_gain->count()) cfg.planted_gain = planted_gain;
        return cfg;
    }
};

struct ScheduleOptions {
    CLI::Option* opt_budget = nullptr;
    CLI::Option* opt_schedule = nullptr;
    CLI::Option* opt_baseline = nullptr;

    double budget = 0.0;
    std::string schedule_spec;
    std::vector<std::size_t> stage_layers = {1, 10, 20};
    std::size_t final_keep = 8;
    double stage_ratio = 2.0;
    std::string semantics = "post-prune";
    std::string baseline;
    std::size_t uniform_start = 0, uniform_stride = 9;
    std::size_t single_layer = 1;
    std::size_t random_stages = 3;
    std::uint64_t baseline_seed = 7;

    void add(CLI::App& cmd) {
        opt_budget = cmd.add_option("--budget", budget, "Average retained vision-token budget");
        opt_schedule = cmd.add_option("--schedule", schedule_spec,
                                      "Explicit schedule as LAYER:KEEP[,LAYER:KEEP...]");
        cmd.add_option("--stage-layers", stage_layers, "Pruning layers used with --budget")
            ->delimiter(',');
        cmd.add_option("--final-keep", final_keep, "Keep count pinned to the last stage");
        cmd.add_option("--stage-ratio", stage_ratio, "Keep-count ratio between adjacent stages");
        cmd.add_option("--budget-semantics", semantics,
                       "Budget averaging: 'post-prune' or 'full-timeline'");
        opt_baseline = cmd.add_option("--baseline", baseline,
                                      "Comparison schedule: uniform | single | random");
        cmd.add_option("--uniform-start", uniform_start, "First stage layer (uniform baseline)");
        cmd.add_option("--uniform-stride", uniform_stride, "Stage spacing (uniform baseline)");
        cmd.add_option("--single-layer", single_layer, "Stage layer (single baseline)");
        cmd.add_option("--random-stages", random_stages, "Stage count (random baseline)");
        cmd.add_option("--baseline-seed", baseline_seed, "Layer-draw seed (random baseline)");
    }

    SolvePolicy policy() const {
        return SolvePolicy{final_keep, stage_ratio, parse_semantics(semantics)};
    }

    /// Returns the schedule plus the random baseline's drawn layers, if any.
    std::pair<PruneSchedule, std::vector<std::size_t>> resolve(std::size_t total_layers,
                                                               std::size_t initial_vision) const {
        if (opt_schedule->count()) {
            return {parse_schedule_spec(schedule_spec, total_layers), {}};
        }
        if (!opt_budget->count()) {
            throw InvalidArgument("one of --budget or --schedule is required");
        }
        if (opt_baseline->count()) {
            if (baseline == "uniform") {
                return {uniform_baseline(uniform_start, uniform_stride, total_layers, budget,
                                         initial_vision, policy()),
                        {}};
            }
            if (baseline == "single") {
                return {single_baseline(single_layer, total_layers, budget, initial_vision,
                                        policy()),
                        {}};
            }
            if (baseline == "random") {
                RandomBaseline rb = random_baseline(random_stages, total_layers, baseline_seed,
                                                    budget, initial_vision, policy());
                return {std::move(rb.schedule), std::move(rb.drawn_layers)};
            }
            throw InvalidArgument("--baseline must be uniform, single, or random");
        }
        return {solve_schedule(budget, initial_vision, total_layers, stage_layers, policy()), {}};
    }
};

fs::path require_out(const std::string& out) {
    if (out.empty()) {
        throw InvalidArgument("--out is required (or set VTPRUNE_OUT)");
    }
    return fs::path(out);
}

json prune_to_files(const PruneOutput& output, const std::vector<std::size_t>& drawn_layers,
                    const SolvePolicy& policy, std::uint64_t baseline_seed,
                    std::size_t initial_vision, const fs::path& out_dir) {
    json schedule_doc = schedule_to_json(output.schedule, policy.name(), baseline_seed);
    if (!drawn_layers.empty()) {
        schedule_doc["drawn_layers"] = drawn_layers;
    }
    write_json_file(out_dir / "schedule.json", schedule_doc);
    write_text_file(out_dir / "retained.csv", retained_log_to_csv(output.retained_log));

    json summary = output.summary;
    summary["schedule"] = schedule_doc;
    summary["timeline_average"] = timeline_average(output.schedule, initial_vision);
    summary["post_prune_average"] = post_prune_average(output.schedule, initial_vision);
    if (output.cost) {
        const json cost_doc = cost_report_to_json(*output.cost);
        write_json_file(out_dir / "cost.json", cost_doc);
        write_text_file(out_dir / "cost.csv",
                        cost_rows_to_csv({{"dense", static_cast<double>(initial_vision),
                                           output.cost->dense_grand_total, 1.0},
                                          {"scheduled",
                                           post_prune_average(output.schedule, initial_vision),
                                           output.cost->grand_total,
                                           output.cost->ratio_vs_dense}}));
        summary["cost"] = cost_doc;
    }
    write_json_file(out_dir / "prune.json", summary);
    return summary;
}

json shifts_to_files(const std::vector<AttentionMaps>& corpus, double fraction,
                     const fs::path& out_dir) {
    const ShiftHistogram hist = shift_histogram(corpus, fraction);
    write_text_file(out_dir / "shifts.csv", histogram_to_csv(hist));
    const json doc = histogram_to_json(hist);
    write_json_file(out_dir / "shifts.json", doc);
    return doc;
}

json miou_to_files(const std::vector<AttentionMaps>& corpus, double fraction,
                   const fs::path& out_dir) {
    const MiouMatrix matrix = miou_matrix(corpus, fraction);
    write_text_file(out_dir / "miou.csv", miou_to_csv(matrix));
    const json doc = miou_to_json(matrix);
    write_json_file(out_dir / "miou.json", doc);
    return doc;
}

int run(int argc, char** argv) {
    CLI::App app{"vision-token pruning toolkit: deterministic toy-transformer traces, "
                 "text-guided pruning, attention-shift analytics, and an analytical FLOPs model"};
    app.require_subcommand(1);
    argv = app.ensure_utf8(argv);

    // ---- simulate ----
    auto* sim = app.add_subcommand("simulate", "Run seeded samples and write attention traces");
    auto sim_model = std::make_shared<ModelOptions>();
    sim_model->add(*sim);
    auto sim_out = std::make_shared<std::string>();
    sim->add_option("--out", *sim_out, "Output directory")->envname("VTPRUNE_OUT");
    sim->callback([sim_model, sim_out] {
        const RunConfig cfg = sim_model->resolve();
        const fs::path out_dir = require_out(*sim_out);
        const SimulationOutput output = run_simulation(cfg, out_dir / "traces");
        write_json_file(out_dir / "simulate.json", output.summary);
        std::cout << "wrote " << output.maps.size() << " traces under "
                  << (out_dir / "traces").string() << "\n";
    });

    // ---- prune ----
    auto* prune = app.add_subcommand("prune", "Apply a pruning schedule and log retained sets");
    auto prune_model = std::make_shared<ModelOptions>();
    prune_model->add(*prune);
    auto prune_sched = std::make_shared<ScheduleOptions>();
    prune_sched->add(*prune);
    auto prune_out = std::make_shared<std::string>();
    auto prune_traces = std::make_shared<std::string>();
    auto prune_decode = std::make_shared<std::size_t>(0);
    prune->add_option("--out", *prune_out, "Output directory")->envname("VTPRUNE_OUT");
    prune->add_option("--traces", *prune_traces,
                      "Replay a stored trace corpus instead of simulating");
    prune->add_option("--decode-steps", *prune_decode, "Decode steps charged in the cost model");
    prune->callback([prune_model, prune_sched, prune_out, prune_traces, prune_decode] {
        const fs::path out_dir = require_out(*prune_out);
        if (!prune_traces->empty()) {
            const auto corpus = read_trace_corpus(*prune_traces);
            if (corpus.empty()) {
                throw IoError("prune: no traces found under " + *prune_traces);
            }
            const std::size_t total_layers = corpus.front().num_layers();
            const std::size_t initial_vision = corpus.front().per_layer.front().vision_origins.size();
            auto [schedule, drawn] = prune_sched->resolve(total_layers, initial_vision);
            const PruneOutput output = replay_prune(corpus, schedule);
            prune_to_files(output, drawn, prune_sched->policy(), prune_sched->baseline_seed,
                           initial_vision, out_dir);
            std::cout << "replayed " << corpus.size() << " traces; retained log at "
                      << (out_dir / "retained.csv").string() << "\n";
            return;
        }
        RunConfig cfg = prune_model->resolve();
        cfg.decode_steps = *prune_decode;
        std::vector<std::size_t> drawn;
        if (prune_sched->opt_budget->count() || prune_sched->opt_schedule->count()) {
            auto [schedule, drawn_layers] =
                prune_sched->resolve(cfg.model.num_layers, cfg.vision_count);
            cfg.schedule = std::move(schedule);
            drawn = std::move(drawn_layers);
            cfg.policy = prune_sched->policy();
        } else {
            // Fall back to the config file's schedule or budget.
            cfg.schedule = cfg.resolve_schedule();
        }
        cfg.budget.reset();
        const PruneOutput output = run_prune(cfg);
        prune_to_files(output, drawn, cfg.policy, prune_sched->baseline_seed, cfg.vision_count,
                       out_dir);
        std::cout << "pruned " << cfg.sample_count << " samples; retained log at "
                  << (out_dir / "retained.csv").string() << "\n";
    });

    // ---- shifts ----
    auto* shifts = app.add_subcommand("shifts", "Attention-shift histogram from a trace corpus");
    auto shifts_traces = std::make_shared<std::string>();
    auto shifts_fraction = std::make_shared<double>(0.1);
    auto shifts_out = std::make_shared<std::string>();
    shifts->add_option("--traces", *shifts_traces, "Trace corpus directory")->required();
    shifts->add_option("--fraction-vision", *shifts_fraction, "Top vision-token fraction");
    shifts->add_option("--out", *shifts_out, "Output directory")->envname("VTPRUNE_OUT");
    shifts->callback([shifts_traces, shifts_fraction, shifts_out] {
        const fs::path out_dir = require_out(*shifts_out);
        const auto corpus = read_trace_corpus(*shifts_traces);
        const json doc = shifts_to_files(corpus, *shifts_fraction, out_dir);
        std::cout << "histogram over " << doc.at("sample_count").get<std::size_t>()
                  << " samples at " << (out_dir / "shifts.csv").string() << "\n";
    });

    // ---- miou ----
    auto* miou = app.add_subcommand("miou", "Layer-pair key-text-token mIoU matrix");
    auto miou_traces = std::make_shared<std::string>();
    auto miou_fraction = std::make_shared<double>(0.2);
    auto miou_out = std::make_shared<std::string>();
    miou->add_option("--traces", *miou_traces, "Trace corpus directory")->required();
    miou->add_option("--fraction-text", *miou_fraction, "Key text-token fraction");
    miou->add_option("--out", *miou_out, "Output directory")->envname("VTPRUNE_OUT");
    miou->callback([miou_traces, miou_fraction, miou_out] {
        const fs::path out_dir = require_out(*miou_out);
        const auto corpus = read_trace_corpus(*miou_traces);
        const json doc = miou_to_files(corpus, *miou_fraction, out_dir);
        std::cout << "miou matrix over " << doc.at("sample_count").get<std::size_t>()
                  << " samples at " << (out_dir / "miou.csv").string() << "\n";
    });

    // ---- cost ----
    auto* cost = app.add_subcommand("cost", "Analytical FLOPs for a model and schedule");
    auto cost_sched = std::make_shared<ScheduleOptions>();
    cost_sched->add(*cost);
    struct CostFlags {
        std::size_t d = 4096, m = 11008, layers = 32, text = 64, vision = 576, decode = 0;
        bool dense = false;
        std::string out;
    };
    auto cost_flags = std::make_shared<CostFlags>();
    cost->add_option("--d,--hidden", cost_flags->d, "Hidden dimension");
    cost->add_option("--m,--ffn", cost_flags->m, "Feed-forward inner dimension");
    cost->add_option("--layers", cost_flags->layers, "Transformer layer count");
    cost->add_option("--text", cost_flags->text, "Text token count");
    cost->add_option("--vision", cost_flags->vision, "Initial vision token count");
    cost->add_option("--decode-steps", cost_flags->decode, "Decode steps");
    cost->add_flag("--dense", cost_flags->dense, "No pruning schedule");
    cost->add_option("--out", cost_flags->out, "Output directory")->envname("VTPRUNE_OUT");
    cost->callback([cost_flags, cost_sched] {
        CostParams params;
        params.hidden_dim = cost_flags->d;
        params.ffn_dim = cost_flags->m;
        params.num_layers = cost_flags->layers;
        params.text_len = cost_flags->text;
        params.initial_vision = cost_flags->vision;
        params.decode_steps = cost_flags->decode;

        std::vector<std::size_t> drawn;
        std::string method = "dense";
        double tokens = static_cast<double>(cost_flags->vision);
        if (!cost_flags->dense) {
            auto [schedule, drawn_layers] =
                cost_sched->resolve(cost_flags->layers, cost_flags->vision);
            params.schedule = std::move(schedule);
            drawn = std::move(drawn_layers);
            method = "scheduled";
            tokens = post_prune_average(params.schedule, cost_flags->vision);
        }
        const CostReport report = run_cost(params);
        const std::vector<CostCsvRow> rows = {
            {"dense", static_cast<double>(cost_flags->vision), report.dense_grand_total, 1.0},
            {method, tokens, report.grand_total, report.ratio_vs_dense}};
        const std::string csv = cost_rows_to_csv(rows);
        std::cout << csv;
        if (!cost_flags->out.empty()) {
            const fs::path out_dir(cost_flags->out);
            write_text_file(out_dir / "cost.csv", csv);
            json doc = cost_report_to_json(report);
            if (!params.schedule.empty()) {
                doc["schedule"] = schedule_to_json(params.schedule, cost_sched->policy().name());
            }
            write_json_file(out_dir / "cost.json", doc);
        }
    });

    // ---- schedule-solve ----
    auto* solve = app.add_subcommand("schedule-solve", "Solve per-stage keep counts for a budget");
    struct SolveFlags {
        double budget = 64.0;
        std::size_t vision = 576, total_layers = 32;
        std::vector<std::size_t> layers = {1, 10, 20};
        std::size_t final_keep = 8;
        double stage_ratio = 2.0;
        std::string semantics = "post-prune";
        std::string out;
    };
    auto solve_flags = std::make_shared<SolveFlags>();
    solve->add_option("--budget", solve_flags->budget, "Average retained vision-token budget")
        ->required();
    solve->add_option("--vision", solve_flags->vision, "Initial vision token count");
    solve->add_option("--layers", solve_flags->layers, "Pruning stage layers")->delimiter(',');
    solve->add_option("--total-layers", solve_flags->total_layers, "Transformer layer count");
    solve->add_option("--final-keep", solve_flags->final_keep, "Keep count of the last stage");
    solve->add_option("--stage-ratio", solve_flags->stage_ratio, "Ratio between adjacent stages");
    solve->add_option("--budget-semantics", solve_flags->semantics,
                      "Budget averaging: 'post-prune' or 'full-timeline'");
    solve->add_option("--out", solve_flags->out, "Write schedule.json here");
    solve->callback([solve_flags] {
        const SolvePolicy policy{solve_flags->final_keep, solve_flags->stage_ratio,
                                 parse_semantics(solve_flags->semantics)};
        const PruneSchedule schedule =
            solve_schedule(solve_flags->budget, solve_flags->vision, solve_flags->total_layers,
                           solve_flags->layers, policy);
        for (const ScheduleStage& stage : schedule.stages) {
            std::cout << "after_layer " << stage.prune_after_layer << " keep " << stage.keep_count
                      << "\n";
        }
        char buf[128];
        std::snprintf(buf, sizeof(buf), "post_prune_average %.3f\nfull_timeline_average %.3f\n",
                      post_prune_average(schedule, solve_flags->vision),
                      timeline_average(schedule, solve_flags->vision));
        std::cout << buf;
        if (!solve_flags->out.empty()) {
            write_json_file(fs::path(solve_flags->out) / "schedule.json",
                            schedule_to_json(schedule, policy.name()));
        }
    });

    // ---- report ----
    auto* report = app.add_subcommand("report", "Run simulate, prune, shifts, miou, and cost "
                                                "into one merged JSON summary");
    auto report_model = std::make_shared<ModelOptions>();
    report_model->add(*report);
    auto report_sched = std::make_shared<ScheduleOptions>();
    report_sched->add(*report);
    auto report_out = std::make_shared<std::string>();
    auto report_fraction_text = std::make_shared<double>(0.2);
    auto report_fraction_vision = std::make_shared<double>(0.1);
    report->add_option("--out", *report_out, "Output directory")->envname("VTPRUNE_OUT");
    auto* opt_ft = report->add_option("--fraction-text", *report_fraction_text,
                                      "Key text-token fraction");
    auto* opt_fv = report->add_option("--fraction-vision", *report_fraction_vision,
                                      "Top vision-token fraction");
    report->callback([report_model, report_sched, report_out, report_fraction_text,
                      report_fraction_vision, opt_ft, opt_fv] {
        RunConfig cfg = report_model->resolve();
        const fs::path out_dir = require_out(*report_out);
        if (opt_ft->count()) {
            cfg.fraction_text = *report_fraction_text;
        }
        if (opt_fv->count()) {
            cfg.fraction_vision = *report_fraction_vision;
        }

        const SimulationOutput sim_output = run_simulation(cfg, out_dir / "traces");
        write_json_file(out_dir / "simulate.json", sim_output.summary);

        auto [schedule, drawn] = (report_sched->opt_budget->count() ||
                                  report_sched->opt_schedule->count())
                                     ? report_sched->resolve(cfg.model.num_layers, cfg.vision_count)
                                     : std::make_pair(cfg.resolve_schedule(),
                                                      std::vector<std::size_t>{});
        cfg.schedule = schedule;
        cfg.budget.reset();
        const PruneOutput prune_output = run_prune(cfg);
        const json prune_doc = prune_to_files(prune_output, drawn, report_sched->policy(),
                                              report_sched->baseline_seed, cfg.vision_count,
                                              out_dir);

        const json shifts_doc = shifts_to_files(sim_output.maps, cfg.fraction_vision, out_dir);
        const json miou_doc = miou_to_files(sim_output.maps, cfg.fraction_text, out_dir);

        const json doc = {{"config", run_config_to_json(cfg)},
                          {"simulate", sim_output.summary},
                          {"prune", prune_doc},
                          {"shifts", shifts_doc},
                          {"miou", miou_doc}};
        write_json_file(out_dir / "report.json", doc);
        std::cout << "report written to " << (out_dir / "report.json").string() << "\n";
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

json error_record(const std::string& type, const std::string& message) {
    return {{"error", {{"type", type}, {"message", message}}}};
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const InfeasibleBudgetError& e) {
        json doc = error_record("infeasible_budget", e.what());
        doc["error"]["feasible_min"] = e.feasible_min;
        doc["error"]["feasible_max"] = e.feasible_max;
        std::cerr << doc.dump() << "\n";
        return 1;
    } catch (const DimensionError& e) {
        std::cerr << error_record("dimension", e.what()).dump() << "\n";
        return 1;
    } catch (const InvalidArgument& e) {
        std::cerr << error_record("invalid_argument", e.what()).dump() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << error_record("numeric", e.what()).dump() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << error_record("io", e.what()).dump() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << error_record("error", e.what()).dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << error_record("internal", e.what()).dump() << "\n";
        return 1;
    }
}
