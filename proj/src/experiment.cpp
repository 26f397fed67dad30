#include "vtprune/experiment.hpp"

#include <algorithm>
#include <cstdio>

#include "vtprune/errors.hpp"
#include "vtprune/rng.hpp"
#include "vtprune/trace.hpp"

namespace vtprune {

namespace {
using nlohmann::json;
}

std::uint64_t sample_seed_for(std::uint64_t base_seed, std::size_t index) {
    return SeededRng(base_seed).fork(index).seed();
}

std::string sample_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%04zu", index);
    return buf;
}

SimulationOutput run_simulation(const RunConfig& cfg,
                                const std::optional<std::filesystem::path>& trace_dir) {
    cfg.validate();
    const Model model = init_model(cfg.model);

    SimulationOutput out;
    out.maps.reserve(cfg.sample_count);
    json samples = json::array();
    for (std::size_t i = 0; i < cfg.sample_count; ++i) {
        SampleSpec spec;
        spec.vision_count = cfg.vision_count;
        spec.text_count = cfg.text_count;
        spec.seed = sample_seed_for(cfg.sample_seed, i);
        spec.planted_fraction = cfg.planted_fraction;
        spec.planted_gain = cfg.planted_gain;
        Sample sample = make_sample(cfg.model, spec);

        PrefillResult result = prefill(model, std::move(sample.seq), {}, sample_name(i));
        if (trace_dir) {
            write_trace(result.maps, *trace_dir / result.maps.sample_id);
        }
        samples.push_back({{"sample_id", result.maps.sample_id},
                           {"seed", spec.seed},
                           {"planted", sample.planted}});
        out.planted.push_back(std::move(sample.planted));
        out.maps.push_back(std::move(result.maps));
    }
    out.summary = {{"sample_count", cfg.sample_count},
                   {"num_layers", cfg.model.num_layers},
                   {"vision_count", cfg.vision_count},
                   {"text_count", cfg.text_count},
                   {"samples", samples}};
    return out;
}

PruneOutput run_prune(const RunConfig& cfg) {
    cfg.validate();
    const Model model = init_model(cfg.model);

    PruneOutput out;
    out.schedule = cfg.resolve_schedule();

    json samples = json::array();
    for (std::size_t i = 0; i < cfg.sample_count; ++i) {
        SampleSpec spec;
        spec.vision_count = cfg.vision_count;
        spec.text_count = cfg.text_count;
        spec.seed = sample_seed_for(cfg.sample_seed, i);
        spec.planted_fraction = cfg.planted_fraction;
        spec.planted_gain = cfg.planted_gain;
        Sample sample = make_sample(cfg.model, spec);

        std::vector<RetainedSet> log;
        const LayerHook hook = make_hook(out.schedule, &log);
        PrefillResult result = prefill(model, std::move(sample.seq), hook, sample_name(i));
        samples.push_back({{"sample_id", result.maps.sample_id},
                           {"final_vision_count", result.seq.vision_count}});
        for (RetainedSet& retained : log) {
            out.retained_log.emplace_back(result.maps.sample_id, std::move(retained));
        }
    }

    CostParams params;
    params.hidden_dim = cfg.model.hidden_dim;
    params.ffn_dim = cfg.model.ffn_dim;
    params.num_layers = cfg.model.num_layers;
    params.text_len = cfg.text_count;
    params.initial_vision = cfg.vision_count;
    params.schedule = out.schedule;
    params.decode_steps = cfg.decode_steps;
    out.cost = run_cost(params);

    out.summary = {{"schedule", schedule_to_json(out.schedule, cfg.policy.name())},
                   {"timeline_average", timeline_average(out.schedule, cfg.vision_count)},
                   {"post_prune_average", post_prune_average(out.schedule, cfg.vision_count)},
                   {"samples", samples},
                   {"cost", cost_report_to_json(*out.cost)}};
    return out;
}

PruneOutput replay_prune(const std::vector<AttentionMaps>& corpus,
                         const PruneSchedule& schedule) {
    schedule.validate();
    PruneOutput out;
    out.schedule = schedule;

    json samples = json::array();
    for (const AttentionMaps& maps : corpus) {
        if (maps.num_layers() < schedule.total_layers) {
            throw InvalidArgument("replay_prune: trace " + maps.sample_id + " has " +
                                  std::to_string(maps.num_layers()) + " layers, schedule needs " +
                                  std::to_string(schedule.total_layers));
        }
        std::vector<std::size_t> retained = maps.per_layer.front().vision_origins;
        for (const ScheduleStage& stage : schedule.stages) {
            const LayerAttention& layer = maps.per_layer[stage.prune_after_layer];

            // Columns of the stored t2v for tokens that are still retained.
            std::vector<std::size_t> cols;
            std::vector<std::size_t> origins;
            for (std::size_t c = 0; c < layer.vision_origins.size(); ++c) {
                if (std::binary_search(retained.begin(), retained.end(),
                                       layer.vision_origins[c])) {
                    cols.push_back(c);
                    origins.push_back(layer.vision_origins[c]);
                }
            }
            Matrix live(layer.t2v.rows, cols.size());
            for (std::size_t r = 0; r < layer.t2v.rows; ++r) {
                for (std::size_t c = 0; c < cols.size(); ++c) {
                    live.at(r, c) = layer.t2v.at(r, cols[c]);
                }
            }

            const TextPrior prior = text_prior(layer.t2t, stage.prune_after_layer);
            const VisionScores scores = score_vision(prior, live, origins);
            const std::size_t k = std::min(stage.keep_count, scores.scores.size());
            RetainedSet decision = top_k_retain(scores, k);
            retained = decision.kept;
            out.retained_log.emplace_back(maps.sample_id, std::move(decision));
        }
        samples.push_back({{"sample_id", maps.sample_id},
                           {"final_vision_count", retained.size()}});
    }
    out.summary = {{"schedule", schedule_to_json(schedule, "replay")},
                   {"samples", samples}};
    return out;
}

} // namespace vtprune
