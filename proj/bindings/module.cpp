// Python bindings for the core operations: scoring, top-k retention,
// schedule solving, change-point detection, and the FLOPs model.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vtprune/analytics.hpp"
#include "vtprune/cost.hpp"
#include "vtprune/errors.hpp"
#include "vtprune/model.hpp"
#include "vtprune/prune.hpp"

namespace py = pybind11;
using namespace vtprune;

namespace {

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) {
        throw InvalidArgument("expected a 2-D array");
    }
    Matrix m(static_cast<std::size_t>(arr.shape(0)), static_cast<std::size_t>(arr.shape(1)));
    std::copy(arr.data(), arr.data() + m.data.size(), m.data.begin());
    return m;
}

py::array_t<double> to_array(const Matrix& m) {
    py::array_t<double> arr({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), arr.mutable_data());
    return arr;
}

py::array_t<double> to_array(const Vector& v) {
    py::array_t<double> arr(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), arr.mutable_data());
    return arr;
}

SolvePolicy make_policy(std::size_t final_keep, double stage_ratio, const std::string& semantics) {
    SolvePolicy policy{final_keep, stage_ratio, BudgetSemantics::post_prune_average};
    if (semantics == "full-timeline") {
        policy.semantics = BudgetSemantics::full_timeline_average;
    } else if (semantics != "post-prune") {
        throw InvalidArgument("semantics must be 'post-prune' or 'full-timeline'");
    }
    return policy;
}

PruneSchedule make_schedule(const std::vector<std::pair<std::size_t, std::size_t>>& stages,
                            std::size_t total_layers) {
    PruneSchedule schedule;
    schedule.total_layers = total_layers;
    for (const auto& [layer, keep] : stages) {
        schedule.stages.push_back({layer, keep});
    }
    schedule.validate();
    return schedule;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "vision-token pruning core: text-guided scoring, schedules, "
              "change-point detection, and the analytical FLOPs model";

    py::register_exception<InfeasibleBudgetError>(m, "InfeasibleBudgetError", PyExc_ValueError);
    py::register_exception<Error>(m, "VtpruneError", PyExc_ValueError);

    m.def(
        "text_prior",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& t2t) {
            return to_array(text_prior(to_matrix(t2t)).weights);
        },
        py::arg("t2t"),
        "Per-text-token importance: column sums of the causal t2t attention block.");

    m.def(
        "score_vision",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& prior,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& t2v) {
            if (prior.ndim() != 1) {
                throw InvalidArgument("prior must be 1-D");
            }
            TextPrior p{0, Vector(prior.data(), prior.data() + prior.shape(0))};
            return to_array(score_vision(p, to_matrix(t2v)).scores);
        },
        py::arg("prior"), py::arg("t2v"),
        "Prior-weighted attention mass per vision token: prior^T @ t2v.");

    m.def(
        "top_k_retain",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& scores,
           std::size_t k) {
            if (scores.ndim() != 1) {
                throw InvalidArgument("scores must be 1-D");
            }
            VisionScores s{0, Vector(scores.data(), scores.data() + scores.shape(0)), {}};
            s.origin_indices.resize(s.scores.size());
            for (std::size_t i = 0; i < s.scores.size(); ++i) {
                s.origin_indices[i] = i;
            }
            return top_k_retain(s, k).kept;
        },
        py::arg("scores"), py::arg("k"),
        "Indices of the k highest scores, ties toward the smaller index, sorted.");

    m.def(
        "cumulative_curve",
        [](const Vector& values) { return to_array(cumulative_curve(values).cumulative); },
        py::arg("values"), "Exact prefix sums of per-layer values.");

    m.def(
        "detect_change_point",
        [](const Vector& cumulative) {
            const ChangePointResult r = detect_change_point(cumulative);
            py::dict out;
            out["breakpoint"] = r.breakpoint;
            out["mean_first"] = r.mean_first;
            out["mean_second"] = r.mean_second;
            out["sse"] = r.sse;
            return out;
        },
        py::arg("cumulative"),
        "Best single two-segment split of the series under the least-squares cost.");

    m.def(
        "key_text_tokens",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& t2t,
           double fraction) { return key_text_tokens(to_matrix(t2t), fraction); },
        py::arg("t2t"), py::arg("fraction"),
        "Top-fraction text tokens by received t2t attention.");

    m.def(
        "solve_schedule",
        [](double budget, std::size_t vision, std::size_t total_layers,
           const std::vector<std::size_t>& stage_layers, std::size_t final_keep,
           double stage_ratio, const std::string& semantics) {
            const PruneSchedule schedule =
                solve_schedule(budget, vision, total_layers, stage_layers,
                               make_policy(final_keep, stage_ratio, semantics));
            std::vector<std::pair<std::size_t, std::size_t>> out;
            for (const ScheduleStage& stage : schedule.stages) {
                out.emplace_back(stage.prune_after_layer, stage.keep_count);
            }
            return out;
        },
        py::arg("budget"), py::arg("vision"), py::arg("total_layers"), py::arg("stage_layers"),
        py::arg("final_keep") = 8, py::arg("stage_ratio") = 2.0,
        py::arg("semantics") = "post-prune",
        "Integer keep counts meeting the budget; returns (after_layer, keep) pairs.");

    m.def(
        "schedule_averages",
        [](const std::vector<std::pair<std::size_t, std::size_t>>& stages,
           std::size_t total_layers, std::size_t vision) {
            const PruneSchedule schedule = make_schedule(stages, total_layers);
            py::dict out;
            out["post_prune_average"] = post_prune_average(schedule, vision);
            out["full_timeline_average"] = timeline_average(schedule, vision);
            return out;
        },
        py::arg("stages"), py::arg("total_layers"), py::arg("vision"),
        "Layer-weighted average retained tokens under both budget conventions.");

    m.def("prefill_layer_flops", &prefill_layer_flops, py::arg("n"), py::arg("d"), py::arg("m"));
    m.def("prune_overhead_flops", &prune_overhead_flops, py::arg("t"), py::arg("v"));
    m.def("decode_step_flops", &decode_step_flops, py::arg("n"), py::arg("d"), py::arg("m"));

    m.def(
        "run_cost",
        [](std::size_t d, std::size_t ffn, std::size_t layers, std::size_t text,
           std::size_t vision, const std::vector<std::pair<std::size_t, std::size_t>>& stages,
           std::size_t decode_steps) {
            CostParams params;
            params.hidden_dim = d;
            params.ffn_dim = ffn;
            params.num_layers = layers;
            params.text_len = text;
            params.initial_vision = vision;
            params.decode_steps = decode_steps;
            if (!stages.empty()) {
                params.schedule = make_schedule(stages, layers);
            } else {
                params.schedule.total_layers = layers;
            }
            const CostReport report = run_cost(params);
            py::dict out;
            out["prefill_total"] = report.prefill_total;
            out["prune_total"] = report.prune_total;
            out["decode_total"] = report.decode_total;
            out["grand_total"] = report.grand_total;
            out["dense_prefill_total"] = report.dense_prefill_total;
            out["dense_grand_total"] = report.dense_grand_total;
            out["prefill_ratio_vs_dense"] = report.prefill_ratio_vs_dense;
            out["ratio_vs_dense"] = report.ratio_vs_dense;
            return out;
        },
        py::arg("d"), py::arg("ffn"), py::arg("layers"), py::arg("text"), py::arg("vision"),
        py::arg("stages") = std::vector<std::pair<std::size_t, std::size_t>>{},
        py::arg("decode_steps") = 0,
        "Whole-run FLOPs accounting over the layer timeline.");

    m.def(
        "simulate_attention",
        [](std::size_t num_layers, std::size_t hidden, std::size_t ffn, std::size_t heads,
           std::uint64_t seed, std::size_t vision, std::size_t text, std::uint64_t sample_seed,
           const std::vector<std::pair<std::size_t, std::size_t>>& stages) {
            ModelConfig cfg{num_layers, hidden, ffn, heads, seed};
            const Model model = init_model(cfg);
            Sample sample = make_sample(cfg, SampleSpec{vision, text, sample_seed, 0.0, 0.0});
            LayerHook hook;
            if (!stages.empty()) {
                hook = make_hook(make_schedule(stages, num_layers));
            }
            const PrefillResult result = prefill(model, std::move(sample.seq), hook, "py");
            py::list layers;
            for (const LayerAttention& layer : result.maps.per_layer) {
                py::dict entry;
                entry["layer_index"] = layer.layer_index;
                entry["t2t"] = to_array(layer.t2t);
                entry["t2v"] = to_array(layer.t2v);
                entry["vision_origins"] = layer.vision_origins;
                layers.append(entry);
            }
            return layers;
        },
        py::arg("num_layers"), py::arg("hidden"), py::arg("ffn"), py::arg("heads"),
        py::arg("seed"), py::arg("vision"), py::arg("text"), py::arg("sample_seed"),
        py::arg("stages") = std::vector<std::pair<std::size_t, std::size_t>>{},
        "Run the deterministic toy transformer and return per-layer attention blocks.");

#ifdef VERSION_INFO
#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)
    m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
    m.attr("__version__") = "dev";
#endif
}
