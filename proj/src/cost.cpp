#include "vtprune/cost.hpp"

#include <cinttypes>
#include <cstdio>
#include <limits>

#include "vtprune/errors.hpp"

namespace vtprune {

namespace {

constexpr std::uint64_t BOUND = std::uint64_t{1} << 63;

std::uint64_t checked(unsigned __int128 value, const char* what) {
    if (value >= BOUND) {
        throw NumericError(std::string(what) + ": FLOPs count exceeds 2^63");
    }
    return static_cast<std::uint64_t>(value);
}

std::uint64_t add_checked(std::uint64_t a, std::uint64_t b, const char* what) {
    return checked(static_cast<unsigned __int128>(a) + b, what);
}

} // namespace

void CostParams::validate() const {
    if (hidden_dim < 1 || ffn_dim < 1 || num_layers < 1 || text_len < 1) {
        throw InvalidArgument("CostParams: hidden_dim, ffn_dim, num_layers, text_len must be >= 1");
    }
    if (!schedule.empty()) {
        if (schedule.total_layers != num_layers) {
            throw InvalidArgument("CostParams: schedule covers " +
                                  std::to_string(schedule.total_layers) + " layers, model has " +
                                  std::to_string(num_layers));
        }
        schedule.validate();
    }
}

std::uint64_t prefill_layer_flops(std::uint64_t n, std::uint64_t d, std::uint64_t m) {
    if (n < 1 || d < 1 || m < 1) {
        throw InvalidArgument("prefill_layer_flops: n, d, m must be >= 1");
    }
    const auto nn = static_cast<unsigned __int128>(n);
    const auto dd = static_cast<unsigned __int128>(d);
    const auto mm = static_cast<unsigned __int128>(m);
    return checked(4 * nn * dd * dd + 2 * nn * nn * dd + 3 * nn * dd * mm, "prefill_layer_flops");
}

std::uint64_t prune_overhead_flops(std::uint64_t t, std::uint64_t v) {
    if (t < 1) {
        throw InvalidArgument("prune_overhead_flops: t must be >= 1");
    }
    const auto tt = static_cast<unsigned __int128>(t);
    const auto vv = static_cast<unsigned __int128>(v);
    return checked(tt * tt + 2 * tt * vv, "prune_overhead_flops");
}

std::uint64_t decode_step_flops(std::uint64_t n, std::uint64_t d, std::uint64_t m) {
    if (n < 1 || d < 1 || m < 1) {
        throw InvalidArgument("decode_step_flops: n, d, m must be >= 1");
    }
    const auto nn = static_cast<unsigned __int128>(n);
    const auto dd = static_cast<unsigned __int128>(d);
    const auto mm = static_cast<unsigned __int128>(m);
    return checked(4 * dd * dd + 2 * nn * dd + 3 * dd * mm, "decode_step_flops");
}

namespace {

struct StageTotals {
    std::vector<std::uint64_t> prefill_per_layer;
    std::uint64_t prefill_total = 0;
    std::vector<std::uint64_t> decode_per_step;
    std::uint64_t decode_total = 0;
};

StageTotals timeline_cost(const CostParams& params, const PruneSchedule& schedule) {
    StageTotals out;
    PruneSchedule effective = schedule;
    effective.total_layers = params.num_layers;
    const auto counts = schedule_timeline(effective, params.initial_vision);

    out.prefill_per_layer.reserve(params.num_layers);
    for (std::size_t layer = 0; layer < params.num_layers; ++layer) {
        const std::uint64_t n = params.text_len + counts[layer];
        const std::uint64_t f = prefill_layer_flops(n, params.hidden_dim, params.ffn_dim);
        out.prefill_per_layer.push_back(f);
        out.prefill_total = add_checked(out.prefill_total, f, "prefill total");
    }

    std::size_t final_vision = params.initial_vision;
    for (const ScheduleStage& stage : schedule.stages) {
        final_vision = std::min(final_vision, stage.keep_count);
    }
    out.decode_per_step.reserve(params.decode_steps);
    for (std::size_t step = 1; step <= params.decode_steps; ++step) {
        const std::uint64_t n = params.text_len + final_vision + step;
        const std::uint64_t per_layer = decode_step_flops(n, params.hidden_dim, params.ffn_dim);
        const std::uint64_t f =
            checked(static_cast<unsigned __int128>(per_layer) * params.num_layers, "decode step");
        out.decode_per_step.push_back(f);
        out.decode_total = add_checked(out.decode_total, f, "decode total");
    }
    return out;
}

} // namespace

CostReport run_cost(const CostParams& params) {
    params.validate();

    CostReport report;
    const StageTotals scheduled = timeline_cost(params, params.schedule);
    report.prefill_per_layer = scheduled.prefill_per_layer;
    report.prefill_total = scheduled.prefill_total;
    report.decode_per_step = scheduled.decode_per_step;
    report.decode_total = scheduled.decode_total;

    if (!params.schedule.empty()) {
        const auto counts = schedule_timeline(params.schedule, params.initial_vision);
        for (const ScheduleStage& stage : params.schedule.stages) {
            const std::uint64_t live = counts[stage.prune_after_layer];
            const std::uint64_t f = prune_overhead_flops(params.text_len, live);
            report.prune_per_stage.push_back(f);
            report.prune_total = add_checked(report.prune_total, f, "prune total");
        }
    }

    report.grand_total = add_checked(
        add_checked(report.prefill_total, report.prune_total, "grand total"),
        report.decode_total, "grand total");

    const StageTotals dense = timeline_cost(params, PruneSchedule{{}, params.num_layers});
    report.dense_prefill_total = dense.prefill_total;
    report.dense_grand_total = add_checked(dense.prefill_total, dense.decode_total, "dense total");

    report.prefill_ratio_vs_dense = static_cast<double>(report.prefill_total) /
                                    static_cast<double>(report.dense_prefill_total);
    report.ratio_vs_dense = static_cast<double>(report.grand_total) /
                            static_cast<double>(report.dense_grand_total);
    return report;
}

std::string format_tflops(std::uint64_t flops) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3f", static_cast<double>(flops) / 1e12);
    return buf;
}

} // namespace vtprune
