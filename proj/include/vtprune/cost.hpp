#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtprune/prune.hpp"

namespace vtprune {

/// Inputs of the analytical FLOPs model. Counts are exact; no measurement.
struct CostParams {
    std::size_t hidden_dim = 0;
    std::size_t ffn_dim = 0;
    std::size_t num_layers = 0;
    std::size_t text_len = 0;
    std::size_t initial_vision = 0;
    PruneSchedule schedule; // empty = dense run
    std::size_t decode_steps = 0;

    void validate() const;
};

struct CostReport {
    std::vector<std::uint64_t> prefill_per_layer;
    std::uint64_t prefill_total = 0;
    std::vector<std::uint64_t> prune_per_stage;
    std::uint64_t prune_total = 0;
    std::vector<std::uint64_t> decode_per_step;
    std::uint64_t decode_total = 0;
    std::uint64_t grand_total = 0;

    std::uint64_t dense_prefill_total = 0;
    std::uint64_t dense_grand_total = 0;
    double prefill_ratio_vs_dense = 1.0;
    double ratio_vs_dense = 1.0;
};

/// One prefill layer over a length-n sequence: 4nd^2 + 2n^2d + 3ndm.
std::uint64_t prefill_layer_flops(std::uint64_t n, std::uint64_t d, std::uint64_t m);

/// Ranking overhead of one pruning stage: T^2 + 2TV.
std::uint64_t prune_overhead_flops(std::uint64_t t, std::uint64_t v);

/// One decode step in one layer with context length n: 4d^2 + 2nd + 3dm.
std::uint64_t decode_step_flops(std::uint64_t n, std::uint64_t d, std::uint64_t m);

/// Walks the layer timeline under the schedule, charging each layer at its
/// live sequence length, each stage its ranking overhead, and each decode
/// step the per-layer decode cost times the layer count. Decode context
/// starts from the post-prefill sequence length and grows by one per step.
/// All arithmetic is integer-exact; overflow raises NumericError.
CostReport run_cost(const CostParams& params);

/// FLOPs rendered in tera-FLOPs with three decimals.
std::string format_tflops(std::uint64_t flops);

} // namespace vtprune
