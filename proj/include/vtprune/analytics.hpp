#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vtprune/linalg.hpp"
#include "vtprune/model.hpp"

namespace vtprune {

/// Per-layer attention received by one token, with its running total.
struct AttentionCurve {
    std::size_t token_id = 0;
    Vector values;
    Vector cumulative;
};

/// Best single split of a series into two constant-mean segments under the
/// least-squares cost. breakpoint b is the 1-based last index of the first
/// segment, so 1 <= b <= length - 1; ties resolve toward smaller b.
struct ChangePointResult {
    std::size_t token_id = 0;
    std::size_t breakpoint = 0;
    double mean_first = 0.0;
    double mean_second = 0.0;
    double sse = 0.0;
};

/// counts[b] = number of analyzed curves whose breakpoint landed at b.
/// Index 0 is unused and stays 0.
struct ShiftHistogram {
    std::vector<std::uint64_t> counts;
    std::size_t num_layers = 0;
    std::size_t sample_count = 0;
    double fraction = 0.0;

    std::uint64_t total() const;
};

/// Mean intersection-over-union of per-layer key-text-token sets,
/// averaged over samples. Symmetric with unit diagonal.
struct MiouMatrix {
    Matrix values;
    std::size_t sample_count = 0;
    double fraction = 0.0;
};

/// Exact prefix sums of per-layer values. Requires length >= 2.
AttentionCurve cumulative_curve(const Vector& per_layer_values, std::size_t token_id = 0);

/// Single change point by exhaustive scan over all splits (binary
/// segmentation restricted to one breakpoint, l2 cost).
ChangePointResult detect_change_point(const Vector& cumulative, std::size_t token_id = 0);

/// Total attention each vision token received per layer: entry (t, l) sums
/// the token's t2v column over all text queries at layer l, 0 where the
/// token was already pruned. Rows follow the first layer's vision_origins.
Matrix received_attention_matrix(const AttentionMaps& maps);

/// Original positions of the ceil(fraction * V) vision tokens with the
/// highest total received attention across all layers.
std::vector<std::size_t> top_vision_tokens(const AttentionMaps& maps, double fraction);

/// Breakpoint distribution over a trace corpus: per sample, the top vision
/// tokens' cumulative received-attention curves each contribute one
/// breakpoint count. All samples must share the layer count.
ShiftHistogram shift_histogram(std::span<const AttentionMaps> corpus, double fraction);

/// The ceil(fraction * T) text tokens with the largest received t2t
/// attention (column sums), ties toward the smaller index.
std::vector<std::size_t> key_text_tokens(const Matrix& t2t, double fraction);

MiouMatrix miou_matrix(std::span<const AttentionMaps> corpus, double fraction);

} // namespace vtprune
