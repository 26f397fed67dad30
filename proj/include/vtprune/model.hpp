#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vtprune/linalg.hpp"

namespace vtprune {

struct ModelConfig {
    std::size_t num_layers = 1;
    std::size_t hidden_dim = 8;
    std::size_t ffn_dim = 16;
    std::size_t num_heads = 1;
    std::uint64_t seed = 0;

    std::size_t head_dim() const { return hidden_dim / num_heads; }
    void validate() const;
};

struct LayerWeights {
    Matrix wq, wk, wv, wo; // hidden_dim x hidden_dim
    Matrix w_in;           // hidden_dim x ffn_dim
    Matrix w_out;          // ffn_dim x hidden_dim
};

/// Weights are immutable after init and safe to share across threads.
struct Model {
    ModelConfig cfg;
    std::vector<LayerWeights> layers;
};

/// Fills all weights from SeededRng(cfg.seed) in a fixed order: for each
/// layer, wq, wk, wv, wo, w_in, w_out, each row-major. A layer's weights
/// depend only on the seed and the layer index, not on num_layers.
Model init_model(const ModelConfig& cfg);

/// A [vision | text] token sequence. Vision rows may be dropped mid-prefill;
/// surviving tokens keep their original position ids.
struct TokenSequence {
    std::size_t vision_count = 0;
    std::size_t text_count = 0;
    Matrix hidden; // (vision_count + text_count) x hidden_dim
    std::vector<std::size_t> position_ids;

    std::size_t length() const { return vision_count + text_count; }
    void validate() const;
};

/// Head-averaged post-softmax attention recorded at one layer, sliced to the
/// text-query rows. vision_origins maps t2v columns to original positions.
struct LayerAttention {
    std::size_t layer_index = 0;
    Matrix t2t; // text_count x text_count, causally masked
    Matrix t2v; // text_count x live vision count
    std::vector<std::size_t> vision_origins;
};

struct AttentionMaps {
    std::string sample_id;
    std::vector<LayerAttention> per_layer;

    std::size_t num_layers() const { return per_layer.size(); }
    std::size_t text_count() const { return per_layer.empty() ? 0 : per_layer.front().t2t.rows; }
};

/// Called after each layer. A returned index set selects the vision tokens
/// (by original position) to keep; nullopt keeps everything. Indices must be
/// a subset of vision_origins with no duplicates. Text tokens cannot be
/// dropped through this interface.
using LayerHook = std::function<std::optional<std::vector<std::size_t>>(const LayerAttention&)>;

struct PrefillResult {
    TokenSequence seq;
    AttentionMaps maps;
};

/// Runs all layers over the sequence: causal multi-head attention with
/// residual, then a two-layer ReLU feed-forward with residual. No
/// normalization sublayers or biases. Records the head-averaged attention
/// blocks per layer and applies the hook's pruning decision between layers.
PrefillResult prefill(const Model& model, TokenSequence seq,
                      const LayerHook& hook = {}, std::string sample_id = {});

/// Slices a full (V+T)x(V+T) attention matrix into the text-query blocks:
/// t2t = rows/cols [V, V+T), t2v = rows [V, V+T) x cols [0, V).
std::pair<Matrix, Matrix> extract_blocks(const Matrix& full_attention,
                                         std::size_t vision_count,
                                         std::size_t text_count);

/// Synthetic input generator. Embeddings are uniform in [-1, 1]. When
/// planted_fraction > 0, ceil(planted_fraction * V) vision tokens are
/// rebuilt as planted_gain * (a text token's embedding) plus small noise,
/// so they draw systematically more text attention than their peers.
struct SampleSpec {
    std::size_t vision_count = 0;
    std::size_t text_count = 0;
    std::uint64_t seed = 0;
    double planted_fraction = 0.0;
    double planted_gain = 4.0;
};

struct Sample {
    TokenSequence seq;
    std::vector<std::size_t> planted; // original vision positions, sorted
};

Sample make_sample(const ModelConfig& cfg, const SampleSpec& spec);

} // namespace vtprune
