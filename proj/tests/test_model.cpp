#include <doctest.h>

#include <cmath>

#include "vtprune/errors.hpp"
#include "vtprune/model.hpp"
#include "vtprune/selection.hpp"

using namespace vtprune;

namespace {

ModelConfig small_config() {
    return ModelConfig{2, 8, 16, 2, 7};
}

TokenSequence small_sequence(std::size_t vision, std::size_t text, std::uint64_t seed) {
    return make_sample(small_config(), SampleSpec{vision, text, seed}).seq;
}

} // namespace

TEST_CASE("init_model is deterministic per config") {
    const ModelConfig cfg = small_config();
    const Model a = init_model(cfg);
    const Model b = init_model(cfg);
    REQUIRE(a.layers.size() == b.layers.size());
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        CHECK(a.layers[l].wq.data == b.layers[l].wq.data);
        CHECK(a.layers[l].w_out.data == b.layers[l].w_out.data);
    }
    CHECK(cfg.head_dim() == 4);
}

TEST_CASE("differing seeds change at least one weight") {
    ModelConfig cfg = small_config();
    const Model a = init_model(cfg);
    cfg.seed += 1;
    const Model b = init_model(cfg);
    CHECK(a.layers[0].wq.data != b.layers[0].wq.data);
}

TEST_CASE("a layer's weights do not depend on the layer count") {
    ModelConfig shallow = small_config();
    ModelConfig deep = small_config();
    deep.num_layers = 5;
    const Model a = init_model(shallow);
    const Model b = init_model(deep);
    CHECK(a.layers[1].wv.data == b.layers[1].wv.data);
}

TEST_CASE("invalid configs are rejected") {
    CHECK_THROWS_AS(init_model(ModelConfig{1, 9, 4, 2, 0}), InvalidArgument);
    CHECK_THROWS_AS(init_model(ModelConfig{0, 8, 4, 2, 0}), InvalidArgument);
    CHECK_THROWS_AS(init_model(ModelConfig{1, 8, 0, 2, 0}), InvalidArgument);
}

TEST_CASE("extract_blocks slices the text rows") {
    // One text token attending [0.3, 0.2] to vision and [0.5] to itself.
    Matrix full = Matrix::from_rows({{1.0, 0.0, 0.0},
                                     {0.4, 0.6, 0.0},
                                     {0.3, 0.2, 0.5}});
    const auto [t2t, t2v] = extract_blocks(full, 2, 1);
    CHECK(t2v.rows == 1);
    CHECK(t2v.cols == 2);
    CHECK(t2v.at(0, 0) == 0.3);
    CHECK(t2v.at(0, 1) == 0.2);
    CHECK(t2t.rows == 1);
    CHECK(t2t.at(0, 0) == 0.5);
}

TEST_CASE("extract_blocks with no vision tokens returns the full matrix as t2t") {
    const Matrix full = Matrix::from_rows({{1.0, 0.0}, {0.5, 0.5}});
    const auto [t2t, t2v] = extract_blocks(full, 0, 2);
    CHECK(t2v.cols == 0);
    CHECK(t2t == full);
}

TEST_CASE("extract_blocks rejects mismatched dimensions") {
    CHECK_THROWS_AS(extract_blocks(Matrix(3, 3, 0.0), 2, 2), DimensionError);
}

TEST_CASE("prefill with a keep-all hook changes nothing") {
    const Model model = init_model(small_config());
    const LayerHook keep_all = [](const LayerAttention& layer) {
        return std::optional<std::vector<std::size_t>>(layer.vision_origins);
    };
    const PrefillResult result = prefill(model, small_sequence(4, 3, 1), keep_all, "s");
    CHECK(result.seq.vision_count == 4);
    CHECK(result.seq.text_count == 3);
}

TEST_CASE("dropping to k tokens at layer 0 narrows later t2v blocks") {
    ModelConfig cfg = small_config();
    cfg.num_layers = 4;
    const Model model = init_model(cfg);
    const LayerHook drop_to_two = [](const LayerAttention& layer)
        -> std::optional<std::vector<std::size_t>> {
        if (layer.layer_index == 0) {
            return std::vector<std::size_t>{1, 3};
        }
        return std::nullopt;
    };
    const PrefillResult result = prefill(model, small_sequence(5, 3, 2), drop_to_two, "s");
    CHECK(result.seq.vision_count == 2);
    for (const LayerAttention& layer : result.maps.per_layer) {
        if (layer.layer_index >= 1) {
            CHECK(layer.t2v.cols == 2);
            CHECK(layer.vision_origins == std::vector<std::size_t>{1, 3});
        }
    }
    // Survivors keep their original position ids.
    CHECK(result.seq.position_ids[0] == 1);
    CHECK(result.seq.position_ids[1] == 3);
    CHECK(result.seq.position_ids[2] == 5);
}

TEST_CASE("first text query attends to all vision tokens plus itself") {
    // Causality: with V vision tokens ahead of it, text token 0 has exactly
    // V + 1 allowed attention targets. Count nonzeros in its recorded row.
    const Model model = init_model(small_config());
    const PrefillResult result = prefill(model, small_sequence(4, 3, 3), {}, "s");
    const LayerAttention& layer = result.maps.per_layer.front();
    std::size_t nonzero = 0;
    for (std::size_t j = 0; j < layer.t2v.cols; ++j) {
        nonzero += layer.t2v.at(0, j) != 0.0;
    }
    for (std::size_t j = 0; j < layer.t2t.cols; ++j) {
        nonzero += layer.t2t.at(0, j) != 0.0;
    }
    CHECK(nonzero == 4 + 1);
}

TEST_CASE("text attention rows conserve mass and respect causality") {
    ModelConfig cfg = small_config();
    cfg.num_layers = 3;
    const Model model = init_model(cfg);
    const PrefillResult result = prefill(model, small_sequence(6, 4, 4), {}, "s");
    for (const LayerAttention& layer : result.maps.per_layer) {
        for (std::size_t i = 0; i < layer.t2t.rows; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < layer.t2v.cols; ++j) {
                sum += layer.t2v.at(i, j);
            }
            for (std::size_t j = 0; j < layer.t2t.cols; ++j) {
                sum += layer.t2t.at(i, j);
                if (j > i) {
                    CHECK(layer.t2t.at(i, j) == 0.0);
                }
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("prefill output is deterministic") {
    const Model model = init_model(small_config());
    const PrefillResult a = prefill(model, small_sequence(4, 3, 5), {}, "s");
    const PrefillResult b = prefill(model, small_sequence(4, 3, 5), {}, "s");
    REQUIRE(a.maps.per_layer.size() == b.maps.per_layer.size());
    for (std::size_t l = 0; l < a.maps.per_layer.size(); ++l) {
        CHECK(a.maps.per_layer[l].t2t.data == b.maps.per_layer[l].t2t.data);
        CHECK(a.maps.per_layer[l].t2v.data == b.maps.per_layer[l].t2v.data);
    }
}

TEST_CASE("hooks cannot drop text tokens or reference unknown tokens") {
    const Model model = init_model(small_config());
    const LayerHook out_of_range = [](const LayerAttention&) {
        return std::optional<std::vector<std::size_t>>({{9}});
    };
    CHECK_THROWS_AS(prefill(model, small_sequence(4, 3, 6), out_of_range, "s"), InvalidArgument);

    const LayerHook text_position = [](const LayerAttention&) {
        // Position 4 is the first text token in a V=4 sequence.
        return std::optional<std::vector<std::size_t>>({{4}});
    };
    CHECK_THROWS_AS(prefill(model, small_sequence(4, 3, 6), text_position, "s"), InvalidArgument);

    const LayerHook duplicates = [](const LayerAttention&) {
        return std::optional<std::vector<std::size_t>>({{1, 1}});
    };
    CHECK_THROWS_AS(prefill(model, small_sequence(4, 3, 6), duplicates, "s"), InvalidArgument);
}

TEST_CASE("make_sample is deterministic and plants the requested fraction") {
    const ModelConfig cfg = small_config();
    SampleSpec spec{20, 4, 9, 0.1, 4.0};
    const Sample a = make_sample(cfg, spec);
    const Sample b = make_sample(cfg, spec);
    CHECK(a.seq.hidden.data == b.seq.hidden.data);
    CHECK(a.planted == b.planted);
    CHECK(a.planted.size() == fraction_count(0.1, 20));
    CHECK(std::is_sorted(a.planted.begin(), a.planted.end()));

    spec.planted_fraction = 0.0;
    CHECK(make_sample(cfg, spec).planted.empty());
}

TEST_CASE("planted vision rows carry larger norms than their peers") {
    const ModelConfig cfg{1, 16, 8, 1, 3};
    const Sample sample = make_sample(cfg, SampleSpec{30, 5, 11, 0.1, 4.0});
    REQUIRE(!sample.planted.empty());
    auto row_norm = [&](std::size_t row) {
        double sq = 0.0;
        for (std::size_t c = 0; c < cfg.hidden_dim; ++c) {
            sq += sample.seq.hidden.at(row, c) * sample.seq.hidden.at(row, c);
        }
        return std::sqrt(sq);
    };
    double planted_min = 1e300;
    double plain_max = 0.0;
    for (std::size_t v = 0; v < 30; ++v) {
        const bool is_planted =
            std::binary_search(sample.planted.begin(), sample.planted.end(), v);
        if (is_planted) {
            planted_min = std::min(planted_min, row_norm(v));
        } else {
            plain_max = std::max(plain_max, row_norm(v));
        }
    }
    CHECK(planted_min > plain_max);
}
