#include "vtprune/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "vtprune/errors.hpp"
#include "vtprune/rng.hpp"
#include "vtprune/selection.hpp"

namespace vtprune {

void ModelConfig::validate() const {
    if (num_layers < 1 || hidden_dim < 1 || ffn_dim < 1 || num_heads < 1) {
        throw InvalidArgument("ModelConfig: all dimensions must be >= 1");
    }
    if (hidden_dim % num_heads != 0) {
        throw InvalidArgument("ModelConfig: hidden_dim " + std::to_string(hidden_dim) +
                              " not divisible by num_heads " + std::to_string(num_heads));
    }
}

void TokenSequence::validate() const {
    if (hidden.rows != length()) {
        throw DimensionError("TokenSequence: hidden rows " + std::to_string(hidden.rows) +
                             " vs token count " + std::to_string(length()));
    }
    if (position_ids.size() != length()) {
        throw DimensionError("TokenSequence: position_ids length mismatch");
    }
    for (std::size_t i = 1; i < position_ids.size(); ++i) {
        if (position_ids[i] <= position_ids[i - 1]) {
            throw InvalidArgument("TokenSequence: position_ids must be strictly increasing");
        }
    }
    check_finite(hidden, "TokenSequence hidden");
}

namespace {

Matrix draw_matrix(SeededRng& rng, std::size_t rows, std::size_t cols, double scale) {
    Matrix m(rows, cols);
    for (double& x : m.data) {
        x = rng.uniform(-scale, scale);
    }
    return m;
}

} // namespace

Model init_model(const ModelConfig& cfg) {
    cfg.validate();
    Model model{cfg, {}};
    model.layers.reserve(cfg.num_layers);

    SeededRng rng(cfg.seed);
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
    const double ffn_scale = 1.0 / std::sqrt(static_cast<double>(cfg.ffn_dim));
    for (std::size_t layer = 0; layer < cfg.num_layers; ++layer) {
        LayerWeights w;
        w.wq = draw_matrix(rng, cfg.hidden_dim, cfg.hidden_dim, attn_scale);
        w.wk = draw_matrix(rng, cfg.hidden_dim, cfg.hidden_dim, attn_scale);
        w.wv = draw_matrix(rng, cfg.hidden_dim, cfg.hidden_dim, attn_scale);
        w.wo = draw_matrix(rng, cfg.hidden_dim, cfg.hidden_dim, attn_scale);
        w.w_in = draw_matrix(rng, cfg.hidden_dim, cfg.ffn_dim, attn_scale);
        w.w_out = draw_matrix(rng, cfg.ffn_dim, cfg.hidden_dim, ffn_scale);
        model.layers.push_back(std::move(w));
    }
    return model;
}

std::pair<Matrix, Matrix> extract_blocks(const Matrix& full_attention,
                                         std::size_t vision_count,
                                         std::size_t text_count) {
    const std::size_t n = vision_count + text_count;
    if (full_attention.rows != n || full_attention.cols != n) {
        throw DimensionError("extract_blocks: matrix is " + std::to_string(full_attention.rows) +
                             "x" + std::to_string(full_attention.cols) + ", expected " +
                             std::to_string(n) + "x" + std::to_string(n));
    }
    Matrix t2t(text_count, text_count);
    Matrix t2v(text_count, vision_count);
    for (std::size_t i = 0; i < text_count; ++i) {
        const double* src = full_attention.row(vision_count + i);
        std::copy(src, src + vision_count, t2v.row(i));
        std::copy(src + vision_count, src + n, t2t.row(i));
    }
    return {std::move(t2t), std::move(t2v)};
}

namespace {

// Head-averaged causal attention for one layer. Returns the averaged map and
// adds the attention output (before wo) into `concat_out`.
Matrix attend(const Matrix& q, const Matrix& k, const Matrix& v,
              std::size_t num_heads, Matrix& concat_out) {
    const std::size_t n = q.rows;
    const std::size_t head_dim = q.cols / num_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    const double inv_heads = 1.0 / static_cast<double>(num_heads);

    Matrix averaged(n, n);
    Matrix scores(n, n);
    for (std::size_t h = 0; h < num_heads; ++h) {
        const std::size_t off = h * head_dim;
        for (std::size_t i = 0; i < n; ++i) {
            const double* qi = q.row(i) + off;
            double* srow = scores.row(i);
            for (std::size_t j = 0; j <= i; ++j) {
                const double* kj = k.row(j) + off;
                double dot = 0.0;
                for (std::size_t c = 0; c < head_dim; ++c) {
                    dot += qi[c] * kj[c];
                }
                srow[j] = dot * inv_sqrt;
            }
        }
        const Matrix attn = softmax_rows(scores, MaskKind::causal);
        for (std::size_t i = 0; i < n * n; ++i) {
            averaged.data[i] += attn.data[i] * inv_heads;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double* arow = attn.row(i);
            double* orow = concat_out.row(i) + off;
            for (std::size_t j = 0; j <= i; ++j) {
                const double aij = arow[j];
                const double* vj = v.row(j) + off;
                for (std::size_t c = 0; c < head_dim; ++c) {
                    orow[c] += aij * vj[c];
                }
            }
        }
    }
    return averaged;
}

std::vector<std::size_t> validate_keep_set(std::vector<std::size_t> kept,
                                           const std::vector<std::size_t>& alive) {
    std::sort(kept.begin(), kept.end());
    if (std::adjacent_find(kept.begin(), kept.end()) != kept.end()) {
        throw InvalidArgument("prefill hook: duplicate indices in keep set");
    }
    if (!std::includes(alive.begin(), alive.end(), kept.begin(), kept.end())) {
        throw InvalidArgument("prefill hook: keep set references tokens that are not live vision tokens");
    }
    return kept;
}

} // namespace

PrefillResult prefill(const Model& model, TokenSequence seq,
                      const LayerHook& hook, std::string sample_id) {
    seq.validate();
    if (seq.hidden.cols != model.cfg.hidden_dim) {
        throw DimensionError("prefill: sequence hidden_dim " + std::to_string(seq.hidden.cols) +
                             " vs model " + std::to_string(model.cfg.hidden_dim));
    }
    if (seq.text_count == 0) {
        throw InvalidArgument("prefill: sequence has no text tokens");
    }

    // Original positions of the vision tokens still in the sequence.
    std::vector<std::size_t> origins(seq.position_ids.begin(),
                                     seq.position_ids.begin() + seq.vision_count);

    AttentionMaps maps;
    maps.sample_id = std::move(sample_id);
    maps.per_layer.reserve(model.cfg.num_layers);

    for (std::size_t layer = 0; layer < model.cfg.num_layers; ++layer) {
        const LayerWeights& w = model.layers[layer];
        const std::size_t n = seq.length();

        const Matrix q = matmul(seq.hidden, w.wq);
        const Matrix k = matmul(seq.hidden, w.wk);
        const Matrix v = matmul(seq.hidden, w.wv);

        Matrix concat(n, model.cfg.hidden_dim);
        const Matrix averaged = attend(q, k, v, model.cfg.num_heads, concat);
        add_inplace(seq.hidden, matmul(concat, w.wo));

        Matrix ffn = matmul(seq.hidden, w.w_in);
        relu_inplace(ffn);
        add_inplace(seq.hidden, matmul(ffn, w.w_out));
        check_finite(seq.hidden, "prefill hidden state");

        LayerAttention rec;
        rec.layer_index = layer;
        std::tie(rec.t2t, rec.t2v) = extract_blocks(averaged, seq.vision_count, seq.text_count);
        rec.vision_origins = origins;
        maps.per_layer.push_back(rec);

        if (!hook) {
            continue;
        }
        auto decision = hook(maps.per_layer.back());
        if (!decision || decision->size() == origins.size()) {
            continue;
        }
        const auto kept = validate_keep_set(std::move(*decision), origins);

        Matrix hidden(kept.size() + seq.text_count, model.cfg.hidden_dim);
        std::vector<std::size_t> positions;
        positions.reserve(kept.size() + seq.text_count);
        std::size_t out_row = 0;
        for (std::size_t i = 0; i < seq.vision_count; ++i) {
            if (std::binary_search(kept.begin(), kept.end(), origins[i])) {
                std::copy(seq.hidden.row(i), seq.hidden.row(i) + hidden.cols, hidden.row(out_row++));
                positions.push_back(seq.position_ids[i]);
            }
        }
        for (std::size_t i = seq.vision_count; i < n; ++i) {
            std::copy(seq.hidden.row(i), seq.hidden.row(i) + hidden.cols, hidden.row(out_row++));
            positions.push_back(seq.position_ids[i]);
        }
        seq.hidden = std::move(hidden);
        seq.position_ids = std::move(positions);
        seq.vision_count = kept.size();
        origins = kept;
    }
    return {std::move(seq), std::move(maps)};
}

Sample make_sample(const ModelConfig& cfg, const SampleSpec& spec) {
    cfg.validate();
    if (spec.text_count == 0) {
        throw InvalidArgument("make_sample: text_count must be >= 1");
    }
    if (spec.planted_fraction < 0.0 || spec.planted_fraction > 1.0) {
        throw InvalidArgument("make_sample: planted_fraction must be in [0, 1]");
    }

    const std::size_t d = cfg.hidden_dim;
    const std::size_t v_count = spec.vision_count;
    const std::size_t t_count = spec.text_count;
    SeededRng rng(spec.seed);

    // Text embeddings are drawn before vision so planted vision tokens can
    // anchor to them.
    Matrix text(t_count, d);
    for (double& x : text.data) {
        x = rng.uniform(-1.0, 1.0);
    }
    Matrix vision(v_count, d);
    for (double& x : vision.data) {
        x = rng.uniform(-1.0, 1.0);
    }

    std::vector<std::size_t> planted;
    if (spec.planted_fraction > 0.0 && v_count > 0) {
        const std::size_t count = fraction_count(spec.planted_fraction, v_count);
        std::vector<std::size_t> pool(v_count);
        for (std::size_t i = 0; i < v_count; ++i) {
            pool[i] = i;
        }
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + rng.next_below(v_count - i);
            std::swap(pool[i], pool[j]);
        }
        planted.assign(pool.begin(), pool.begin() + count);
        std::sort(planted.begin(), planted.end());

        for (std::size_t rank = 0; rank < planted.size(); ++rank) {
            const std::size_t pos = planted[rank];
            const double* anchor = text.row(rank % t_count);
            double* row = vision.row(pos);
            for (std::size_t c = 0; c < d; ++c) {
                row[c] = spec.planted_gain * anchor[c] + 0.25 * rng.uniform(-1.0, 1.0);
            }
        }
    }

    Sample sample;
    sample.planted = std::move(planted);
    sample.seq.vision_count = v_count;
    sample.seq.text_count = t_count;
    sample.seq.hidden = Matrix(v_count + t_count, d);
    for (std::size_t i = 0; i < v_count; ++i) {
        std::copy(vision.row(i), vision.row(i) + d, sample.seq.hidden.row(i));
    }
    for (std::size_t i = 0; i < t_count; ++i) {
        std::copy(text.row(i), text.row(i) + d, sample.seq.hidden.row(v_count + i));
    }
    sample.seq.position_ids.resize(v_count + t_count);
    for (std::size_t i = 0; i < v_count + t_count; ++i) {
        sample.seq.position_ids[i] = i;
    }
    return sample;
}

} // namespace vtprune
