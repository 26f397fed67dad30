#include "vtprune/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "vtprune/errors.hpp"
#include "vtprune/selection.hpp"

namespace vtprune {

std::uint64_t ShiftHistogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

AttentionCurve cumulative_curve(const Vector& per_layer_values, std::size_t token_id) {
    if (per_layer_values.size() < 2) {
        throw InvalidArgument("cumulative_curve: need at least two layers");
    }
    check_finite(per_layer_values, "cumulative_curve input");
    AttentionCurve curve;
    curve.token_id = token_id;
    curve.values = per_layer_values;
    curve.cumulative.resize(per_layer_values.size());
    double running = 0.0;
    for (std::size_t i = 0; i < per_layer_values.size(); ++i) {
        running += per_layer_values[i];
        curve.cumulative[i] = running;
    }
    return curve;
}

namespace {

// Within-segment sum of squared deviations for y[first..last).
double segment_sse(const Vector& y, std::size_t first, std::size_t last, double& mean_out) {
    double mean = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        mean += y[i];
    }
    mean /= static_cast<double>(last - first);
    double sse = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        const double dev = y[i] - mean;
        sse += dev * dev;
    }
    mean_out = mean;
    return sse;
}

} // namespace

ChangePointResult detect_change_point(const Vector& cumulative, std::size_t token_id) {
    const std::size_t len = cumulative.size();
    if (len < 2) {
        throw InvalidArgument("detect_change_point: need at least two points");
    }
    check_finite(cumulative, "detect_change_point input");

    // Objective per split from prefix sums: total squared norm minus each
    // segment's squared-sum term.
    Vector prefix(len + 1, 0.0);
    double sq_total = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        prefix[i + 1] = prefix[i] + cumulative[i];
        sq_total += cumulative[i] * cumulative[i];
    }

    std::size_t best_b = 1;
    double best_obj = std::numeric_limits<double>::infinity();
    for (std::size_t b = 1; b < len; ++b) {
        const double left = prefix[b];
        const double right = prefix[len] - prefix[b];
        const double obj = sq_total - left * left / static_cast<double>(b) -
                           right * right / static_cast<double>(len - b);
        if (obj < best_obj) {
            best_obj = obj;
            best_b = b;
        }
    }

    ChangePointResult result;
    result.token_id = token_id;
    result.breakpoint = best_b;
    const double sse_first = segment_sse(cumulative, 0, best_b, result.mean_first);
    const double sse_second = segment_sse(cumulative, best_b, len, result.mean_second);
    result.sse = sse_first + sse_second;
    return result;
}

Matrix received_attention_matrix(const AttentionMaps& maps) {
    if (maps.per_layer.empty()) {
        throw InvalidArgument("received_attention_matrix: no recorded layers");
    }
    const auto& universe = maps.per_layer.front().vision_origins;
    std::unordered_map<std::size_t, std::size_t> row_of;
    row_of.reserve(universe.size());
    for (std::size_t i = 0; i < universe.size(); ++i) {
        row_of.emplace(universe[i], i);
    }

    Matrix received(universe.size(), maps.per_layer.size());
    for (std::size_t l = 0; l < maps.per_layer.size(); ++l) {
        const LayerAttention& layer = maps.per_layer[l];
        if (layer.vision_origins.size() != layer.t2v.cols) {
            throw DimensionError("received_attention_matrix: vision_origins vs t2v columns");
        }
        for (std::size_t col = 0; col < layer.t2v.cols; ++col) {
            const auto it = row_of.find(layer.vision_origins[col]);
            if (it == row_of.end()) {
                throw InvalidArgument("received_attention_matrix: layer " + std::to_string(l) +
                                      " has a vision token missing from the first layer");
            }
            double total = 0.0;
            for (std::size_t row = 0; row < layer.t2v.rows; ++row) {
                total += layer.t2v.at(row, col);
            }
            received.at(it->second, l) = total;
        }
    }
    return received;
}

std::vector<std::size_t> top_vision_tokens(const AttentionMaps& maps, double fraction) {
    const Matrix received = received_attention_matrix(maps);
    if (received.rows == 0) {
        throw InvalidArgument("top_vision_tokens: no vision tokens");
    }
    Vector totals(received.rows, 0.0);
    for (std::size_t t = 0; t < received.rows; ++t) {
        for (std::size_t l = 0; l < received.cols; ++l) {
            totals[t] += received.at(t, l);
        }
    }
    const std::size_t k = fraction_count(fraction, totals.size());
    const auto& universe = maps.per_layer.front().vision_origins;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t row : top_indices_by_score(totals, k)) {
        out.push_back(universe[row]);
    }
    return out;
}

ShiftHistogram shift_histogram(std::span<const AttentionMaps> corpus, double fraction) {
    ShiftHistogram hist;
    hist.fraction = fraction;
    if (corpus.empty()) {
        return hist;
    }
    hist.num_layers = corpus.front().num_layers();
    hist.counts.assign(hist.num_layers, 0);

    for (const AttentionMaps& maps : corpus) {
        if (maps.num_layers() != hist.num_layers) {
            throw InvalidArgument("shift_histogram: samples disagree on layer count");
        }
        const Matrix received = received_attention_matrix(maps);
        const auto& universe = maps.per_layer.front().vision_origins;
        std::unordered_map<std::size_t, std::size_t> row_of;
        for (std::size_t i = 0; i < universe.size(); ++i) {
            row_of.emplace(universe[i], i);
        }
        for (std::size_t token : top_vision_tokens(maps, fraction)) {
            const std::size_t row = row_of.at(token);
            Vector values(received.cols);
            for (std::size_t l = 0; l < received.cols; ++l) {
                values[l] = received.at(row, l);
            }
            const AttentionCurve curve = cumulative_curve(values, token);
            const ChangePointResult cp = detect_change_point(curve.cumulative, token);
            ++hist.counts[cp.breakpoint];
        }
        ++hist.sample_count;
    }
    return hist;
}

std::vector<std::size_t> key_text_tokens(const Matrix& t2t, double fraction) {
    if (t2t.empty()) {
        throw InvalidArgument("key_text_tokens: empty text block");
    }
    if (t2t.rows != t2t.cols) {
        throw DimensionError("key_text_tokens: t2t block must be square");
    }
    const Vector importance = column_sums(t2t);
    return top_indices_by_score(importance, fraction_count(fraction, importance.size()));
}

MiouMatrix miou_matrix(std::span<const AttentionMaps> corpus, double fraction) {
    if (corpus.empty()) {
        throw InvalidArgument("miou_matrix: empty corpus");
    }
    const std::size_t num_layers = corpus.front().num_layers();
    MiouMatrix out;
    out.fraction = fraction;
    out.values = Matrix(num_layers, num_layers);

    for (const AttentionMaps& maps : corpus) {
        if (maps.num_layers() != num_layers) {
            throw InvalidArgument("miou_matrix: samples disagree on layer count");
        }
        if (maps.text_count() == 0) {
            throw InvalidArgument("miou_matrix: sample has no text tokens");
        }
        std::vector<std::vector<std::size_t>> key_sets(num_layers);
        for (std::size_t l = 0; l < num_layers; ++l) {
            key_sets[l] = key_text_tokens(maps.per_layer[l].t2t, fraction);
        }
        for (std::size_t i = 0; i < num_layers; ++i) {
            for (std::size_t j = i; j < num_layers; ++j) {
                std::vector<std::size_t> inter;
                std::set_intersection(key_sets[i].begin(), key_sets[i].end(),
                                      key_sets[j].begin(), key_sets[j].end(),
                                      std::back_inserter(inter));
                const std::size_t uni =
                    key_sets[i].size() + key_sets[j].size() - inter.size();
                const double iou = uni == 0 ? 1.0
                                            : static_cast<double>(inter.size()) /
                                                  static_cast<double>(uni);
                out.values.at(i, j) += iou;
            }
        }
        ++out.sample_count;
    }

    const auto n = static_cast<double>(out.sample_count);
    for (std::size_t i = 0; i < num_layers; ++i) {
        for (std::size_t j = i; j < num_layers; ++j) {
            out.values.at(i, j) /= n;
            out.values.at(j, i) = out.values.at(i, j);
        }
    }
    return out;
}

} // namespace vtprune
