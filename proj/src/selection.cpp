#include "vtprune/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "vtprune/errors.hpp"

namespace vtprune {

std::vector<std::size_t> top_indices_by_score(const Vector& scores, std::size_t k) {
    if (k > scores.size()) {
        throw InvalidArgument("top_indices_by_score: k=" + std::to_string(k) +
                              " exceeds " + std::to_string(scores.size()) + " scores");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) {
            return scores[a] > scores[b];
        }
        return a < b;
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

std::size_t fraction_count(double fraction, std::size_t n) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw InvalidArgument("fraction_count: fraction must be in (0, 1]");
    }
    const double raw = fraction * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    k = std::max<std::size_t>(k, 1);
    return std::min(k, n);
}

} // namespace vtprune
