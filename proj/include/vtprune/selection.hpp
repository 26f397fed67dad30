#pragma once

#include <cstddef>
#include <vector>

#include "vtprune/linalg.hpp"

namespace vtprune {

/// Indices of the k largest scores, ties broken toward the smaller index.
/// The result is sorted ascending. k must not exceed scores.size().
std::vector<std::size_t> top_indices_by_score(const Vector& scores, std::size_t k);

/// ceil(fraction * n), guarded against floating-point drift on exact
/// multiples. fraction must be in (0, 1].
std::size_t fraction_count(double fraction, std::size_t n);

} // namespace vtprune
