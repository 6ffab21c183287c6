#pragma once

#include <ckdpipe/matrix.hpp>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace ckdpipe::detail {

struct Neighbor {
    double dist2;
    std::size_t index;
    friend bool operator<(const Neighbor& a, const Neighbor& b) {
        return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
    }
};

/// The k rows of `x` (restricted to `candidates`) nearest to `query`, ordered by
/// (squared distance, row index). Row `skip` is excluded.
inline std::vector<Neighbor> k_nearest(const Matrix& x, std::span<const std::size_t> candidates,
                                       std::span<const double> query, std::size_t k,
                                       std::size_t skip = std::numeric_limits<std::size_t>::max()) {
    std::vector<Neighbor> all;
    all.reserve(candidates.size());
    for (std::size_t i : candidates) {
        if (i != skip) {
            all.push_back({squared_distance(query, x.row(i)), i});
        }
    }
    k = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    all.resize(k);
    return all;
}

inline std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = i;
    }
    return v;
}

} // namespace ckdpipe::detail
