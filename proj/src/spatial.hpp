// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/types.hpp"

#include <span>
#include <unordered_map>
#include <vector>

namespace egogs::detail {

/// Uniform hash grid over a fixed point set for k-nearest-neighbor queries.
class PointGrid {
  public:
    explicit PointGrid(std::span<const Vec3> points);

    /// Indices of the k nearest points to `query`, closest first. `exclude`
    /// (when >= 0) is skipped so a point is not its own neighbor.
    std::vector<int> nearest(const Vec3 &query, int k, int exclude = -1) const;

  private:
    struct Key {
        long x, y, z;
        bool operator==(const Key &) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key &k) const noexcept {
            return static_cast<std::size_t>(k.x * 73856093L ^ k.y * 19349663L ^ k.z * 83492791L);
        }
    };
    Key key_of(const Vec3 &p) const;

    std::vector<Vec3> points_;
    double cell_ = 1.0;
    Vec3 lo_ = Vec3::Zero();
    long max_ring_ = 0;
    std::unordered_map<Key, std::vector<int>, KeyHash> cells_;
};

} // namespace egogs::detail
