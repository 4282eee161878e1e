// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "spatial.hpp"

#include <algorithm>
#include <cmath>

namespace egogs::detail {

PointGrid::PointGrid(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    if (points_.empty()) return;
    Vec3 lo = points_.front(), hi = points_.front();
    for (const Vec3 &p : points_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    lo_ = lo;
    const Vec3 ext = (hi - lo).cwiseMax(1e-9);
    // About two points per occupied cell for surface-like sets.
    const double n = static_cast<double>(points_.size());
    const double area = ext.x() * ext.y() + ext.y() * ext.z() + ext.x() * ext.z();
    cell_ = std::max(std::sqrt(2.0 * area / n), 1e-9);
    max_ring_ = static_cast<long>(std::ceil(ext.maxCoeff() / cell_)) + 1;
    for (int i = 0; i < static_cast<int>(points_.size()); ++i) cells_[key_of(points_[i])].push_back(i);
}

PointGrid::Key PointGrid::key_of(const Vec3 &p) const {
    const Vec3 c = (p - lo_) / cell_;
    return {static_cast<long>(std::floor(c.x())), static_cast<long>(std::floor(c.y())),
            static_cast<long>(std::floor(c.z()))};
}

std::vector<int> PointGrid::nearest(const Vec3 &query, int k, int exclude) const {
    std::vector<std::pair<double, int>> found;
    if (points_.empty() || k <= 0) return {};
    const Key q = key_of(query);
    for (long ring = 0; ring <= max_ring_ + 1; ++ring) {
        for (long dx = -ring; dx <= ring; ++dx)
            for (long dy = -ring; dy <= ring; ++dy)
                for (long dz = -ring; dz <= ring; ++dz) {
                    if (std::max({std::labs(dx), std::labs(dy), std::labs(dz)}) != ring) continue;
                    auto it = cells_.find({q.x + dx, q.y + dy, q.z + dz});
                    if (it == cells_.end()) continue;
                    for (int i : it->second)
                        if (i != exclude) found.emplace_back((points_[i] - query).squaredNorm(), i);
                }
        // Everything within `ring` cells of the query cell has been seen, so
        // candidates closer than ring * cell are final.
        if (static_cast<int>(found.size()) >= k) {
            std::partial_sort(found.begin(), found.begin() + k, found.end());
            const double safe = ring * cell_;
            if (found[k - 1].first <= safe * safe) break;
        }
    }
    std::sort(found.begin(), found.end());
    std::vector<int> out;
    for (int i = 0; i < k && i < static_cast<int>(found.size()); ++i) out.push_back(found[i].second);
    return out;
}

} // namespace egogs::detail
