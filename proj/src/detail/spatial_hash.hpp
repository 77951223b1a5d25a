// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

namespace sargcp::detail {

/// Uniform-cell bucket index over a fixed 3D point set. Queries are exact;
/// the cell size only affects speed.
class SpatialHash {
public:
    SpatialHash(const std::vector<Eigen::Vector3d>& points, double cell) : points_(&points), cell_(cell) {
        for (std::size_t i = 0; i < points.size(); ++i) buckets_[key(cell_of(points[i]))].push_back(i);
    }

    struct Hit {
        std::size_t index;
        double distance;
    };

    /// Nearest point within `radius`; ties go to the lower index.
    std::optional<Hit> nearest(const Eigen::Vector3d& q, double radius) const {
        std::optional<Hit> best;
        visit(q, radius, [&](std::size_t i, double d) {
            if (!best || d < best->distance || (d == best->distance && i < best->index)) best = Hit{i, d};
        });
        return best;
    }

    template <class Fn>
    void visit(const Eigen::Vector3d& q, double radius, Fn&& fn) const {
        const auto c = cell_of(q);
        const auto reach = static_cast<std::int64_t>(std::ceil(radius / cell_));
        for (std::int64_t dx = -reach; dx <= reach; ++dx)
            for (std::int64_t dy = -reach; dy <= reach; ++dy)
                for (std::int64_t dz = -reach; dz <= reach; ++dz) {
                    const auto it = buckets_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
                    if (it == buckets_.end()) continue;
                    for (std::size_t i : it->second) {
                        const double d = ((*points_)[i] - q).norm();
                        if (d <= radius) fn(i, d);
                    }
                }
    }

private:
    using Cell = std::array<std::int64_t, 3>;

    Cell cell_of(const Eigen::Vector3d& p) const {
        return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
                static_cast<std::int64_t>(std::floor(p.y() / cell_)),
                static_cast<std::int64_t>(std::floor(p.z() / cell_))};
    }
    static std::uint64_t key(const Cell& c) {
        const auto mix = [](std::int64_t v) { return static_cast<std::uint64_t>(v) & 0x1FFFFFu; };
        return (mix(c[0]) << 42) | (mix(c[1]) << 21) | mix(c[2]);
    }

    const std::vector<Eigen::Vector3d>* points_;
    double cell_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

}  // namespace sargcp::detail
