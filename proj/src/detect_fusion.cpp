// SPDX-License-Identifier: Apache-2.0
#include "sargcp/detect_fusion.hpp"

#include "detail/spatial_hash.hpp"
#include "sargcp/error.hpp"
#include "sargcp/robust_stats.hpp"
#include "sargcp/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace sargcp {

void PsiPointCloud::validate() const {
    for (const auto& p : points) {
        if (!std::isfinite(p.easting) || !std::isfinite(p.northing) || !std::isfinite(p.height))
            throw DomainError("PSI point '" + p.id + "' has a non-finite position");
        if (!(p.coherence >= 0.0 && p.coherence <= 1.0))
            throw DomainError("PSI point '" + p.id + "' coherence outside [0, 1]");
        if (!(p.height_precision >= 0.0) || !(p.adi >= 0.0))
            throw DomainError("PSI point '" + p.id + "' has a negative attribute");
    }
}

io::PointTable psi_cloud_to_table(const PsiPointCloud& cloud) {
    io::PointTable t({"id", "easting", "northing", "height", "coherence", "height_precision", "adi"});
    t.set_meta("kind", "psi");
    t.set_meta("stack", cloud.stack_id);
    t.set_meta("zone", std::to_string(cloud.zone));
    t.set_meta("north", cloud.north ? "true" : "false");
    for (const auto& p : cloud.points)
        t.add_row({p.id, io::num(p.easting), io::num(p.northing), io::num(p.height), io::num(p.coherence),
                   io::num(p.height_precision), io::num(p.adi)});
    return t;
}

PsiPointCloud psi_cloud_from_table(const io::PointTable& t) {
    t.require_columns({"id", "easting", "northing", "height", "coherence", "height_precision", "adi"});
    PsiPointCloud cloud;
    const auto stack = t.meta("stack");
    const auto zone = t.meta("zone");
    if (!stack || stack->empty()) throw ParseError(t.source(), ParseError::Unit::Line, 1, "PSI table lacks 'stack' metadata");
    if (!zone || !text::parse_int(*zone))
        throw ParseError(t.source(), ParseError::Unit::Line, 1, "PSI table lacks integer 'zone' metadata");
    cloud.stack_id = *stack;
    cloud.zone = static_cast<int>(*text::parse_int(*zone));
    cloud.north = t.meta("north").value_or("true") != "false";
    for (std::size_t r = 0; r < t.size(); ++r) {
        cloud.points.push_back({t.text(r, "id"), t.number(r, "easting"), t.number(r, "northing"),
                                t.number(r, "height"), t.number(r, "coherence"), t.number(r, "height_precision"),
                                t.number(r, "adi")});
        try {
            if (cloud.points.back().id.empty()) throw DomainError("empty point id");
            PsiPointCloud one{cloud.stack_id, cloud.zone, cloud.north, {cloud.points.back()}};
            one.validate();
        } catch (const DomainError& e) {
            throw ParseError(t.source(), ParseError::Unit::Line, t.line_of(r), e.what());
        }
    }
    return cloud;
}

namespace {

std::vector<Eigen::Vector3d> precise_subset(const PsiPointCloud& cloud, double q) {
    std::vector<double> prec;
    prec.reserve(cloud.points.size());
    for (const auto& p : cloud.points) prec.push_back(p.height_precision);
    std::sort(prec.begin(), prec.end());
    const double limit = quantile_type7(prec, q);
    std::vector<Eigen::Vector3d> out;
    for (const auto& p : cloud.points)
        if (p.height_precision <= limit) out.push_back(p.xyz());
    return out;
}

struct PlaneShift {
    double u = 0.0;
    double v = 0.0;
    double significance = 0.0;
};

// Parabola vertex through three samples around a maximum, in [-0.5, 0.5].
double vertex_offset(double lo, double mid, double hi) {
    const double curv = lo - 2.0 * mid + hi;
    if (!(curv < 0.0)) return 0.0;
    return std::clamp(0.5 * (lo - hi) / curv, -0.5, 0.5);
}

PlaneShift correlate_plane(const std::vector<Eigen::Vector3d>& a, const std::vector<Eigen::Vector3d>& b,
                           int iu, int iv, const Eigen::Vector3d& origin, double cell, int reach) {
    const auto index = [&](const Eigen::Vector3d& p, int axis) {
        return static_cast<long>(std::floor((p[axis] - origin[axis]) / cell));
    };
    std::map<std::pair<long, long>, double> occ_a, occ_b;
    for (const auto& p : a) occ_a[{index(p, iu), index(p, iv)}] += 1.0;
    for (const auto& p : b) occ_b[{index(p, iu), index(p, iv)}] += 1.0;

    const int side = 2 * reach + 1;
    std::vector<double> corr(static_cast<std::size_t>(side * side), 0.0);
    for (const auto& [cell_a, wa] : occ_a)
        for (int du = -reach; du <= reach; ++du)
            for (int dv = -reach; dv <= reach; ++dv) {
                const auto it = occ_b.find({cell_a.first + du, cell_a.second + dv});
                if (it != occ_b.end())
                    corr[static_cast<std::size_t>((du + reach) * side + dv + reach)] += wa * it->second;
            }

    const auto at = [&](int du, int dv) { return corr[static_cast<std::size_t>((du + reach) * side + dv + reach)]; };
    int best_u = 0, best_v = 0;
    double best = -1.0, sum = 0.0, sum2 = 0.0;
    for (int du = -reach; du <= reach; ++du)
        for (int dv = -reach; dv <= reach; ++dv) {
            const double c = at(du, dv);
            sum += c;
            sum2 += c * c;
            // Prefer the shift closest to zero among equal peaks.
            if (c > best || (c == best && std::abs(du) + std::abs(dv) < std::abs(best_u) + std::abs(best_v))) {
                best = c;
                best_u = du;
                best_v = dv;
            }
        }
    const double n = static_cast<double>(corr.size());
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    PlaneShift out;
    out.significance = var > 0.0 ? (best - mean) / std::sqrt(var) : 0.0;
    double fu = 0.0, fv = 0.0;
    if (std::abs(best_u) < reach) fu = vertex_offset(at(best_u - 1, best_v), best, at(best_u + 1, best_v));
    if (std::abs(best_v) < reach) fv = vertex_offset(at(best_u, best_v - 1), best, at(best_u, best_v + 1));
    out.u = (best_u + fu) * cell;
    out.v = (best_v + fv) * cell;
    return out;
}

}  // namespace

CoarseShift coarse_register(const PsiPointCloud& a, const PsiPointCloud& b, const RegistrationOptions& options) {
    if (a.points.empty() || b.points.empty()) throw DomainError("coarse registration needs two non-empty clouds");
    if (a.zone != b.zone || a.north != b.north) throw DomainError("clouds lie in different map zones");
    if (!(options.cell_m > 0.0) || !(options.subset_quantile > 0.0 && options.subset_quantile <= 1.0))
        throw DomainError("invalid registration options");
    const auto sa = precise_subset(a, options.subset_quantile);
    const auto sb = precise_subset(b, options.subset_quantile);

    // Shared raster origin so that swapping the clouds mirrors the surface.
    Eigen::Vector3d origin = sa.front();
    for (const auto& p : sa) origin = origin.cwiseMin(p);
    for (const auto& p : sb) origin = origin.cwiseMin(p);
    const int reach = static_cast<int>(std::ceil(options.max_shift_m / options.cell_m));

    const PlaneShift xy = correlate_plane(sa, sb, 0, 1, origin, options.cell_m, reach);
    const PlaneShift xz = correlate_plane(sa, sb, 0, 2, origin, options.cell_m, reach);
    const PlaneShift yz = correlate_plane(sa, sb, 1, 2, origin, options.cell_m, reach);

    CoarseShift out;
    out.shift = {0.5 * (xy.u + xz.u), 0.5 * (xy.v + yz.u), 0.5 * (xz.v + yz.v)};
    out.discrepancy = {std::abs(xy.u - xz.u), std::abs(xy.v - yz.u), std::abs(xz.v - yz.v)};
    out.significance = std::min({xy.significance, xz.significance, yz.significance});
    out.registered = out.significance >= options.min_significance;
    if (!out.registered) out.shift.setZero();
    return out;
}

namespace {

struct Matching {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<double> distances;
    double total = 0.0;
};

// Mutual nearest neighbours between `pa` and `pb` shifted back by `shift`.
Matching mutual_nearest(const std::vector<Eigen::Vector3d>& pa, const std::vector<Eigen::Vector3d>& pb,
                        const detail::SpatialHash& index_a, const detail::SpatialHash& index_b,
                        const Eigen::Vector3d& shift, double radius) {
    Matching m;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        const auto hb = index_b.nearest(pa[i] + shift, radius);
        if (!hb) continue;
        const auto ha = index_a.nearest(pb[hb->index] - shift, radius);
        if (!ha || ha->index != i) continue;
        m.pairs.emplace_back(i, hb->index);
        m.distances.push_back(hb->distance);
        m.total += hb->distance;
    }
    return m;
}

}  // namespace

PairingResult refine_and_pair(const PsiPointCloud& a, const PsiPointCloud& b, const Eigen::Vector3d& coarse_shift,
                              const PairingOptions& options) {
    if (!(options.search_radius_m > 0.0) || !(options.refine_step_m > 0.0) || !(options.refine_extent_m >= 0.0))
        throw DomainError("invalid pairing options");
    PairingResult out;
    out.refined_shift = coarse_shift;
    if (a.points.empty() || b.points.empty()) return out;

    std::vector<Eigen::Vector3d> pa, pb;
    for (const auto& p : a.points) pa.push_back(p.xyz());
    for (const auto& p : b.points) pb.push_back(p.xyz());
    const detail::SpatialHash index_a(pa, options.search_radius_m);
    const detail::SpatialHash index_b(pb, options.search_radius_m);

    const int steps = static_cast<int>(std::lround(options.refine_extent_m / options.refine_step_m));
    Matching best;
    bool have = false;
    for (int i = -steps; i <= steps; ++i)
        for (int j = -steps; j <= steps; ++j)
            for (int k = -steps; k <= steps; ++k) {
                const Eigen::Vector3d s =
                    coarse_shift + Eigen::Vector3d(i, j, k) * options.refine_step_m;
                Matching m = mutual_nearest(pa, pb, index_a, index_b, s, options.search_radius_m);
                const auto n = m.pairs.size();
                const bool better =
                    !have || n > best.pairs.size() ||
                    (n == best.pairs.size() && n > 0 &&
                     m.total / static_cast<double>(n) < best.total / static_cast<double>(n));
                if (better) {
                    best = std::move(m);
                    out.refined_shift = s;
                    have = true;
                }
            }

    // Pair separation in units of the combined height precision.
    const auto normalised = [&](std::size_t ia, std::size_t ib, const Eigen::Vector3d& shift) {
        const double sa = a.points[ia].height_precision, sb = b.points[ib].height_precision;
        return (pb[ib] - pa[ia] - shift).norm() / std::sqrt(std::max(sa * sa + sb * sb, 1e-12));
    };
    // Weighted least-squares translation over the pairs inside the gate,
    // weights from the height precisions; re-paired until stable.
    for (int iter = 0; iter < 10 && !best.pairs.empty(); ++iter) {
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        double weight = 0.0;
        for (const auto& [ia, ib] : best.pairs) {
            if (normalised(ia, ib, out.refined_shift) > options.gate_sigma) continue;
            const double sa = a.points[ia].height_precision, sb = b.points[ib].height_precision;
            const double w = 1.0 / std::max(sa * sa + sb * sb, 1e-6);
            mean += w * (pb[ib] - pa[ia]);
            weight += w;
        }
        if (weight == 0.0) break;
        mean /= weight;
        Matching m = mutual_nearest(pa, pb, index_a, index_b, mean, options.search_radius_m);
        const bool same = m.pairs == best.pairs && (mean - out.refined_shift).norm() < 1e-9;
        best = std::move(m);
        out.refined_shift = mean;
        if (same) break;
    }

    for (std::size_t k = 0; k < best.pairs.size(); ++k) {
        const auto [ia, ib] = best.pairs[k];
        if (normalised(ia, ib, out.refined_shift) > options.gate_sigma) continue;
        const PsiPoint& p = a.points[ia];
        const PsiPoint& q = b.points[ib];
        PsPair pair;
        pair.index_a = ia;
        pair.index_b = ib;
        pair.id_a = p.id;
        pair.id_b = q.id;
        pair.separation = best.distances[k];
        pair.adi_max = std::max(p.adi, q.adi);
        pair.quality = std::min(p.coherence, q.coherence);
        pair.midpoint = 0.5 * (pa[ia] + pb[ib] - out.refined_shift);
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

std::vector<PsPair> thin_pairs(const std::vector<PsPair>& pairs, double cell_m) {
    if (!(cell_m > 0.0)) throw DomainError("thinning cell must be positive");
    std::map<std::pair<long long, long long>, const PsPair*> keep;
    const auto better = [](const PsPair& x, const PsPair& y) {
        return std::tie(x.separation, x.adi_max, x.id_a, x.id_b) < std::tie(y.separation, y.adi_max, y.id_a, y.id_b);
    };
    for (const auto& p : pairs) {
        const std::pair<long long, long long> key{static_cast<long long>(std::floor(p.midpoint.x() / cell_m)),
                                                  static_cast<long long>(std::floor(p.midpoint.y() / cell_m))};
        auto [it, inserted] = keep.try_emplace(key, &p);
        if (!inserted && better(p, *it->second)) it->second = &p;
    }
    std::vector<PsPair> out;
    out.reserve(keep.size());
    for (const auto& [key, p] : keep) out.push_back(*p);
    return out;
}

std::vector<PsCandidate> radar_code_pairs(const std::vector<PsPair>& pairs, const PsiPointCloud& a,
                                          const PsiPointCloud& b, const std::vector<AcquisitionRef>& acquisitions,
                                          const PixelPredictor& predict) {
    std::vector<PsCandidate> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) {
        PsCandidate c;
        c.id = "F-" + pair.id_a + "-" + pair.id_b;
        c.method = "fusion";
        c.stacks = {a.stack_id, b.stack_id};
        const MapGrid mid{pair.midpoint.x(), pair.midpoint.y(), a.zone, a.north, pair.midpoint.z()};
        c.approx_position = map_to_ecef(mid);
        // Each point is radar-coded with its own stack: PSI geocoding errors
        // lie along the elevation direction of that stack and vanish there.
        const auto code_into = [&](const PsiPointCloud& cloud, std::size_t index) {
            PsCandidate part;
            const PsiPoint& p = cloud.points.at(index);
            part.approx_position = map_to_ecef({p.easting, p.northing, cloud.zone, cloud.north, p.height});
            part.stacks = {cloud.stack_id};
            radar_code_candidate(part, acquisitions, predict);
            c.partial = c.partial || part.partial;
            c.pixels.insert(c.pixels.end(), part.pixels.begin(), part.pixels.end());
        };
        code_into(a, pair.index_a);
        code_into(b, pair.index_b);
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace sargcp
