// SPDX-License-Identifier: Apache-2.0
#include "sargcp/detect_road.hpp"

#include "sargcp/error.hpp"
#include "sargcp/stereo_solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

namespace sargcp {

AdiRaster compute_adi(const std::vector<Grid<float>>& amplitudes) {
    if (amplitudes.size() < 2) throw DomainError("ADI needs at least two acquisitions");
    for (const auto& g : amplitudes)
        if (!g.same_shape(amplitudes.front())) throw DomainError("amplitude rasters differ in shape");
    const std::size_t rows = amplitudes.front().rows(), cols = amplitudes.front().cols();
    const double n = static_cast<double>(amplitudes.size());
    AdiRaster out{Grid<float>(rows, cols, 0.0f), Grid<float>(rows, cols, 0.0f), Grid<std::uint8_t>(rows, cols, 0),
                  amplitudes.size()};
    for (std::size_t k = 0; k < rows * cols; ++k) {
        double mean = 0.0;
        for (const auto& g : amplitudes) mean += g.values()[k];
        mean /= n;
        double ss = 0.0;
        for (const auto& g : amplitudes) ss += (g.values()[k] - mean) * (g.values()[k] - mean);
        out.mean.values()[k] = static_cast<float>(mean);
        if (mean > 0.0) {
            out.adi.values()[k] = static_cast<float>(std::sqrt(ss / (n - 1.0)) / mean);
            out.valid.values()[k] = 1;
        }
    }
    return out;
}

std::vector<RoadNode> densify(const io::RoadNetwork& net, double max_spacing_m) {
    if (!(max_spacing_m > 0.0)) throw DomainError("node spacing must be positive");
    net.validate();
    std::vector<RoadNode> out;
    for (const auto& road : net.roads) {
        const auto height = [&](const io::RoadVertex& v) { return v.height.value_or(net.default_height); };
        const auto& vs = road.vertices;
        if (vs.empty()) continue;
        out.push_back({road.id, vs.front().easting, vs.front().northing, height(vs.front())});
        for (std::size_t i = 1; i < vs.size(); ++i) {
            const auto& a = vs[i - 1];
            const auto& b = vs[i];
            const double len = std::hypot(b.easting - a.easting, b.northing - a.northing);
            const auto pieces = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / max_spacing_m)));
            for (std::size_t k = 1; k <= pieces; ++k) {
                const double f = static_cast<double>(k) / static_cast<double>(pieces);
                out.push_back({road.id, a.easting + f * (b.easting - a.easting),
                               a.northing + f * (b.northing - a.northing),
                               height(a) + f * (height(b) - height(a))});
            }
        }
    }
    return out;
}

std::vector<StackCandidate> search_candidates(const AdiRaster& adi, const PixelCoord& origin,
                                              const std::vector<PixelCoord>& node_pixels,
                                              const std::vector<double>& node_heights,
                                              const RoadSearchOptions& options) {
    if (node_pixels.size() != node_heights.size()) throw DomainError("node pixels and heights differ in count");
    if (!(options.radius_px > 0.0)) throw DomainError("search radius must be positive");
    const long rows = static_cast<long>(adi.adi.rows()), cols = static_cast<long>(adi.adi.cols());
    std::map<std::pair<std::size_t, std::size_t>, StackCandidate> found;
    const double r2 = options.radius_px * options.radius_px;
    for (std::size_t n = 0; n < node_pixels.size(); ++n) {
        const double cy = node_pixels[n].line - origin.line;
        const double cx = node_pixels[n].sample - origin.sample;
        const long y0 = std::max(0L, static_cast<long>(std::ceil(cy - options.radius_px)));
        const long y1 = std::min(rows - 1, static_cast<long>(std::floor(cy + options.radius_px)));
        const long x0 = std::max(0L, static_cast<long>(std::ceil(cx - options.radius_px)));
        const long x1 = std::min(cols - 1, static_cast<long>(std::floor(cx + options.radius_px)));
        bool have = false;
        std::size_t by = 0, bx = 0;
        double best_d2 = 0.0;
        for (long y = y0; y <= y1; ++y)
            for (long x = x0; x <= x1; ++x) {
                const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
                const double d2 = dy * dy + dx * dx;
                if (d2 > r2) continue;
                const auto uy = static_cast<std::size_t>(y), ux = static_cast<std::size_t>(x);
                if (!adi.valid(uy, ux)) continue;
                // Lowest ADI, then brightest, then closest to the node.
                const auto key = std::tuple(adi.adi(uy, ux), -adi.mean(uy, ux), d2);
                if (!have || key < std::tuple(adi.adi(by, bx), -adi.mean(by, bx), best_d2)) {
                    by = uy;
                    bx = ux;
                    best_d2 = d2;
                    have = true;
                }
            }
        if (!have) continue;
        // Tail pixels of a response just inside the disc climb to its peak.
        for (int step = 0; step < 64; ++step) {
            std::size_t ny = by, nx = bx;
            for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx) {
                    const long y = static_cast<long>(by) + dy, x = static_cast<long>(bx) + dx;
                    if (y < 0 || x < 0 || y >= rows || x >= cols) continue;
                    const auto uy = static_cast<std::size_t>(y), ux = static_cast<std::size_t>(x);
                    if (adi.valid(uy, ux) && adi.mean(uy, ux) > adi.mean(ny, nx)) {
                        ny = uy;
                        nx = ux;
                    }
                }
            if (ny == by && nx == bx) break;
            by = ny;
            bx = nx;
        }
        if (!(adi.adi(by, bx) <= options.adi_max)) continue;
        StackCandidate c;
        c.row = by;
        c.col = bx;
        c.pixel = {origin.line + static_cast<double>(by), origin.sample + static_cast<double>(bx)};
        c.adi = adi.adi(by, bx);
        c.mean_amplitude = adi.mean(by, bx);
        c.road_height = node_heights[n];
        found.try_emplace({by, bx}, c);
    }
    // Sidelobes of a stronger response nearby are not separate scatterers.
    std::vector<StackCandidate> ranked;
    ranked.reserve(found.size());
    for (auto& [key, c] : found) ranked.push_back(c);
    std::stable_sort(ranked.begin(), ranked.end(), [](const StackCandidate& a, const StackCandidate& b) {
        return std::tuple(a.adi, -a.mean_amplitude) < std::tuple(b.adi, -b.mean_amplitude);
    });
    const double s2 = options.suppress_px * options.suppress_px;
    std::vector<StackCandidate> out;
    for (const auto& c : ranked) {
        const bool shadowed = std::any_of(out.begin(), out.end(), [&](const StackCandidate& k) {
            const double dl = c.pixel.line - k.pixel.line, ds = c.pixel.sample - k.pixel.sample;
            return dl * dl + ds * ds <= s2;
        });
        if (!shadowed) out.push_back(c);
    }
    std::sort(out.begin(), out.end(), [](const StackCandidate& a, const StackCandidate& b) {
        return std::tuple(a.row, a.col) < std::tuple(b.row, b.col);
    });
    return out;
}

namespace {

struct Member {
    std::size_t stack;
    std::size_t index;
    Ecef position;
};

RadarTiming timing_of(const StackDetections& st, const StackCandidate& c) {
    return c.timing ? *c.timing : pixel_to_timing(*st.master, c.pixel);
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
}

}  // namespace

std::vector<PsCandidate> match_across_geometries(const std::vector<StackDetections>& stacks,
                                                 const std::vector<AcquisitionRef>& acquisitions,
                                                 const MatchOptions& options, const PixelPredictor& predict) {
    const auto threshold = [&](std::size_t k) {
        return k <= 2 ? options.threshold_2_m : k == 3 ? options.threshold_3_m : options.threshold_4_m;
    };
    const double link = std::max({options.threshold_2_m, options.threshold_3_m, options.threshold_4_m});

    std::vector<Member> members;
    for (std::size_t s = 0; s < stacks.size(); ++s) {
        if (!stacks[s].master) throw DomainError("stack '" + stacks[s].stack_id + "' has no master geometry");
        for (std::size_t i = 0; i < stacks[s].candidates.size(); ++i) {
            const auto& c = stacks[s].candidates[i];
            try {
                members.push_back({s, i, geocode(*stacks[s].master, timing_of(stacks[s], c), c.road_height)});
            } catch (const Error&) {
            }
        }
    }

    std::vector<std::size_t> parent(members.size());
    std::iota(parent.begin(), parent.end(), 0);
    for (std::size_t i = 0; i < members.size(); ++i)
        for (std::size_t j = i + 1; j < members.size(); ++j) {
            if (members[i].stack == members[j].stack) continue;
            if ((members[i].position - members[j].position).norm() <= link)
                parent[find_root(parent, i)] = find_root(parent, j);
        }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < members.size(); ++i) groups[find_root(parent, i)].push_back(i);

    std::vector<PsCandidate> out;
    for (auto& [root, group] : groups) {
        if (group.size() < 2) continue;
        std::set<std::size_t> seen;
        bool ambiguous = false;
        for (std::size_t m : group) ambiguous = ambiguous || !seen.insert(members[m].stack).second;
        if (ambiguous) continue;
        const double limit = threshold(group.size());
        bool tight = true;
        for (std::size_t a = 0; a < group.size() && tight; ++a)
            for (std::size_t b = a + 1; b < group.size(); ++b)
                if ((members[group[a]].position - members[group[b]].position).norm() > limit) {
                    tight = false;
                    break;
                }
        if (!tight) continue;

        // Canonical member order keeps the result independent of stack order.
        std::sort(group.begin(), group.end(), [&](std::size_t a, std::size_t b) {
            return stacks[members[a].stack].stack_id < stacks[members[b].stack].stack_id;
        });
        ObservationSet set;
        double road_height = 0.0;
        std::string id = "R";
        for (std::size_t m : group) {
            const auto& st = stacks[members[m].stack];
            const auto& c = st.candidates[members[m].index];
            TimingObservation o;
            o.id = st.stack_id;
            o.geometry_id = st.stack_id;
            o.geometry = st.master;
            o.timing = timing_of(st, c);
            o.provenance = "pixel";
            set.observations.push_back(o);
            road_height += c.road_height;
            id += "-" + st.stack_id + ":" + std::to_string(c.row) + ":" + std::to_string(c.col);
        }
        road_height /= static_cast<double>(group.size());
        Ecef centre = Ecef::Zero();
        for (std::size_t m : group) centre += members[m].position;
        centre /= static_cast<double>(group.size());

        SolverOptions so;
        so.min_observations = 1;
        so.estimate_variances = false;
        Ecef position;
        try {
            position = solve(set, centre, so).position;
        } catch (const Error&) {
            continue;
        }
        if (std::abs(ecef_to_geodetic(position).height - road_height) > options.elevation_tolerance_m) continue;

        PsCandidate cand;
        cand.id = id;
        cand.method = "road";
        cand.approx_position = position;
        for (std::size_t m : group) cand.stacks.push_back(stacks[members[m].stack].stack_id);
        radar_code_candidate(cand, acquisitions, predict);
        out.push_back(std::move(cand));
    }
    std::sort(out.begin(), out.end(), [](const PsCandidate& a, const PsCandidate& b) { return a.id < b.id; });
    return out;
}

}  // namespace sargcp
