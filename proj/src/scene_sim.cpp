// SPDX-License-Identifier: Apache-2.0
#include "sargcp/scene_sim.hpp"

#include "sargcp/error.hpp"
#include "sargcp/text.hpp"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <numbers>
#include <set>
#include <sstream>

namespace sargcp::sim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
constexpr double kGm = 3.986004418e14;
constexpr double kAltitude = 514e3;
constexpr double kPeakAmplitude = 100.0;
constexpr double kMeanScrDb = 20.0;
constexpr double kBaselineSigma = 100.0;
constexpr double kRevisitDays = 11.0;
constexpr double kImageLineCentre = 2000.0;
constexpr double kImageSampleCentre = 3000.0;
constexpr double kPoleHeight = 8.0;
constexpr double kFacadeTop = 21.0;
constexpr std::size_t kAmplitudeMargin = 80;
constexpr std::size_t kAmplitudeHalo = 12;

double gauss(std::mt19937_64& rng, double sigma) {
    if (sigma == 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string pad(std::size_t k, int width) {
    std::string s = std::to_string(k);
    return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

std::string_view to_string(TargetClass c) {
    switch (c) {
        case TargetClass::Pole: return "pole";
        case TargetClass::Facade: return "facade";
        case TargetClass::Spurious: return "spurious";
    }
    return "spurious";
}

void SimConfig::validate() const {
    if (geometries.size() < 2) throw DomainError("simulation needs at least two geometries");
    std::set<std::string> ids;
    for (const auto& g : geometries) {
        if (g.epochs < 2) throw DomainError("geometry '" + g.id + "' needs at least two epochs");
        if (!(g.incidence_deg > 20.0 && g.incidence_deg < 60.0))
            throw DomainError("geometry '" + g.id + "' incidence outside (20, 60) degrees");
        if (!ids.insert(g.id).second) throw DomainError("duplicate geometry id '" + g.id + "'");
    }
    if (method != "fusion" && method != "optical" && method != "road")
        throw DomainError("unknown detection method '" + method + "'");
    if (!(sigma_rg_m >= 0.0) || !(sigma_az_m >= 0.0) || !(psi_noise_m >= 0.0))
        throw DomainError("noise levels must be non-negative");
    if (!(scene_half_size_m > 0.0) || !(pole_spacing_m > 0.0)) throw DomainError("invalid scene layout");
    if (tile_size < 32) throw DomainError("tiles must be at least 32 pixels");
}

SimConfig preset(std::string_view name, std::uint64_t seed) {
    SimConfig c;
    c.preset = std::string(name);
    c.seed = seed;
    if (name == "berlin") {
        c.method = "optical";
        c.latitude_deg = 52.5125;
        c.longitude_deg = 13.3245;
        c.ground_height_m = 80.0;
        c.geometries = {{"A1", HeadingClass::Ascending, 41.9, 350.3, 20},
                        {"D1", HeadingClass::Descending, 36.1, 190.6, 20}};
        c.scene_half_size_m = 60.0;
        c.pole_spacing_m = 30.0;
    } else if (name == "oulu") {
        c.method = "road";
        c.latitude_deg = 65.0121;
        c.longitude_deg = 25.4651;
        c.ground_height_m = 20.0;
        c.geometries = {{"A1", HeadingClass::Ascending, 30.9, 346.1, 15},
                        {"D1", HeadingClass::Descending, 41.1, 191.4, 15},
                        {"A2", HeadingClass::Ascending, 46.2, 350.0, 15},
                        {"D2", HeadingClass::Descending, 53.4, 187.5, 15}};
        c.scene_half_size_m = 150.0;
        c.roads = 3;
        c.facades = true;
    } else if (name == "minimal") {
        c.method = "road";
        c.latitude_deg = 52.5125;
        c.longitude_deg = 13.3245;
        c.ground_height_m = 80.0;
        c.geometries = {{"A1", HeadingClass::Ascending, 41.9, 350.3, 12},
                        {"D1", HeadingClass::Descending, 36.1, 190.6, 12}};
    } else {
        throw DomainError("unknown preset '" + std::string(name) + "'");
    }
    return c;
}

AcquisitionRef StackGeometry::ref(std::size_t k) const {
    const auto& m = acquisitions.at(k);
    return {m.acquisition_id, m.stack_id, std::make_shared<AcquisitionGeometry>(m.geometry), m.epoch_days};
}

namespace {

// Satellite position at zero Doppler with the scene centre, on a sphere of
// radius `radius`, for the requested incidence at the centre.
Ecef place_satellite(const Ecef& centre, const Eigen::Vector3d& up, const Eigen::Vector3d& right, double radius,
                     double incidence) {
    const Eigen::Vector3d c_hat = centre.normalized();
    const Eigen::Vector3d r_perp = (right - right.dot(c_hat) * c_hat).normalized();
    const auto at = [&](double beta) {
        return Ecef(radius * (std::cos(beta) * c_hat - std::sin(beta) * r_perp));
    };
    const auto incidence_of = [&](double beta) {
        const Eigen::Vector3d los = (at(beta) - centre).normalized();
        return std::acos(std::clamp(los.dot(up), -1.0, 1.0));
    };
    double lo = 0.0, hi = 0.35;
    if (incidence_of(hi) < incidence) throw DomainError("incidence not reachable from the orbit");
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (incidence_of(mid) < incidence ? lo : hi) = mid;
    }
    return at(0.5 * (lo + hi));
}

}  // namespace

std::vector<StackGeometry> build_geometries(const SimConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    const Ecef centre = geodetic_to_ecef({cfg.latitude_deg * kDeg, cfg.longitude_deg * kDeg, cfg.ground_height_m});
    const Eigen::Matrix3d enu = enu_basis(centre);
    const Eigen::Vector3d east = enu.row(0), north = enu.row(1), up = enu.row(2);
    const double radius = centre.norm() + kAltitude;
    const double speed = std::sqrt(kGm / radius);
    const double omega = speed / radius;

    std::vector<StackGeometry> out;
    for (const auto& spec : cfg.geometries) {
        const double psi = spec.heading_deg * kDeg;
        const Eigen::Vector3d flight = std::sin(psi) * east + std::cos(psi) * north;
        const Eigen::Vector3d right = std::cos(psi) * east - std::sin(psi) * north;
        const Ecef s0 = place_satellite(centre, up, right, radius, spec.incidence_deg * kDeg);
        Eigen::Vector3d along = s0.cross(centre - s0).normalized();
        if (along.dot(flight) < 0.0) along = -along;
        const Eigen::Vector3d s_hat = s0.normalized();
        const Eigen::Vector3d normal = (centre - s0).cross(along).normalized();

        StackGeometry stack;
        stack.spec = spec;
        for (std::size_t k = 0; k < spec.epochs; ++k) {
            const double baseline = k == 0 ? 0.0 : gauss(rng, kBaselineSigma);
            // Taylor expansion of a circular arc about the zero-Doppler epoch.
            std::vector<Eigen::Vector3d> coeffs;
            double factor = radius;
            for (int d = 0; d <= 5; ++d) {
                if (d > 0) factor *= omega / d;
                static constexpr double kCos[] = {1, 0, -1, 0};
                static constexpr double kSin[] = {0, 1, 0, -1};
                coeffs.push_back(factor * (kCos[d % 4] * s_hat + kSin[d % 4] * along));
            }
            coeffs[0] += baseline * normal;
            AcquisitionGeometry geom{OrbitModel(kOrbitEpoch, coeffs, kOrbitEpoch - kOrbitHalfSpan,
                                                kOrbitEpoch + kOrbitHalfSpan),
                                     kPrf,
                                     kRsf,
                                     0.0,
                                     0.0,
                                     spec.heading,
                                     spec.incidence_deg,
                                     LookSide::Right};
            const RadarTiming c = radar_code(geom, centre);
            geom.t_az_first = c.t_az - kImageLineCentre / kPrf;
            geom.tau_rg_first = c.tau_rg - kImageSampleCentre / kRsf;
            geom.validate();
            io::AcquisitionMetadata meta{spec.id + "_" + pad(k, 3), spec.id, spec.id,
                                         kRevisitDays * static_cast<double>(k), 1.0, geom};
            stack.acquisitions.push_back(std::move(meta));
        }
        out.push_back(std::move(stack));
    }
    return out;
}

std::complex<double> clutter_sample(std::mt19937_64& rng, double power) {
    if (power <= 0.0) return {0.0, 0.0};
    const double s = std::sqrt(0.5 * power);
    return {gauss(rng, s), gauss(rng, s)};
}

double point_response(double offset_px, double resolution_px) {
    const double u = 1.44 / resolution_px * offset_px;
    if (std::abs(u) < 1e-12) return 1.0;
    const double denom = 1.0 - u * u;
    if (std::abs(denom) < 1e-9) return 0.5;
    return std::sin(kPi * u) / (kPi * u) / denom;
}

io::RasterTile synthesize_tile(const PixelCoord& origin, std::size_t size, const PixelCoord& peak, double amplitude,
                               double clutter_power, double res_line_px, double res_sample_px,
                               std::mt19937_64& rng) {
    Grid<std::complex<float>> g(size, size);
    const double phase = uniform(rng, -kPi, kPi);
    const std::complex<double> carrier = std::polar(amplitude, phase);
    for (std::size_t r = 0; r < size; ++r) {
        const double pl = point_response(origin.line + static_cast<double>(r) - peak.line, res_line_px);
        for (std::size_t c = 0; c < size; ++c) {
            const double ps = point_response(origin.sample + static_cast<double>(c) - peak.sample, res_sample_px);
            g(r, c) = std::complex<float>(carrier * (pl * ps) + clutter_sample(rng, clutter_power));
        }
    }
    return {io::Georef::pixel_origin(origin), std::move(g)};
}

namespace {

struct Layout {
    io::RoadNetwork roads;
    std::vector<Target> targets;
    // Facade points per side: visible from ascending (west faces) or
    // descending (east faces) passes.
    std::vector<std::size_t> west_facade, east_facade;
};

Layout make_layout(const SimConfig& cfg, std::mt19937_64& rng) {
    Layout out;
    const Geodetic gc{cfg.latitude_deg * kDeg, cfg.longitude_deg * kDeg, cfg.ground_height_m};
    const int zone = utm_zone_for(gc.longitude);
    const bool north = gc.latitude >= 0.0;
    const MapGrid c = geodetic_to_map(gc, zone, north);
    const double half = cfg.scene_half_size_m;
    out.roads.zone = zone;
    out.roads.north = north;
    out.roads.default_height = cfg.ground_height_m;

    struct Segment {
        double e0, n0, e1, n1;
    };
    std::vector<Segment> segments = {{c.easting - 12.0, c.northing - half, c.easting - 12.0, c.northing + half},
                                     {c.easting - half, c.northing + 17.0, c.easting + half, c.northing + 17.0}};
    if (cfg.roads >= 3)
        segments.push_back({c.easting - half, c.northing - half * 0.8, c.easting + half * 0.6, c.northing - half * 0.1});
    segments.resize(std::min(segments.size(), std::max<std::size_t>(cfg.roads, 1)));

    const auto add_target = [&](std::string id, TargetClass cls, double e, double n, double h,
                                std::vector<std::string> stacks) {
        Target t;
        t.id = std::move(id);
        t.cls = cls;
        t.map = {e, n, zone, north, h};
        t.position = map_to_ecef(t.map);
        t.stacks = std::move(stacks);
        out.targets.push_back(std::move(t));
    };
    std::vector<std::string> all;
    for (const auto& g : cfg.geometries) all.push_back(g.id);

    std::size_t pole = 0;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const auto& sg = segments[s];
        io::RoadPolyline road;
        road.id = "road" + std::to_string(s + 1);
        road.vertices.push_back({sg.e0, sg.n0, std::nullopt});
        road.vertices.push_back({0.5 * (sg.e0 + sg.e1), 0.5 * (sg.n0 + sg.n1), std::nullopt});
        road.vertices.push_back({sg.e1, sg.n1, std::nullopt});
        out.roads.roads.push_back(road);

        // Poles on the side away from the shadow direction's road crossing.
        const double len = std::hypot(sg.e1 - sg.e0, sg.n1 - sg.n0);
        const double ue = (sg.e1 - sg.e0) / len, un = (sg.n1 - sg.n0) / len;
        double side_e = un, side_n = -ue;
        if (side_e + side_n < 0.0) {
            side_e = -side_e;
            side_n = -side_n;
        }
        for (double d = 0.5 * cfg.pole_spacing_m; d < len - 10.0; d += cfg.pole_spacing_m) {
            const double e = sg.e0 + d * ue + 5.0 * side_e;
            const double n = sg.n0 + d * un + 5.0 * side_n;
            bool clear = true;
            for (const auto& t : out.targets)
                if (std::hypot(t.map.easting - e, t.map.northing - n) < 0.5 * cfg.pole_spacing_m) clear = false;
            if (!clear) continue;
            add_target("P" + pad(++pole, 3), TargetClass::Pole, e, n, cfg.ground_height_m, all);
        }
    }

    if (cfg.facades) {
        std::vector<std::string> asc, dsc;
        for (const auto& g : cfg.geometries) (g.heading == HeadingClass::Ascending ? asc : dsc).push_back(g.id);
        // Buildings of different footprints. Window positions are jittered
        // so the facade pattern has no exact period.
        struct Building {
            double e, n, width, length;
        };
        const Building buildings[] = {{25.0, -60.0, 22.0, 40.0},
                                      {-70.0, 40.0, 18.0, 30.0},
                                      {45.0, 55.0, 14.0, 26.0},
                                      {-110.0, -95.0, 20.0, 34.0}};
        std::size_t facade = 0;
        for (const auto& bd : buildings) {
            if (std::max(std::abs(bd.e) + bd.width, std::abs(bd.n) + bd.length) > cfg.scene_half_size_m) continue;
            for (int side = 0; side < 2; ++side) {
                const double e = c.easting + bd.e + (side == 0 ? 0.0 : bd.width);
                for (double along = uniform(rng, 1.0, 3.0); along <= bd.length - 1.0;
                     along += cfg.facade_spacing_h_m * uniform(rng, 0.6, 1.4))
                    for (double h = 3.0; h <= kFacadeTop; h += cfg.facade_spacing_v_m) {
                        add_target("F" + pad(++facade, 3), TargetClass::Facade, e, c.northing + bd.n + along,
                                   cfg.ground_height_m + h + uniform(rng, -1.0, 1.0), side == 0 ? asc : dsc);
                        (side == 0 ? out.west_facade : out.east_facade).push_back(out.targets.size() - 1);
                    }
            }
        }
    }
    return out;
}

// Deterministic correction terms shared by simulator and pipeline.
std::string correction_config_text(const SimConfig& cfg) {
    std::ostringstream os;
    os << "format_version = 1\n";
    if (!cfg.error_terms) return os.str();
    os << "range.SD = constant meters=0.21\n"
       << "range.O = constant meters=-0.035\n"
       << "range.I = zenith_mapped zenith_m=0.11\n"
       << "range.T = zenith_mapped zenith_m=2.31\n"
       << "range.G = displacement east_m=0.012 north_m=-0.018 up_m=0.046\n"
       << "azimuth.SD = constant meters=0.27\n"
       << "azimuth.O = drift offset_m=0.02 rate_m_per_day=0.0004 ref_day=0\n"
       << "azimuth.G = displacement east_m=0.012 north_m=-0.018 up_m=0.046\n";
    return os.str();
}

double azimuth_pixel_m(const AcquisitionGeometry& g, const Ecef& x) {
    const RadarTiming t = radar_code(g, x);
    return azimuth_scale(g, t.t_az, x) / g.prf;
}

RadarTiming raw_timing(const io::AcquisitionMetadata& acq, const Ecef& x, const std::vector<ProviderPtr>& providers,
                       RadarTiming* clean_out = nullptr) {
    const RadarTiming clean = radar_code(acq.geometry, x);
    if (clean_out) *clean_out = clean;
    const CorrectionContext ctx{acq.geometry, acq.acquisition_id, x, acq.epoch_days};
    return apply_timing_errors(clean, assemble_corrections(providers, ctx));
}

void add_psi_clouds(Scene& scene, const Layout& layout, std::mt19937_64& rng) {
    const SimConfig& cfg = scene.config;
    std::vector<const StackGeometry*> asc, dsc;
    for (const auto& s : scene.stacks) (s.spec.heading == HeadingClass::Ascending ? asc : dsc).push_back(&s);
    const auto make_pair_clouds = [&](const std::vector<const StackGeometry*>& pair,
                                      const std::vector<std::size_t>& shared) {
        if (pair.size() < 2 || shared.empty()) return;
        const std::size_t extras = static_cast<std::size_t>(
            std::lround(static_cast<double>(shared.size()) * (1.0 - cfg.psi_shared_fraction) / cfg.psi_shared_fraction));
        std::array<Eigen::Vector3d, 2> mean_disp{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
        // Scatterer quality is a property of the target, seen by both stacks.
        std::map<std::string, double> quality;
        for (std::size_t t : shared) quality[scene.truth.targets[t].id] = uniform(rng, 1.0 / 3.0, 5.0 / 3.0);
        for (int which = 0; which < 2; ++which) {
            const StackGeometry& st = *pair[static_cast<std::size_t>(which)];
            const auto& master = st.acquisitions.front();
            const double cos_inc = std::cos(st.spec.incidence_deg * kDeg);
            const double offset = gauss(rng, cfg.psi_offset_sigma_m);
            PsiPointCloud cloud;
            cloud.stack_id = st.spec.id;
            cloud.zone = scene.truth.zone;
            cloud.north = scene.truth.north;

            struct Pending {
                Ecef truth;
                std::string target_id;
                double height;
            };
            std::vector<Pending> pending;
            for (std::size_t t : shared) {
                const auto& tg = scene.truth.targets[t];
                pending.push_back({tg.position, tg.id, tg.map.height});
            }
            // Points seen by this stack only, scattered over the facade area.
            double e0 = 1e300, e1 = -1e300, n0 = 1e300, n1 = -1e300;
            for (std::size_t t : shared) {
                const auto& m = scene.truth.targets[t].map;
                e0 = std::min(e0, m.easting);
                e1 = std::max(e1, m.easting);
                n0 = std::min(n0, m.northing);
                n1 = std::max(n1, m.northing);
            }
            for (std::size_t k = 0; k < extras; ++k) {
                const MapGrid m{uniform(rng, e0 - 10.0, e1 + 10.0), uniform(rng, n0 - 10.0, n1 + 10.0),
                                scene.truth.zone, scene.truth.north,
                                cfg.ground_height_m + uniform(rng, 0.0, kFacadeTop)};
                pending.push_back({map_to_ecef(m), "", m.height});
            }

            std::vector<std::size_t> order(pending.size());
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            Eigen::Vector3d disp_sum = Eigen::Vector3d::Zero();
            std::size_t disp_n = 0;
            for (std::size_t k = 0; k < order.size(); ++k) {
                const Pending& p = pending[order[k]];
                const RadarTiming t = radar_code(master.geometry, p.truth);
                const double q = p.target_id.empty() ? uniform(rng, 1.0 / 3.0, 5.0 / 3.0)
                                                     : quality.at(p.target_id) * uniform(rng, 0.85, 1.15);
                const double precision = cfg.psi_noise_m * q;
                const double noise = gauss(rng, precision);
                // Height errors move points along the stack's elevation direction.
                const Ecef moved = geocode(master.geometry, t, p.height + (offset + noise) * cos_inc);
                const MapGrid m = ecef_to_map(moved, cloud.zone, cloud.north);
                PsiPoint pt;
                pt.id = st.spec.id + "-" + pad(k + 1, 4);
                pt.easting = m.easting;
                pt.northing = m.northing;
                pt.height = m.height;
                pt.coherence = uniform(rng, 0.7, 1.0);
                pt.height_precision = precision;
                pt.adi = uniform(rng, 0.05, 0.35);
                cloud.points.push_back(pt);
                scene.truth.psi.push_back({cloud.stack_id, pt.id, p.target_id});
                if (!p.target_id.empty()) {
                    const Ecef sys = geocode(master.geometry, t, p.height + offset * cos_inc);
                    const MapGrid ms = ecef_to_map(sys, cloud.zone, cloud.north);
                    const MapGrid mt = ecef_to_map(p.truth, cloud.zone, cloud.north);
                    disp_sum += Eigen::Vector3d(ms.easting - mt.easting, ms.northing - mt.northing, ms.height - mt.height);
                    ++disp_n;
                }
            }
            mean_disp[static_cast<std::size_t>(which)] = disp_sum / static_cast<double>(disp_n);
            scene.psi_clouds.push_back(std::move(cloud));
        }
        scene.truth.psi_shifts[pair[0]->spec.id + "|" + pair[1]->spec.id] = mean_disp[1] - mean_disp[0];
    };
    make_pair_clouds(asc, layout.west_facade);
    make_pair_clouds(dsc, layout.east_facade);
}

void add_optical(Scene& scene, std::mt19937_64& rng) {
    const SimConfig& cfg = scene.config;
    const Geodetic gc{cfg.latitude_deg * kDeg, cfg.longitude_deg * kDeg, cfg.ground_height_m};
    const MapGrid c = geodetic_to_map(gc, scene.truth.zone, scene.truth.north);
    const double step = cfg.optical_spacing_m;
    const double half = cfg.scene_half_size_m + 10.0;
    const auto n = static_cast<std::size_t>(std::ceil(2.0 * half / step));
    const double left = c.easting - half, top = c.northing + half;

    // Shadows fall towards the north-east.
    const double shadow_len = kPoleHeight;
    const Eigen::Vector2d dir = Eigen::Vector2d(1.0, 1.0).normalized();  // (east, north)

    Grid<float> img(n, n);
    for (auto& v : img.values()) v = static_cast<float>(0.55 + gauss(rng, 0.02));
    const auto each_pixel_near = [&](double e, double nn, double reach, auto&& fn) {
        const long c0 = static_cast<long>(std::floor((e - reach - left) / step));
        const long c1 = static_cast<long>(std::ceil((e + reach - left) / step));
        const long r0 = static_cast<long>(std::floor((top - (nn + reach)) / step));
        const long r1 = static_cast<long>(std::ceil((top - (nn - reach)) / step));
        for (long r = std::max(0L, r0); r <= std::min(static_cast<long>(n) - 1, r1); ++r)
            for (long col = std::max(0L, c0); col <= std::min(static_cast<long>(n) - 1, c1); ++col) {
                const double pe = left + (static_cast<double>(col) + 0.5) * step;
                const double pn = top - (static_cast<double>(r) + 0.5) * step;
                fn(img(static_cast<std::size_t>(r), static_cast<std::size_t>(col)), pe, pn);
            }
    };
    for (const auto& road : scene.roads.roads)
        for (std::size_t i = 1; i < road.vertices.size(); ++i) {
            const auto& a = road.vertices[i - 1];
            const auto& b = road.vertices[i];
            const Eigen::Vector2d pa(a.easting, a.northing), pb(b.easting, b.northing);
            const double len = (pb - pa).norm();
            for (double d = 0.0; d <= len; d += 1.0) {
                const Eigen::Vector2d p = pa + (pb - pa) * (d / len);
                each_pixel_near(p.x(), p.y(), 3.5, [&](float& v, double pe, double pn) {
                    if ((Eigen::Vector2d(pe, pn) - p).norm() <= 3.5 && v > 0.47f) v -= 0.08f;
                });
            }
        }
    // Dark round blobs as distractors.
    for (int k = 0; k < 6; ++k) {
        const double e = c.easting + uniform(rng, -half + 5.0, half - 5.0);
        const double nn = c.northing + uniform(rng, -half + 5.0, half - 5.0);
        const double rad = uniform(rng, 1.5, 3.0);
        each_pixel_near(e, nn, rad, [&](float& v, double pe, double pn) {
            if (std::hypot(pe - e, pn - nn) <= rad) v = static_cast<float>(0.3 + gauss(rng, 0.02));
        });
    }
    bool first = true;
    for (const auto& t : scene.truth.targets) {
        if (t.cls != TargetClass::Pole) continue;
        const Eigen::Vector2d base(t.map.easting, t.map.northing);
        const Eigen::Vector2d tip = base + shadow_len * dir;
        each_pixel_near(base.x() + 0.5 * shadow_len * dir.x(), base.y() + 0.5 * shadow_len * dir.y(),
                        0.5 * shadow_len + 1.0, [&](float& v, double pe, double pn) {
                            const Eigen::Vector2d p(pe, pn);
                            const double along = std::clamp((p - base).dot(dir), 0.0, shadow_len);
                            const double dist = (p - (base + along * dir)).norm();
                            if (dist <= 0.12 || (p - tip).norm() <= 0.45) v = static_cast<float>(0.12 + gauss(rng, 0.01));
                            if ((p - base).norm() <= 0.15) v = 0.85f;
                        });
        if (first) {
            // Template around the first pole: base plus its whole shadow.
            const double margin = 1.0;
            const double row0 = std::floor((top - (tip.y() + margin)) / step);
            const double col0 = std::floor((base.x() - margin - left) / step);
            const double rows = std::ceil((tip.y() - base.y() + 2.0 * margin) / step);
            const double cols = std::ceil((tip.x() - base.x() + 2.0 * margin) / step);
            const double anchor_row = (top - base.y()) / step - 0.5 - row0;
            const double anchor_col = (base.x() - left) / step - 0.5 - col0;
            scene.template_rect = {row0, col0, rows, cols, anchor_row, anchor_col};
            first = false;
        }
    }
    OpticalImage out;
    out.pixels = std::move(img);
    // The georeference is off by the configured misregistration.
    out.georef = io::Georef::map_grid(left + 0.5 * step + cfg.optical_offset_e_m, top - 0.5 * step + cfg.optical_offset_n_m,
                                      step, -step, scene.truth.zone, scene.truth.north);
    scene.optical = std::move(out);
}

}  // namespace

Scene build_scene(const SimConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    Scene scene;
    scene.config = cfg;
    scene.stacks = build_geometries(cfg, rng);
    Layout layout = make_layout(cfg, rng);
    scene.roads = layout.roads;
    scene.truth.targets = layout.targets;
    scene.truth.zone = layout.roads.zone;
    scene.truth.north = layout.roads.north;
    scene.correction_config = correction_config_text(cfg);
    {
        std::istringstream in(scene.correction_config);
        scene.truth.providers = parse_correction_config(in, "corrections.cfg");
    }
    const auto& providers = scene.truth.providers;
    const double clutter_mean = cfg.zero_noise ? 0.0 : kPeakAmplitude * kPeakAmplitude / std::pow(10.0, kMeanScrDb / 10.0);
    const Ecef centre =
        geodetic_to_ecef({cfg.latitude_deg * kDeg, cfg.longitude_deg * kDeg, cfg.ground_height_m});

    for (const auto& st : scene.stacks) {
        const auto& master = st.acquisitions.front();
        const double res_line = kResolutionAzimuth / azimuth_pixel_m(master.geometry, centre);
        const double res_sample = kResolutionRange / (kSpeedOfLight / (2.0 * master.geometry.rsf));

        // Corrupt epochs, never the master.
        std::vector<std::size_t> idx(st.acquisitions.size() - 1);
        std::iota(idx.begin(), idx.end(), 1);
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::set<std::size_t> corrupt(
            idx.begin(), idx.begin() + static_cast<long>(cfg.zero_noise ? 0 : std::min(cfg.corrupt_epochs, idx.size())));

        // SLC tiles of every target this stack sees.
        for (std::size_t k = 0; k < st.acquisitions.size(); ++k) {
            const auto& acq = st.acquisitions[k];
            auto& tiles = scene.tiles[acq.acquisition_id];
            for (const auto& t : scene.truth.targets) {
                if (std::find(t.stacks.begin(), t.stacks.end(), st.spec.id) == t.stacks.end()) continue;
                TimingTruth tt;
                tt.target_id = t.id;
                tt.acquisition_id = acq.acquisition_id;
                RadarTiming raw = raw_timing(acq, t.position, providers, &tt.clean);
                if (!cfg.zero_noise) {
                    tt.noise_rg_m = gauss(rng, cfg.sigma_rg_m);
                    tt.noise_az_m = gauss(rng, cfg.sigma_az_m);
                    raw.tau_rg += 2.0 * tt.noise_rg_m / kSpeedOfLight;
                    raw.t_az += tt.noise_az_m / azimuth_scale(acq.geometry, raw.t_az, t.position);
                }
                tt.raw = raw;
                double power = 0.0;
                if (!cfg.zero_noise) {
                    tt.scr_db = corrupt.count(k) ? cfg.corrupt_scr_db : uniform(rng, cfg.scr_db_min, cfg.scr_db_max);
                    power = kPeakAmplitude * kPeakAmplitude / std::pow(10.0, tt.scr_db / 10.0);
                } else {
                    tt.scr_db = std::numeric_limits<double>::infinity();
                }
                const PixelCoord peak = timing_to_pixel(acq.geometry, raw);
                const auto half = static_cast<double>(cfg.tile_size / 2);
                const PixelCoord origin{std::floor(peak.line) - half, std::floor(peak.sample) - half};
                tiles.push_back(
                    synthesize_tile(origin, cfg.tile_size, peak, kPeakAmplitude, power, res_line, res_sample, rng));
                scene.truth.timings.push_back(tt);
            }
        }

        // Amplitude stack in master geometry around every target.
        std::vector<std::pair<PixelCoord, std::string>> peaks;
        double l0 = 1e300, l1 = -1e300, s0 = 1e300, s1 = -1e300;
        for (const auto& t : scene.truth.targets) {
            const PixelCoord p = timing_to_pixel(master.geometry, raw_timing(master, t.position, providers));
            if (std::find(t.stacks.begin(), t.stacks.end(), st.spec.id) != t.stacks.end()) peaks.emplace_back(p, t.id);
        }
        const double half = cfg.scene_half_size_m;
        const Geodetic gc{cfg.latitude_deg * kDeg, cfg.longitude_deg * kDeg, cfg.ground_height_m};
        const MapGrid mc = geodetic_to_map(gc, scene.truth.zone, scene.truth.north);
        for (double de : {-half, half})
            for (double dn : {-half, half})
                for (double dh : {0.0, kFacadeTop}) {
                    const Ecef corner = map_to_ecef({mc.easting + de, mc.northing + dn, scene.truth.zone,
                                                     scene.truth.north, cfg.ground_height_m + dh});
                    const PixelCoord p = timing_to_pixel(master.geometry, radar_code(master.geometry, corner));
                    l0 = std::min(l0, p.line);
                    l1 = std::max(l1, p.line);
                    s0 = std::min(s0, p.sample);
                    s1 = std::max(s1, p.sample);
                }
        const PixelCoord origin{std::floor(l0) - kAmplitudeMargin, std::floor(s0) - kAmplitudeMargin};
        const auto rows = static_cast<std::size_t>(std::ceil(l1 - l0)) + 2 * kAmplitudeMargin;
        const auto cols = static_cast<std::size_t>(std::ceil(s1 - s0)) + 2 * kAmplitudeMargin;
        scene.amplitude_origin[st.spec.id] = origin;
        auto& amps = scene.amplitudes[st.spec.id];
        for (std::size_t k = 0; k < st.acquisitions.size(); ++k) {
            Grid<std::complex<double>> field(rows, cols);
            for (auto& v : field.values()) v = clutter_sample(rng, clutter_mean);
            for (const auto& [p, id] : peaks) {
                const std::complex<double> carrier =
                    std::polar(kPeakAmplitude, cfg.zero_noise ? 0.0 : uniform(rng, -kPi, kPi));
                const long r0 = static_cast<long>(std::floor(p.line - origin.line)) - static_cast<long>(kAmplitudeHalo);
                const long c0 = static_cast<long>(std::floor(p.sample - origin.sample)) - static_cast<long>(kAmplitudeHalo);
                for (long r = std::max(0L, r0); r <= std::min(static_cast<long>(rows) - 1, r0 + 2 * static_cast<long>(kAmplitudeHalo)); ++r)
                    for (long c = std::max(0L, c0); c <= std::min(static_cast<long>(cols) - 1, c0 + 2 * static_cast<long>(kAmplitudeHalo)); ++c) {
                        const double pl = point_response(origin.line + static_cast<double>(r) - p.line, res_line);
                        const double ps = point_response(origin.sample + static_cast<double>(c) - p.sample, res_sample);
                        field(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) += carrier * (pl * ps);
                    }
            }
            Grid<float> amp(rows, cols);
            for (std::size_t i = 0; i < amp.size(); ++i) amp.values()[i] = static_cast<float>(std::abs(field.values()[i]));
            amps.push_back(std::move(amp));
        }
    }

    if (cfg.facades) add_psi_clouds(scene, layout, rng);
    if (cfg.method == "optical") add_optical(scene, rng);
    return scene;
}

namespace {

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

std::string write_scene(const Scene& scene, const std::string& directory) {
    namespace fs = std::filesystem;
    using io::num;
    const fs::path root(directory);
    for (const char* sub : {"metadata", "slc", "amplitude", "psi", "truth"}) fs::create_directories(root / sub);
    std::vector<std::string> files;
    const auto put = [&](const std::string& rel) {
        files.push_back(rel);
        return (root / rel).string();
    };

    nlohmann::json m;
    m["format_version"] = io::kFormatVersion;
    m["preset"] = scene.config.preset;
    m["seed"] = scene.config.seed;
    m["method"] = scene.config.method;
    m["zone"] = scene.truth.zone;
    m["north"] = scene.truth.north;
    m["ground_height_m"] = scene.config.ground_height_m;

    io::PointTable slc_index({"acquisition_id", "path", "line0", "sample0", "rows", "cols"});
    slc_index.set_meta("kind", "slc_index");
    m["acquisitions"] = nlohmann::json::array();
    m["stacks"] = nlohmann::json::array();
    for (const auto& st : scene.stacks) {
        nlohmann::json js;
        js["id"] = st.spec.id;
        js["heading"] = std::string(to_string(st.spec.heading));
        js["master"] = st.acquisitions.front().acquisition_id;
        for (const auto& acq : st.acquisitions) {
            const std::string meta_rel = "metadata/" + acq.acquisition_id + ".meta";
            io::write_metadata(put(meta_rel), acq);
            m["acquisitions"].push_back({{"id", acq.acquisition_id}, {"stack", st.spec.id}, {"metadata", meta_rel}});
            fs::create_directories(root / "slc" / acq.acquisition_id);
            const auto it = scene.tiles.find(acq.acquisition_id);
            if (it == scene.tiles.end()) continue;
            for (std::size_t k = 0; k < it->second.size(); ++k) {
                const auto& tile = it->second[k];
                const std::string rel = "slc/" + acq.acquisition_id + "/tile_" + pad(k, 4) + ".rt";
                io::write_raster(put(rel), tile);
                const PixelCoord o = tile.georef.origin();
                slc_index.add_row({acq.acquisition_id, rel, num(o.line), num(o.sample), std::to_string(tile.rows()),
                                   std::to_string(tile.cols())});
            }
        }
        const auto amp = scene.amplitudes.find(st.spec.id);
        if (amp != scene.amplitudes.end()) {
            fs::create_directories(root / "amplitude" / st.spec.id);
            const PixelCoord origin = scene.amplitude_origin.at(st.spec.id);
            js["amplitudes"] = nlohmann::json::array();
            for (std::size_t k = 0; k < amp->second.size(); ++k) {
                const std::string rel =
                    "amplitude/" + st.spec.id + "/" + st.acquisitions[k].acquisition_id + ".rt";
                io::write_raster(put(rel), {io::Georef::pixel_origin(origin), amp->second[k]});
                js["amplitudes"].push_back(rel);
            }
        }
        for (const auto& cloud : scene.psi_clouds)
            if (cloud.stack_id == st.spec.id) {
                const std::string rel = "psi/" + st.spec.id + ".csv";
                io::write_table(put(rel), psi_cloud_to_table(cloud));
                js["psi"] = rel;
            }
        m["stacks"].push_back(js);
    }
    io::write_table(put("slc_index.csv"), slc_index);
    m["slc_index"] = "slc_index.csv";

    io::write_table(put("roads.csv"), io::roads_to_table(scene.roads));
    m["roads"] = "roads.csv";
    io::write_file(put("corrections.cfg"), scene.correction_config);
    m["corrections"] = "corrections.cfg";
    if (scene.optical) {
        io::write_raster(put("optical.rt"), {scene.optical->georef, scene.optical->pixels});
        m["optical"] = {{"raster", "optical.rt"}, {"template_rect", scene.template_rect}};
    }
    m["fusion_pairs"] = nlohmann::json::array();
    for (const auto& [key, shift] : scene.truth.psi_shifts) {
        const auto bar = key.find('|');
        m["fusion_pairs"].push_back({key.substr(0, bar), key.substr(bar + 1)});
    }

    io::PointTable targets({"id", "class", "x", "y", "z", "easting", "northing", "height", "stacks"});
    targets.set_meta("kind", "truth_targets");
    for (const auto& t : scene.truth.targets)
        targets.add_row({t.id, std::string(to_string(t.cls)), num(t.position.x()), num(t.position.y()),
                         num(t.position.z()), num(t.map.easting), num(t.map.northing), num(t.map.height),
                         join(t.stacks, ';')});
    io::write_table(put("truth/targets.csv"), targets);

    io::PointTable timings({"target_id", "acquisition_id", "clean_t_az", "clean_tau_rg", "raw_t_az", "raw_tau_rg",
                            "noise_rg_m", "noise_az_m", "scr_db"});
    timings.set_meta("kind", "truth_timings");
    for (const auto& t : scene.truth.timings)
        timings.add_row({t.target_id, t.acquisition_id, num(t.clean.t_az), num(t.clean.tau_rg), num(t.raw.t_az),
                         num(t.raw.tau_rg), num(t.noise_rg_m), num(t.noise_az_m),
                         std::isfinite(t.scr_db) ? num(t.scr_db) : "inf"});
    io::write_table(put("truth/timings.csv"), timings);

    io::PointTable psi({"stack_id", "point_id", "target_id"});
    psi.set_meta("kind", "truth_psi");
    for (const auto& p : scene.truth.psi) psi.add_row({p.stack_id, p.point_id, p.target_id});
    io::write_table(put("truth/psi.csv"), psi);

    io::PointTable shifts({"pair", "east", "north", "up"});
    shifts.set_meta("kind", "truth_psi_shifts");
    for (const auto& [key, v] : scene.truth.psi_shifts) shifts.add_row({key, num(v.x()), num(v.y()), num(v.z())});
    io::write_table(put("truth/psi_shifts.csv"), shifts);

    m["truth"] = {{"targets", "truth/targets.csv"},
                  {"timings", "truth/timings.csv"},
                  {"psi", "truth/psi.csv"},
                  {"psi_shifts", "truth/psi_shifts.csv"}};
    std::sort(files.begin(), files.end());
    m["files"] = files;
    const std::string manifest = (root / "manifest.json").string();
    io::write_file(manifest, m.dump(2) + "\n");
    return manifest;
}

ObservationSet simulate_observations(const std::vector<StackGeometry>& stacks, const Ecef& target,
                                     const std::map<std::string, std::pair<double, double>>& sigma_rg_az,
                                     std::mt19937_64& rng,
                                     const std::map<std::string, std::pair<double, double>>& bias_rg_az) {
    ObservationSet set;
    for (const auto& st : stacks) {
        const auto sig = sigma_rg_az.count(st.spec.id) ? sigma_rg_az.at(st.spec.id) : std::pair{0.0, 0.0};
        const auto bias = bias_rg_az.count(st.spec.id) ? bias_rg_az.at(st.spec.id) : std::pair{0.0, 0.0};
        for (std::size_t k = 0; k < st.acquisitions.size(); ++k) {
            const AcquisitionRef ref = st.ref(k);
            RadarTiming t = radar_code(*ref.geometry, target);
            const double rg = bias.first + gauss(rng, sig.first);
            const double az = bias.second + gauss(rng, sig.second);
            t.tau_rg += 2.0 * rg / kSpeedOfLight;
            t.t_az += az / azimuth_scale(*ref.geometry, t.t_az, target);
            TimingObservation o;
            o.id = ref.acquisition_id;
            o.geometry_id = st.spec.id;
            o.geometry = ref.geometry;
            o.timing = t;
            o.provenance = "simulated";
            set.observations.push_back(std::move(o));
        }
    }
    return set;
}

Score score_against_truth(const std::vector<SolvedPoint>& solutions, const std::vector<TruthPoint>& truth,
                          double radius_m) {
    Score s;
    s.solutions = solutions.size();
    s.truths = truth.size();
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < truth.size(); ++i) by_id[truth[i].id] = i;

    // Candidate matches sorted by (distance, truth id, candidate id) so the
    // greedy assignment ignores input order.
    struct Link {
        double distance;
        std::string truth_id;
        std::string candidate_id;
        std::size_t sol;
        std::size_t tru;
    };
    std::vector<Link> links;
    for (std::size_t i = 0; i < solutions.size(); ++i) {
        const auto& p = solutions[i];
        if (p.truth_id) {
            const auto it = by_id.find(*p.truth_id);
            if (it != by_id.end())
                links.push_back({(truth[it->second].position - p.position).norm(), *p.truth_id, p.candidate_id, i,
                                 it->second});
            continue;
        }
        for (std::size_t j = 0; j < truth.size(); ++j) {
            const double d = (truth[j].position - p.position).norm();
            if (d <= radius_m) links.push_back({d, truth[j].id, p.candidate_id, i, j});
        }
    }
    std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) {
        return std::tie(a.distance, a.truth_id, a.candidate_id) < std::tie(b.distance, b.truth_id, b.candidate_id);
    });
    std::vector<bool> used_sol(solutions.size(), false), used_truth(truth.size(), false);
    std::vector<std::pair<std::string, Eigen::Vector3d>> errors;
    for (const auto& l : links) {
        if (used_sol[l.sol] || used_truth[l.tru]) continue;
        used_sol[l.sol] = used_truth[l.tru] = true;
        const LocalFrame frame(truth[l.tru].position);
        const LocalEnu e = frame.to_enu(solutions[l.sol].position);
        errors.emplace_back(l.truth_id, Eigen::Vector3d(e.east, e.north, e.up));
    }
    // Accumulate in truth-id order for bit-identical sums.
    std::sort(errors.begin(), errors.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    s.matched = errors.size();
    for (const auto& [id, e] : errors) {
        s.bias += e;
        s.rmse += e.cwiseProduct(e);
        s.max_error_m = std::max(s.max_error_m, e.norm());
    }
    if (s.matched > 0) {
        s.bias /= static_cast<double>(s.matched);
        s.rmse = (s.rmse / static_cast<double>(s.matched)).cwiseSqrt();
    }
    s.precision = s.solutions ? static_cast<double>(s.matched) / static_cast<double>(s.solutions) : 0.0;
    s.recall = s.truths ? static_cast<double>(s.matched) / static_cast<double>(s.truths) : 0.0;
    return s;
}

}  // namespace sargcp::sim
