// SPDX-License-Identifier: Apache-2.0
#include "sargcp/geodesy.hpp"

#include "sargcp/error.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace sargcp {

namespace {

using std::numbers::pi;

bool finite(const Ecef& p) { return p.allFinite(); }

// Krueger series to sixth order in the third flattening.
struct TmSeries {
    double n;
    double rectifying_radius;  // A
    std::array<double, 6> alpha;
    std::array<double, 6> beta;
    double e;  // first eccentricity
};

const TmSeries& tm_series() {
    static const TmSeries s = [] {
        TmSeries t{};
        const double f = wgs84::kFlattening;
        const double n = f / (2.0 - f);
        const double n2 = n * n, n3 = n2 * n, n4 = n3 * n, n5 = n4 * n, n6 = n5 * n;
        t.n = n;
        t.rectifying_radius =
            wgs84::kSemiMajor / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
        t.alpha = {
            n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 -
                127.0 * n5 / 288.0 + 7891.0 * n6 / 37800.0,
            13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0 -
                1983433.0 * n6 / 1935360.0,
            61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0 +
                167603.0 * n6 / 181440.0,
            49561.0 * n4 / 161280.0 - 179.0 * n5 / 168.0 + 6601661.0 * n6 / 7257600.0,
            34729.0 * n5 / 80640.0 - 3418889.0 * n6 / 1995840.0,
            212378941.0 * n6 / 319334400.0,
        };
        t.beta = {
            n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0 - 81.0 * n5 / 512.0 +
                96199.0 * n6 / 604800.0,
            n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0 + 46.0 * n5 / 105.0 -
                1118711.0 * n6 / 3870720.0,
            17.0 * n3 / 480.0 - 37.0 * n4 / 840.0 - 209.0 * n5 / 4480.0 + 5569.0 * n6 / 90720.0,
            4397.0 * n4 / 161280.0 - 11.0 * n5 / 504.0 - 830251.0 * n6 / 7257600.0,
            4583.0 * n5 / 161280.0 - 108847.0 * n6 / 3991680.0,
            20648693.0 * n6 / 638668800.0,
        };
        t.e = std::sqrt(wgs84::kEcc2);
        return t;
    }();
    return s;
}

constexpr double kUtmScale = 0.9996;
constexpr double kFalseEasting = 500000.0;
constexpr double kFalseNorthingSouth = 10000000.0;

double central_meridian(int zone) { return (zone * 6.0 - 183.0) * pi / 180.0; }

// tan(conformal latitude) from tan(geodetic latitude).
double conformal_tan(double tau, double e) {
    const double sigma = std::sinh(e * std::atanh(e * tau / std::hypot(1.0, tau)));
    return tau * std::hypot(1.0, sigma) - sigma * std::hypot(1.0, tau);
}

}  // namespace

Geodetic ecef_to_geodetic(const Ecef& p) {
    if (!finite(p)) throw DomainError("ecef_to_geodetic: non-finite input");
    const double a = wgs84::kSemiMajor;
    const double e2 = wgs84::kEcc2;
    const double rho = std::hypot(p.x(), p.y());
    Geodetic g;
    g.longitude = std::atan2(p.y(), p.x());
    if (rho == 0.0 && p.z() == 0.0) throw DomainError("ecef_to_geodetic: geocenter");

    double lat = std::atan2(p.z(), rho * (1.0 - e2));
    double h = 0.0;
    for (int it = 0; it < 20; ++it) {
        const double s = std::sin(lat);
        const double c = std::cos(lat);
        const double n = a / std::sqrt(1.0 - e2 * s * s);
        const double h_new =
            std::abs(c) > 0.7 ? rho / c - n : p.z() / s - n * (1.0 - e2);
        const double lat_new = std::atan2(p.z(), rho * (1.0 - e2 * n / (n + h_new)));
        const bool done = std::abs(lat_new - lat) < 1e-15 && std::abs(h_new - h) < 1e-10;
        lat = lat_new;
        h = h_new;
        if (done) break;
    }
    // Final height from the converged latitude.
    const double s = std::sin(lat);
    const double c = std::cos(lat);
    const double n = a / std::sqrt(1.0 - e2 * s * s);
    h = std::abs(c) > 0.7 ? rho / c - n : p.z() / s - n * (1.0 - e2);
    g.latitude = lat;
    g.height = h;
    return g;
}

Ecef geodetic_to_ecef(const Geodetic& g) {
    const double s = std::sin(g.latitude);
    const double c = std::cos(g.latitude);
    const double n = wgs84::kSemiMajor / std::sqrt(1.0 - wgs84::kEcc2 * s * s);
    return {(n + g.height) * c * std::cos(g.longitude), (n + g.height) * c * std::sin(g.longitude),
            (n * (1.0 - wgs84::kEcc2) + g.height) * s};
}

Eigen::Vector3d geodetic_normal(double latitude, double longitude) {
    return {std::cos(latitude) * std::cos(longitude), std::cos(latitude) * std::sin(longitude),
            std::sin(latitude)};
}

int utm_zone_for(double longitude) {
    const double deg = longitude * 180.0 / pi;
    int zone = static_cast<int>(std::floor((deg + 180.0) / 6.0)) + 1;
    if (zone > 60) zone = 60;
    if (zone < 1) zone = 1;
    return zone;
}

MapGrid geodetic_to_map(const Geodetic& g, int zone, bool north) {
    if (zone < 1 || zone > 60) throw DomainError("geodetic_to_map: zone out of range");
    const TmSeries& s = tm_series();
    const double lam = std::remainder(g.longitude - central_meridian(zone), 2.0 * pi);
    const double tau_p = conformal_tan(std::tan(g.latitude), s.e);
    const double xi_p = std::atan2(tau_p, std::cos(lam));
    const double eta_p = std::asinh(std::sin(lam) / std::hypot(tau_p, std::cos(lam)));
    double xi = xi_p;
    double eta = eta_p;
    for (int j = 1; j <= 6; ++j) {
        xi += s.alpha[j - 1] * std::sin(2.0 * j * xi_p) * std::cosh(2.0 * j * eta_p);
        eta += s.alpha[j - 1] * std::cos(2.0 * j * xi_p) * std::sinh(2.0 * j * eta_p);
    }
    MapGrid m;
    m.zone = zone;
    m.north = north;
    m.easting = kFalseEasting + kUtmScale * s.rectifying_radius * eta;
    m.northing = (north ? 0.0 : kFalseNorthingSouth) + kUtmScale * s.rectifying_radius * xi;
    m.height = g.height;
    return m;
}

Geodetic map_to_geodetic(const MapGrid& m) {
    if (m.zone < 1 || m.zone > 60) throw DomainError("map_to_geodetic: zone out of range");
    const TmSeries& s = tm_series();
    const double xi =
        (m.northing - (m.north ? 0.0 : kFalseNorthingSouth)) / (kUtmScale * s.rectifying_radius);
    const double eta = (m.easting - kFalseEasting) / (kUtmScale * s.rectifying_radius);
    double xi_p = xi;
    double eta_p = eta;
    for (int j = 1; j <= 6; ++j) {
        xi_p -= s.beta[j - 1] * std::sin(2.0 * j * xi) * std::cosh(2.0 * j * eta);
        eta_p -= s.beta[j - 1] * std::cos(2.0 * j * xi) * std::sinh(2.0 * j * eta);
    }
    const double tau_p = std::sin(xi_p) / std::hypot(std::sinh(eta_p), std::cos(xi_p));
    const double lam = std::atan2(std::sinh(eta_p), std::cos(xi_p));

    // Newton on tau' (tau) = tau_p.
    const double e2m = 1.0 - wgs84::kEcc2;
    double tau = tau_p / e2m;
    for (int it = 0; it < 10; ++it) {
        const double tp = conformal_tan(tau, s.e);
        const double dtau = (tau_p - tp) / std::hypot(1.0, tp) * (1.0 + e2m * tau * tau) /
                            (e2m * std::hypot(1.0, tau));
        tau += dtau;
        if (std::abs(dtau) < 1e-15 * std::max(1.0, std::abs(tau))) break;
    }
    Geodetic g;
    g.latitude = std::atan(tau);
    g.longitude = std::remainder(lam + central_meridian(m.zone), 2.0 * pi);
    g.height = m.height;
    return g;
}

MapGrid ecef_to_map(const Ecef& p, int zone, bool north) {
    return geodetic_to_map(ecef_to_geodetic(p), zone, north);
}

Ecef map_to_ecef(const MapGrid& m) { return geodetic_to_ecef(map_to_geodetic(m)); }

Eigen::Matrix3d enu_basis(const Ecef& origin) {
    if (!finite(origin) || origin.norm() < 1.0)
        throw DomainError("enu_basis: degenerate origin");
    const Geodetic g = ecef_to_geodetic(origin);
    const double sl = std::sin(g.latitude), cl = std::cos(g.latitude);
    const double so = std::sin(g.longitude), co = std::cos(g.longitude);
    Eigen::Matrix3d r;
    r << -so, co, 0.0,              //
        -sl * co, -sl * so, cl,     //
        cl * co, cl * so, sl;
    return r;
}

LocalFrame::LocalFrame(const Ecef& origin) : origin_(origin), rotation_(enu_basis(origin)) {}

LocalEnu LocalFrame::to_enu(const Ecef& p) const {
    const Eigen::Vector3d d = rotation_ * (p - origin_);
    return {d.x(), d.y(), d.z()};
}

Ecef LocalFrame::to_ecef(const LocalEnu& l) const {
    return origin_ + rotation_.transpose() * Eigen::Vector3d(l.east, l.north, l.up);
}

Eigen::Matrix3d LocalFrame::rotate_covariance(const Eigen::Matrix3d& cov) const {
    return rotation_ * cov * rotation_.transpose();
}

OrbitModel::OrbitModel(double epoch, std::vector<Eigen::Vector3d> coefficients,
                       double valid_begin, double valid_end)
    : epoch_(epoch),
      coefficients_(std::move(coefficients)),
      valid_begin_(valid_begin),
      valid_end_(valid_end) {
    if (coefficients_.size() < 3) throw DomainError("OrbitModel: degree must be >= 2");
    if (!std::isfinite(epoch_) || !std::isfinite(valid_begin_) || !std::isfinite(valid_end_) ||
        !(valid_begin_ < valid_end_))
        throw DomainError("OrbitModel: invalid validity interval");
    for (const auto& c : coefficients_)
        if (!c.allFinite()) throw DomainError("OrbitModel: non-finite coefficient");
}

OrbitState OrbitModel::state(double t) const {
    if (!contains(t)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "orbit evaluated at t=" << t << " outside [" << valid_begin_ << ", " << valid_end_
            << "]";
        throw DomainError(msg.str());
    }
    const double dt = t - epoch_;
    // Horner for value and first two derivatives.
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    Eigen::Vector3d a = Eigen::Vector3d::Zero();
    for (auto it = coefficients_.rbegin(); it != coefficients_.rend(); ++it) {
        a = a * dt + 2.0 * v;
        v = v * dt + p;
        p = p * dt + *it;
    }
    return {p, v, a};
}

}  // namespace sargcp
