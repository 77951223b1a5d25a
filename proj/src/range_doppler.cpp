// SPDX-License-Identifier: Apache-2.0
#include "sargcp/range_doppler.hpp"

#include "sargcp/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>

namespace sargcp {

std::string_view to_string(HeadingClass h) {
    return h == HeadingClass::Ascending ? "ascending" : "descending";
}

std::string_view to_string(LookSide s) { return s == LookSide::Right ? "right" : "left"; }

HeadingClass parse_heading(std::string_view s) {
    if (s == "ascending" || s == "A" || s == "asc") return HeadingClass::Ascending;
    if (s == "descending" || s == "D" || s == "dsc") return HeadingClass::Descending;
    throw DomainError("unknown heading class '" + std::string(s) + "'");
}

LookSide parse_look_side(std::string_view s) {
    if (s == "right") return LookSide::Right;
    if (s == "left") return LookSide::Left;
    throw DomainError("unknown look side '" + std::string(s) + "'");
}

void AcquisitionGeometry::validate() const {
    if (!(prf > 0.0) || !(rsf > 0.0)) throw DomainError("sampling rates must be positive");
    if (!(incidence_deg > 0.0 && incidence_deg < 90.0))
        throw DomainError("incidence angle must lie in (0, 90) degrees");
    if (!std::isfinite(t_az_first) || !std::isfinite(tau_rg_first))
        throw DomainError("non-finite first sample times");
}

RadarTiming pixel_to_timing(const AcquisitionGeometry& geom, const PixelCoord& p) {
    return {geom.t_az_first + p.line / geom.prf, geom.tau_rg_first + p.sample / geom.rsf};
}

PixelCoord timing_to_pixel(const AcquisitionGeometry& geom, const RadarTiming& t) {
    return {(t.t_az - geom.t_az_first) * geom.prf, (t.tau_rg - geom.tau_rg_first) * geom.rsf};
}

namespace {

// Doppler function f(t) = v(t).(X - S(t)) and its time derivative.
struct Doppler {
    double value;
    double slope;
};

Doppler doppler(const OrbitModel& orbit, const Ecef& target, double t) {
    const OrbitState s = orbit.state(t);
    const Eigen::Vector3d d = target - s.position;
    return {s.velocity.dot(d), s.acceleration.dot(d) - s.velocity.squaredNorm()};
}

}  // namespace

RadarTiming radar_code(const AcquisitionGeometry& geom, const Ecef& target,
                       const RadarCodeOptions& options) {
    if (!target.allFinite()) throw DomainError("radar_code: non-finite target");
    const OrbitModel& orbit = geom.orbit;
    const int n = std::max(2, options.scan_samples);
    const double t0 = orbit.valid_begin();
    const double step = (orbit.valid_end() - t0) / n;

    // Coarse scan for the sign change of the Doppler function.
    double lo = 0.0, hi = 0.0, f_lo = 0.0, f_hi = 0.0;
    bool bracketed = false;
    double t_prev = t0;
    double f_prev = doppler(orbit, target, t_prev).value;
    for (int i = 1; i <= n; ++i) {
        const double t = (i == n) ? orbit.valid_end() : t0 + i * step;
        const double f = doppler(orbit, target, t).value;
        if (f_prev == 0.0) {
            lo = hi = t_prev;
            f_lo = f_hi = 0.0;
            bracketed = true;
            break;
        }
        if ((f_prev > 0.0) != (f > 0.0) || f == 0.0) {
            lo = t_prev;
            hi = t;
            f_lo = f_prev;
            f_hi = f;
            bracketed = true;
            break;
        }
        t_prev = t;
        f_prev = f;
    }
    if (!bracketed) throw DomainError("radar_code: no zero-Doppler crossing in orbit validity");

    // Safeguarded Newton inside [lo, hi].
    double t = (f_lo == 0.0) ? lo : (f_hi == 0.0 ? hi : lo - f_lo * (hi - lo) / (f_hi - f_lo));
    bool converged = (f_lo == 0.0 || f_hi == 0.0);
    for (int it = 0; it < options.max_iterations && !converged; ++it) {
        const Doppler d = doppler(orbit, target, t);
        if (d.value == 0.0) {
            converged = true;
            break;
        }
        if ((d.value > 0.0) == (f_lo > 0.0)) {
            lo = t;
            f_lo = d.value;
        } else {
            hi = t;
            f_hi = d.value;
        }
        double next = d.slope != 0.0 ? t - d.value / d.slope : 0.5 * (lo + hi);
        if (!(next > std::min(lo, hi) && next < std::max(lo, hi))) next = 0.5 * (lo + hi);
        const double dt = next - t;
        t = next;
        if (std::abs(dt) < 1e-3 * options.tolerance_s) converged = true;
    }
    if (!converged) throw ConvergenceError("radar_code: zero-Doppler iteration did not converge");

    const OrbitState s = orbit.state(t);
    return {t, 2.0 * (s.position - target).norm() / kSpeedOfLight};
}

double azimuth_scale(const AcquisitionGeometry& geom, double t_az, const Ecef& target) {
    const OrbitState s = geom.orbit.state(t_az);
    const double speed = s.velocity.norm();
    return (s.velocity.squaredNorm() - s.acceleration.dot(target - s.position)) / speed;
}

double cross_track_offset(const AcquisitionGeometry& geom, double t_az, const Ecef& target) {
    const OrbitState s = geom.orbit.state(t_az);
    const Eigen::Vector3d up = s.position.normalized();
    const Eigen::Vector3d right = s.velocity.cross(up).normalized();
    return right.dot(target - s.position);
}

Ecef geocode(const AcquisitionGeometry& geom, const RadarTiming& timing, double height,
             const GeocodeOptions& options) {
    if (!(timing.tau_rg > 0.0)) throw DomainError("geocode: range time must be positive");
    const OrbitState s = geom.orbit.state(timing.t_az);
    const double range = 0.5 * kSpeedOfLight * timing.tau_rg;
    const Eigen::Vector3d vhat = s.velocity.normalized();

    // Initial guess: nadir displaced sideways by the flat-earth ground range.
    const Geodetic sat_geo = ecef_to_geodetic(s.position);
    const Ecef nadir = geodetic_to_ecef({sat_geo.latitude, sat_geo.longitude, height});
    const double altitude = (s.position - nadir).norm();
    if (range <= altitude) throw DomainError("geocode: range shorter than altitude");
    const Eigen::Vector3d up = geodetic_normal(sat_geo.latitude, sat_geo.longitude);
    const Eigen::Vector3d cross = vhat.cross(up);
    if (cross.norm() < 1e-6) throw DomainError("geocode: velocity parallel to the vertical");
    const double sign = geom.side == LookSide::Right ? 1.0 : -1.0;
    const Eigen::Vector3d side_dir = sign * cross.normalized();
    Ecef x = nadir + side_dir * std::sqrt(range * range - altitude * altitude);

    bool converged = false;
    for (int it = 0; it < options.max_iterations; ++it) {
        const Geodetic g = ecef_to_geodetic(x);
        const Eigen::Vector3d d = x - s.position;
        const double dn = d.norm();
        Eigen::Vector3d f(dn - range, vhat.dot(d), g.height - height);
        Eigen::Matrix3d j;
        j.row(0) = d.transpose() / dn;
        j.row(1) = vhat.transpose();
        j.row(2) = geodetic_normal(g.latitude, g.longitude).transpose();
        Eigen::Vector3d step = j.partialPivLu().solve(-f);
        const double len = step.norm();
        constexpr double kMaxStep = 50e3;
        if (len > kMaxStep) step *= kMaxStep / len;
        x += step;
        if (len < 0.1 * options.tolerance_m) {
            converged = true;
            break;
        }
    }
    if (!converged) throw ConvergenceError("geocode: iteration did not converge");
    if (sign * cross_track_offset(geom, timing.t_az, x) <= 0.0)
        throw DomainError("geocode: solution landed on the wrong side of the track");
    return x;
}

}  // namespace sargcp
