// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sargcp/geodesy.hpp"

#include <string_view>

namespace sargcp {

/// Zero-Doppler radar timing of a scatterer: absolute azimuth time of
/// closest approach and two-way range time, both in seconds.
struct RadarTiming {
    double t_az = 0.0;
    double tau_rg = 0.0;
};

/// Fractional image position, line along azimuth and sample along range.
struct PixelCoord {
    double line = 0.0;
    double sample = 0.0;
};

enum class HeadingClass { Ascending, Descending };
enum class LookSide { Left, Right };

std::string_view to_string(HeadingClass h);
std::string_view to_string(LookSide s);
HeadingClass parse_heading(std::string_view s);
LookSide parse_look_side(std::string_view s);

struct AcquisitionGeometry {
    OrbitModel orbit;
    double prf = 0.0;  // Hz
    double rsf = 0.0;  // Hz
    double t_az_first = 0.0;
    double tau_rg_first = 0.0;
    HeadingClass heading = HeadingClass::Ascending;
    double incidence_deg = 0.0;
    LookSide side = LookSide::Right;

    /// Throws DomainError when sampling rates or incidence are out of range.
    void validate() const;
};

RadarTiming pixel_to_timing(const AcquisitionGeometry& geom, const PixelCoord& p);
PixelCoord timing_to_pixel(const AcquisitionGeometry& geom, const RadarTiming& t);

struct RadarCodeOptions {
    int scan_samples = 64;
    double tolerance_s = 1e-9;
    int max_iterations = 50;
};

/// Azimuth time at which the target crosses the zero-Doppler plane and the
/// vacuum two-way range time at that instant.
RadarTiming radar_code(const AcquisitionGeometry& geom, const Ecef& target,
                       const RadarCodeOptions& options = {});

struct GeocodeOptions {
    double tolerance_m = 1e-6;
    int max_iterations = 50;
};

/// Intersection of the range sphere, the zero-Doppler plane and the surface
/// at `height` above the ellipsoid, on the declared look side.
Ecef geocode(const AcquisitionGeometry& geom, const RadarTiming& timing, double height,
             const GeocodeOptions& options = {});

/// Along-track meters per second of azimuth time at the target: the rate at
/// which the zero-Doppler plane sweeps across `target` around `t_az`.
double azimuth_scale(const AcquisitionGeometry& geom, double t_az, const Ecef& target);

/// Positive when `target` lies right of the ground track at `t_az`.
double cross_track_offset(const AcquisitionGeometry& geom, double t_az, const Ecef& target);

}  // namespace sargcp
