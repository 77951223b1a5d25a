// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <vector>

namespace sargcp {

/// Geocentric Cartesian position on WGS84, meters.
using Ecef = Eigen::Vector3d;

namespace wgs84 {
inline constexpr double kSemiMajor = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
inline constexpr double kSemiMinor = kSemiMajor * (1.0 - kFlattening);
inline constexpr double kEcc2 = kFlattening * (2.0 - kFlattening);
}  // namespace wgs84

inline constexpr double kSpeedOfLight = 299792458.0;

struct Geodetic {
    double latitude = 0.0;   // rad
    double longitude = 0.0;  // rad, (-pi, pi]
    double height = 0.0;     // m above the ellipsoid
};

/// Universal transverse Mercator coordinate. A scene lives in one zone.
struct MapGrid {
    double easting = 0.0;
    double northing = 0.0;
    int zone = 0;
    bool north = true;
    double height = 0.0;
};

struct LocalEnu {
    double east = 0.0;
    double north = 0.0;
    double up = 0.0;
};

Geodetic ecef_to_geodetic(const Ecef& p);
Ecef geodetic_to_ecef(const Geodetic& g);

/// Unit ellipsoid normal at a geodetic position.
Eigen::Vector3d geodetic_normal(double latitude, double longitude);

/// Zone whose central meridian is closest to `longitude` (rad).
int utm_zone_for(double longitude);

MapGrid geodetic_to_map(const Geodetic& g, int zone, bool north);
Geodetic map_to_geodetic(const MapGrid& m);

MapGrid ecef_to_map(const Ecef& p, int zone, bool north);
Ecef map_to_ecef(const MapGrid& m);

/// Rows are the unit east, north and up vectors at `origin`.
Eigen::Matrix3d enu_basis(const Ecef& origin);

/// East-north-up frame anchored at a fixed geocentric origin.
class LocalFrame {
public:
    explicit LocalFrame(const Ecef& origin);

    const Ecef& origin() const { return origin_; }
    const Eigen::Matrix3d& rotation() const { return rotation_; }

    LocalEnu to_enu(const Ecef& p) const;
    Ecef to_ecef(const LocalEnu& l) const;

    /// Rotates a geocentric covariance into east/north/up.
    Eigen::Matrix3d rotate_covariance(const Eigen::Matrix3d& cov) const;

private:
    Ecef origin_;
    Eigen::Matrix3d rotation_;
};

struct OrbitState {
    Ecef position;
    Eigen::Vector3d velocity;
    Eigen::Vector3d acceleration;
};

/// Satellite trajectory as one polynomial per geocentric axis:
/// position(t) = sum_k c_k (t - epoch)^k, valid on [valid_begin, valid_end].
class OrbitModel {
public:
    OrbitModel(double epoch, std::vector<Eigen::Vector3d> coefficients, double valid_begin,
               double valid_end);

    double epoch() const { return epoch_; }
    int degree() const { return static_cast<int>(coefficients_.size()) - 1; }
    const std::vector<Eigen::Vector3d>& coefficients() const { return coefficients_; }
    double valid_begin() const { return valid_begin_; }
    double valid_end() const { return valid_end_; }
    bool contains(double t) const { return t >= valid_begin_ && t <= valid_end_; }

    /// Throws DomainError outside the validity interval.
    OrbitState state(double t) const;

private:
    double epoch_;
    std::vector<Eigen::Vector3d> coefficients_;
    double valid_begin_;
    double valid_end_;
};

}  // namespace sargcp
