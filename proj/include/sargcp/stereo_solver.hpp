// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sargcp/range_doppler.hpp"

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sargcp {

/// Corrected timing of one scatterer in one acquisition.
struct TimingObservation {
    std::string id;
    std::string geometry_id;
    std::shared_ptr<const AcquisitionGeometry> geometry;
    RadarTiming timing;
    /// Correction provenance; empty means the timing was never corrected.
    std::string provenance;
    bool azimuth_active = true;
    bool range_active = true;
};

struct ObservationSet {
    std::vector<TimingObservation> observations;

    std::vector<std::string> geometry_ids() const;
};

enum class ResidualKind { Azimuth, Range };

std::string_view to_string(ResidualKind k);

/// Variance components and bookkeeping of one geometry.
struct GeometryVariance {
    std::string geometry_id;
    HeadingClass heading = HeadingClass::Ascending;
    double incidence_deg = 0.0;
    double s_az = 0.0;  // meters, 1 sigma
    double s_rg = 0.0;
    std::size_t n_az = 0;
    std::size_t n_rg = 0;
    double redundancy_az = 0.0;
    double redundancy_rg = 0.0;
};

/// Residuals in meters; NaN for inactive components.
struct ObservationResidual {
    std::string observation_id;
    std::string geometry_id;
    double azimuth_m = 0.0;
    double range_m = 0.0;
};

struct OutlierEntry {
    int stage = 0;
    std::string observation_id;
    std::string geometry_id;
    std::string reason;
};

struct StereoSolution {
    Ecef position = Ecef::Zero();
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
    std::vector<GeometryVariance> variances;
    std::vector<ObservationResidual> residuals;
    int iterations = 0;
    int vce_iterations = 0;
    bool vce_converged = false;
    double condition = 0.0;
    std::vector<OutlierEntry> outlier_log;

    const GeometryVariance* variance_of(std::string_view geometry_id) const;
};

struct SolverOptions {
    double convergence_m = 1e-5;
    int max_iterations = 30;
    double vce_tolerance = 0.01;
    int max_vce_iterations = 60;
    double condition_limit = 1e10;
    double reference_height_m = 0.0;
    std::size_t min_observations = 3;
    double sigma_floor_m = 1e-6;
    double initial_sigma_az_m = 0.02;
    double initial_sigma_rg_m = 0.02;
    /// Skip variance component estimation and keep the initial sigmas.
    bool estimate_variances = true;
};

/// Along-track and slant-range residuals of `position` for one
/// observation, meters (observed minus computed).
struct ResidualPair {
    double azimuth_m;
    double range_m;
};
ResidualPair observation_residual(const TimingObservation& obs, const Ecef& position);

/// Weighted Gauss-Newton on range and zero-Doppler residuals with
/// per-geometry variance component estimation.
/// Throws DomainError for fewer than two geometries, uncorrected timings or
/// too few observations per group; IllConditionedError when the normal
/// matrix condition exceeds the limit; ConvergenceError when Gauss-Newton
/// fails.
StereoSolution solve(const ObservationSet& obs, std::optional<Ecef> initial = std::nullopt,
                     const SolverOptions& options = {});

struct CascadeOptions {
    double gross_range_m = 0.6;
    double gross_azimuth_m = 1.1;
    double sigma_multiplier = 2.0;
    double max_s_az_m = 0.20;
    /// A geometry whose gross fraction exceeds this is dropped entirely.
    double geometry_gross_fraction = 0.5;
};

enum class CascadeOutcome { Accepted, Rejected, Unsolvable };

std::string_view to_string(CascadeOutcome o);

struct CascadeResult {
    CascadeOutcome outcome = CascadeOutcome::Unsolvable;
    ObservationSet cleaned;
    /// Last solution computed, also present for rejected candidates.
    std::optional<StereoSolution> solution;
    std::vector<OutlierEntry> log;
    std::string reason;
};

/// Gross residual screening, the two-sigma test and the azimuth
/// consistency check, each followed by a re-solve.
CascadeResult outlier_cascade(const ObservationSet& obs, const SolverOptions& solver = {},
                              const CascadeOptions& options = {},
                              std::optional<Ecef> initial = std::nullopt);

enum class GeometryClass { AA, DD, AD, ADAD, Other };

std::string_view to_string(GeometryClass c);
GeometryClass parse_geometry_class(std::string_view s);
GeometryClass classify_geometries(const std::vector<HeadingClass>& headings);

inline constexpr double kConfidence95Scale = 1.96;

struct QualityReport {
    double s_e = 0.0;  // 95 %, meters
    double s_n = 0.0;
    double s_h = 0.0;
    Eigen::Matrix3d enu_covariance = Eigen::Matrix3d::Zero();
    GeometryClass geometry_class = GeometryClass::Other;
    double scale = kConfidence95Scale;
};

/// Covariance in the local frame at `origin`, scaled to 95 % per axis.
QualityReport report_quality(const StereoSolution& sol, const Ecef& origin);
QualityReport report_quality(const StereoSolution& sol);

}  // namespace sargcp
