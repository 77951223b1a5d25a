// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sargcp/candidate.hpp"
#include "sargcp/io_formats.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace sargcp {

struct PsiPoint {
    std::string id;
    double easting = 0.0;
    double northing = 0.0;
    double height = 0.0;
    double coherence = 0.0;
    double height_precision = 0.0;  // meters
    double adi = 0.0;

    Eigen::Vector3d xyz() const { return {easting, northing, height}; }
};

/// Geocoded PSI result of one stack in a single map zone.
struct PsiPointCloud {
    std::string stack_id;
    int zone = 0;
    bool north = true;
    std::vector<PsiPoint> points;

    void validate() const;
};

/// Columns id, easting, northing, height, coherence, height_precision, adi;
/// metadata stack, zone, hemisphere.
io::PointTable psi_cloud_to_table(const PsiPointCloud& cloud);
PsiPointCloud psi_cloud_from_table(const io::PointTable& table);

struct RegistrationOptions {
    double cell_m = 2.0;
    /// Points whose height precision is within this quantile form the subset.
    double subset_quantile = 0.25;
    double max_shift_m = 20.0;
    /// Minimum peak height above the correlation mean, in standard deviations.
    double min_significance = 5.0;
};

struct CoarseShift {
    bool registered = false;
    /// Translation taking cloud A onto cloud B (b = a + shift).
    Eigen::Vector3d shift = Eigen::Vector3d::Zero();
    /// Per-axis disagreement between the two planes observing that axis.
    Eigen::Vector3d discrepancy = Eigen::Vector3d::Zero();
    double significance = 0.0;
};

/// Cross-correlation of occupancy rasters in the xy, xz and yz planes.
CoarseShift coarse_register(const PsiPointCloud& a, const PsiPointCloud& b,
                            const RegistrationOptions& options = {});

struct PsPair {
    std::size_t index_a = 0;
    std::size_t index_b = 0;
    std::string id_a;
    std::string id_b;
    /// Distance after applying the refined shift, meters.
    double separation = 0.0;
    double adi_max = 0.0;
    double quality = 0.0;
    /// Midpoint in map coordinates of A.
    Eigen::Vector3d midpoint = Eigen::Vector3d::Zero();
};

struct PairingOptions {
    double search_radius_m = 5.0;
    double refine_extent_m = 1.0;
    double refine_step_m = 0.25;
    /// Pairs farther apart than this many combined height precisions are
    /// dropped.
    double gate_sigma = 3.0;
};

struct PairingResult {
    Eigen::Vector3d refined_shift = Eigen::Vector3d::Zero();
    std::vector<PsPair> pairs;
};

/// Refines the shift by maximising the number of mutual nearest neighbours
/// inside the search radius (ties: smaller total distance), then by a
/// precision-weighted mean over the gated pairs, and pairs mutual nearest
/// neighbours at the final shift.
PairingResult refine_and_pair(const PsiPointCloud& a, const PsiPointCloud& b,
                              const Eigen::Vector3d& coarse_shift,
                              const PairingOptions& options = {});

/// Keeps one pair per square grid cell: smallest separation, then smallest
/// ADI.
std::vector<PsPair> thin_pairs(const std::vector<PsPair>& pairs, double cell_m = 10.0);

/// Candidates at the pair midpoints radar-coded into every acquisition of
/// both stacks.
std::vector<PsCandidate> radar_code_pairs(const std::vector<PsPair>& pairs, const PsiPointCloud& a,
                                          const PsiPointCloud& b,
                                          const std::vector<AcquisitionRef>& acquisitions,
                                          const PixelPredictor& predict = {});

}  // namespace sargcp
