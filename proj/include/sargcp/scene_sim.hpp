// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sargcp/candidate.hpp"
#include "sargcp/detect_fusion.hpp"
#include "sargcp/detect_optical.hpp"
#include "sargcp/io_formats.hpp"
#include "sargcp/stereo_solver.hpp"
#include "sargcp/timing_model.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace sargcp::sim {

struct GeometrySpec {
    std::string id;
    HeadingClass heading = HeadingClass::Ascending;
    double incidence_deg = 35.0;
    /// Flight direction, degrees clockwise from north.
    double heading_deg = 350.0;
    std::size_t epochs = 20;
};

struct SimConfig {
    std::string preset = "custom";
    std::uint64_t seed = 1;
    std::string method = "road";  // fusion | optical | road
    double latitude_deg = 52.5;
    double longitude_deg = 13.4;
    double ground_height_m = 40.0;
    std::vector<GeometrySpec> geometries;

    /// White timing noise, one-way meters, per target and acquisition.
    double sigma_rg_m = 0.0116;
    double sigma_az_m = 0.0185;
    double scr_db_min = 17.0;
    double scr_db_max = 23.0;
    /// Acquisitions per geometry with strongly degraded SCR.
    std::size_t corrupt_epochs = 1;
    double corrupt_scr_db = 2.0;
    /// No clutter and no timing noise.
    bool zero_noise = false;
    /// Inject deterministic correction terms (removed again by `correct`).
    bool error_terms = true;

    double scene_half_size_m = 90.0;
    double pole_spacing_m = 75.0;
    std::size_t roads = 2;
    /// Facade grids for same-heading fusion.
    bool facades = false;
    double facade_spacing_h_m = 8.0;
    double facade_spacing_v_m = 6.0;
    double psi_noise_m = 1.5;
    double psi_shared_fraction = 0.6;
    double psi_offset_sigma_m = 3.0;

    std::size_t tile_size = 48;
    /// Optical raster: ground spacing and misregistration.
    double optical_spacing_m = 0.1;
    double optical_offset_e_m = 1.2;
    double optical_offset_n_m = -0.8;

    /// Throws DomainError for fewer than two epochs or an incidence outside
    /// (20, 60) degrees.
    void validate() const;
};

/// "berlin", "oulu" or "minimal".
SimConfig preset(std::string_view name, std::uint64_t seed = 1);

/// Nominal sampling of every synthetic acquisition.
inline constexpr double kPrf = 10000.0;
inline constexpr double kRsf = 374.7e6;
inline constexpr double kOrbitEpoch = 100.0;
inline constexpr double kOrbitHalfSpan = 5.0;
inline constexpr double kResolutionRange = 0.6;
inline constexpr double kResolutionAzimuth = 1.1;

struct StackGeometry {
    GeometrySpec spec;
    std::vector<io::AcquisitionMetadata> acquisitions;

    AcquisitionRef ref(std::size_t k) const;
};

/// Orbits and sampling for every configured geometry, centred on the scene.
/// Throws DomainError when an incidence cannot be reached.
std::vector<StackGeometry> build_geometries(const SimConfig& cfg, std::mt19937_64& rng);

enum class TargetClass { Pole, Facade, Spurious };
std::string_view to_string(TargetClass c);

struct Target {
    std::string id;
    TargetClass cls = TargetClass::Pole;
    Ecef position = Ecef::Zero();
    MapGrid map;
    /// Stacks whose acquisitions contain a response of this target.
    std::vector<std::string> stacks;
};

struct TimingTruth {
    std::string target_id;
    std::string acquisition_id;
    RadarTiming clean;
    RadarTiming raw;
    double noise_rg_m = 0.0;
    double noise_az_m = 0.0;
    double scr_db = 0.0;
};

struct PsiTruth {
    std::string stack_id;
    std::string point_id;
    std::string target_id;  // empty for points without a counterpart
};

struct SceneTruth {
    std::vector<Target> targets;
    std::vector<TimingTruth> timings;
    std::vector<PsiTruth> psi;
    /// Shift between paired PSI clouds, keyed "A|B", meters (b = a + shift).
    std::map<std::string, Eigen::Vector3d> psi_shifts;
    std::vector<ProviderPtr> providers;
    int zone = 0;
    bool north = true;
};

struct Scene {
    SimConfig config;
    std::vector<StackGeometry> stacks;
    SceneTruth truth;
    io::RoadNetwork roads;
    std::vector<PsiPointCloud> psi_clouds;
    /// Amplitude rasters in master geometry, per stack, per epoch.
    std::map<std::string, std::vector<Grid<float>>> amplitudes;
    std::map<std::string, PixelCoord> amplitude_origin;
    /// SLC tiles, per acquisition.
    std::map<std::string, std::vector<io::RasterTile>> tiles;
    std::optional<OpticalImage> optical;
    /// Template rectangle in the optical raster: row, col, rows, cols, and
    /// the anchor inside the patch.
    std::array<double, 6> template_rect{};
    std::string correction_config;
};

Scene build_scene(const SimConfig& cfg);

/// Writes every artifact plus `manifest.json`; returns the manifest path.
std::string write_scene(const Scene& scene, const std::string& directory);

// ---------------------------------------------------------------------------
// Timing-level Monte Carlo.

/// Noisy corrected timings of `target` in every acquisition of the stacks:
/// range noise of sigma_rg (one-way meters) and along-track noise of
/// sigma_az. `bias_*` adds a constant per stack.
ObservationSet simulate_observations(const std::vector<StackGeometry>& stacks, const Ecef& target,
                                     const std::map<std::string, std::pair<double, double>>& sigma_rg_az,
                                     std::mt19937_64& rng,
                                     const std::map<std::string, std::pair<double, double>>& bias_rg_az = {});

/// Circular complex Gaussian draw with E|z|^2 = power.
std::complex<double> clutter_sample(std::mt19937_64& rng, double power);

/// Hann-weighted band-limited response at `offset` pixels from the peak.
double point_response(double offset_px, double resolution_px);

/// Synthetic chip with one target at `peak` (absolute pixel) over clutter.
io::RasterTile synthesize_tile(const PixelCoord& origin, std::size_t size, const PixelCoord& peak,
                               double amplitude, double clutter_power, double res_line_px,
                               double res_sample_px, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Scoring.

struct SolvedPoint {
    std::string candidate_id;
    Ecef position = Ecef::Zero();
    std::optional<std::string> truth_id;
};

struct TruthPoint {
    std::string id;
    Ecef position = Ecef::Zero();
};

struct Score {
    std::size_t solutions = 0;
    std::size_t truths = 0;
    std::size_t matched = 0;
    double precision = 0.0;
    double recall = 0.0;
    /// East, north, up.
    Eigen::Vector3d bias = Eigen::Vector3d::Zero();
    Eigen::Vector3d rmse = Eigen::Vector3d::Zero();
    double max_error_m = 0.0;
};

/// Matches by truth id when given, otherwise greedily by distance within
/// `radius_m`.
Score score_against_truth(const std::vector<SolvedPoint>& solutions, const std::vector<TruthPoint>& truth,
                          double radius_m = 1.0);

}  // namespace sargcp::sim
