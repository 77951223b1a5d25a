// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sargcp/candidate.hpp"
#include "sargcp/grid.hpp"
#include "sargcp/io_formats.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sargcp {

/// Temporal standard deviation uses the sample (n - 1) convention.
inline constexpr std::string_view kAdiConvention = "sample-n-1";

struct AdiRaster {
    Grid<float> adi;
    Grid<float> mean;
    /// 0 where the temporal mean is not positive.
    Grid<std::uint8_t> valid;
    std::size_t epochs = 0;
};

/// Throws DomainError for fewer than two rasters or mismatched shapes.
AdiRaster compute_adi(const std::vector<Grid<float>>& amplitudes);

struct RoadNode {
    std::string road_id;
    double easting = 0.0;
    double northing = 0.0;
    double height = 0.0;
};

/// Vertices plus interpolated nodes so that consecutive nodes are at most
/// `max_spacing_m` apart. Missing heights take the network default.
std::vector<RoadNode> densify(const io::RoadNetwork& net, double max_spacing_m);

struct RoadSearchOptions {
    double radius_px = 70.0;
    double adi_max = 0.25;
    /// A candidate this close to a better one (lower ADI, then brighter) is
    /// dropped.
    double suppress_px = 10.0;
};

struct StackCandidate {
    std::size_t row = 0;
    std::size_t col = 0;
    /// Absolute image position of the pixel.
    PixelCoord pixel;
    double adi = 0.0;
    double mean_amplitude = 0.0;
    /// Height of the first road node that selected the pixel.
    double road_height = 0.0;
    /// Corrected master timing of the pixel; the nominal pixel timing when
    /// unset.
    std::optional<RadarTiming> timing;
};

/// Minimum-ADI valid pixel inside the disc around every road node (ties:
/// brighter, then closer to the node), moved uphill on the mean amplitude
/// to its local maximum and kept when that pixel's ADI is at or below the
/// threshold. Non-maximum suppression then removes sidelobe picks. `origin` is the image position of the
/// raster's element (0, 0); nodes carry absolute image positions.
std::vector<StackCandidate> search_candidates(const AdiRaster& adi, const PixelCoord& origin,
                                              const std::vector<PixelCoord>& node_pixels,
                                              const std::vector<double>& node_heights,
                                              const RoadSearchOptions& options = {});

struct StackDetections {
    std::string stack_id;
    std::shared_ptr<const AcquisitionGeometry> master;
    std::vector<StackCandidate> candidates;
};

struct MatchOptions {
    double threshold_2_m = 1.5;
    double threshold_3_m = 3.0;
    double threshold_4_m = 3.0;
    double elevation_tolerance_m = 2.0;
};

/// Geocodes every candidate at its road height, links candidates of
/// different stacks by single linkage and keeps groups with exactly one
/// member per stack, all pairwise within the group-size threshold and an
/// intersection height within tolerance of the road.
std::vector<PsCandidate> match_across_geometries(const std::vector<StackDetections>& stacks,
                                                 const std::vector<AcquisitionRef>& acquisitions,
                                                 const MatchOptions& options = {},
                                                 const PixelPredictor& predict = {});

}  // namespace sargcp
