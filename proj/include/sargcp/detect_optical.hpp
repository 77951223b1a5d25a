// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sargcp/candidate.hpp"
#include "sargcp/grid.hpp"
#include "sargcp/io_formats.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace sargcp {

/// Single-band intensity raster on a map grid.
struct OpticalImage {
    Grid<float> pixels;
    io::Georef georef;

    /// Ground spacing along easting, meters per pixel.
    double spacing_m() const;
    /// Lamp poles need 0.1 m or finer.
    bool fine_enough() const { return spacing_m() <= 0.1 + 1e-12; }
};

struct Template {
    Grid<float> patch;
    /// Pixel of the pole base inside the patch.
    double anchor_row = 0.0;
    double anchor_col = 0.0;

    /// Throws DomainError for patches smaller than 3x3 or constant patches.
    void validate() const;
};

/// Cuts a template out of `image`; the anchor is relative to the patch.
Template crop_template(const OpticalImage& image, std::size_t row, std::size_t col, std::size_t rows,
                       std::size_t cols, double anchor_row, double anchor_col);

struct PreprocessOptions {
    bool negative = false;
    int median_radius = 0;
};

/// Normalisation to [0, 1], optional negative, optional median filter.
OpticalImage preprocess(const OpticalImage& image, const PreprocessOptions& options = {});

/// I + a (I - box_blur(I)).
OpticalImage high_boost(const OpticalImage& image, double a, int blur_radius = 2);

/// Normalised cross-correlation at every placement of the template's top
/// left corner; shape (rows - N1 + 1) x (cols - N2 + 1). Constant windows
/// score 0.
Grid<double> ncc_match(const Grid<float>& image, const Template& tmpl);

struct DetectedObject {
    MapGrid position;
    std::size_t members = 0;
    double mean_score = 0.0;
};

struct ClusterOptions {
    double threshold = 0.6;
    double radius_m = 1.5;
    double tolerance_m = 1e-3;
    int max_iterations = 1000;
};

/// Placements scoring above the threshold are georeferenced at the template
/// anchor and clustered by flat-kernel mean shift, each sample weighted by
/// its score.
std::vector<DetectedObject> threshold_and_cluster(const Grid<double>& score, const OpticalImage& image,
                                                  const Template& tmpl, const ClusterOptions& options = {});

/// Representative pixel (line, sample) of every 8-connected region of
/// `mean_intensity` above the given percentile, offset by `origin`.
std::vector<Eigen::Vector2d> bright_points(const Grid<float>& mean_intensity, double percentile = 99.5,
                                          const PixelCoord& origin = {});

struct IcpOptions {
    int max_iterations = 50;
    double tolerance_px2 = 1e-6;
    double gate_px = 3.0;
};

struct IcpResult {
    Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();
    double angle_rad = 0.0;
    double mse = 0.0;
    int iterations = 0;
    bool diverged = false;
    std::vector<double> mse_history;
    /// Detections after the transform, snapped onto matched bright points.
    std::vector<Eigen::Vector2d> aligned;
    /// Bright point index within the gate, if any.
    std::vector<std::optional<std::size_t>> matches;
};

/// Point-to-point rigid ICP of `detected` onto `bright`, both (line, sample).
IcpResult icp_align(const std::vector<Eigen::Vector2d>& detected, const std::vector<Eigen::Vector2d>& bright,
                    const IcpOptions& options = {});

}  // namespace sargcp
