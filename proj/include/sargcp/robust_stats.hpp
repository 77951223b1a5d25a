// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sargcp {

/// Robust skewness of a sample, in [-1, 1]. Ties at the median use the
/// sign kernel. A sample with every value identical has medcouple 0.
/// Throws DomainError for fewer than three values or non-finite input.
double medcouple(std::span<const double> sample);

/// Quantile by linear interpolation of order statistics (type 7).
/// `sorted` must be ascending and non-empty.
double quantile_type7(std::span<const double> sorted, double p);

struct BoxplotBounds {
    double lower = 0.0;
    double upper = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double medcouple = 0.0;
    /// Zero interquartile range; bounds collapse to [q1, q3].
    bool degenerate = false;
};

/// [q1 - 1.5 exp(-4 mc) iqr, q3 + 1.5 exp(3 mc) iqr].
BoxplotBounds adjusted_bounds(double q1, double q3, double mc);
/// [q1 - 1.5 iqr, q3 + 1.5 iqr].
BoxplotBounds tukey_bounds(double q1, double q3);

/// Skewness-adjusted boxplot fences of a sample of at least four values.
BoxplotBounds adjusted_boxplot_bounds(std::span<const double> sample);

/// Name of the quartile convention, echoed in stage metadata.
inline constexpr std::string_view kQuartileConvention = "type7-linear";

enum class NoiseFlag { Kept, BoxplotOutlier, Invisible };

std::string_view to_string(NoiseFlag f);
NoiseFlag parse_noise_flag(std::string_view s);

/// Phase-noise time series of one candidate.
struct NoiseSeries {
    std::vector<std::string> acquisition_ids;
    std::vector<double> sigma_phi;  // radians
    std::vector<NoiseFlag> flags;
    bool short_series = false;

    /// Sizes agree and every value is finite and non-negative.
    void validate() const;
    std::size_t kept_count() const;
};

struct ScreenOptions {
    double visibility_max_rad = 0.5;
};

/// Boxplot stage on all values, then the visibility cut on the survivors.
/// Flags are recomputed from the values alone, so screening is idempotent.
NoiseSeries screen_series(const NoiseSeries& series, const ScreenOptions& options = {});

}  // namespace sargcp
