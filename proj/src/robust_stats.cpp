// SPDX-License-Identifier: Apache-2.0
#include "sargcp/robust_stats.hpp"

#include "sargcp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sargcp {

namespace {

double median_of(std::vector<double>& v) {
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double hi = *mid;
    if (n % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), mid);
    return (lo + hi) / 2.0;
}

}  // namespace

double medcouple(std::span<const double> sample) {
    if (sample.size() < 3) throw DomainError("medcouple needs at least three values");
    std::vector<double> y(sample.begin(), sample.end());
    for (double v : y)
        if (!std::isfinite(v)) throw DomainError("medcouple: non-finite value");
    std::sort(y.begin(), y.end());
    if (y.front() == y.back()) return 0.0;
    const std::size_t n = y.size();
    const double m = n % 2 == 0 ? (y[n / 2 - 1] + y[n / 2]) / 2.0 : y[(n - 1) / 2];

    std::vector<double> lower, upper;  // both ascending
    for (double v : y) {
        const double z = v - m;
        if (z <= 0.0) lower.push_back(z);
        if (z >= 0.0) upper.push_back(z);
    }
    const std::size_t ties =
        static_cast<std::size_t>(std::count(lower.begin(), lower.end(), 0.0));

    std::vector<double> h;
    h.reserve(lower.size() * upper.size());
    for (std::size_t a = 0; a < upper.size(); ++a) {
        for (std::size_t b = 0; b < lower.size(); ++b) {
            const double zj = upper[a];
            const double zi = lower[b];
            if (zj == 0.0 && zi == 0.0) {
                // Zeros are the first rows of `upper` and the last columns of
                // `lower`; kernel is +1, 0, -1 across the anti-diagonal.
                const std::size_t col = b - (lower.size() - ties);
                const std::size_t flipped = ties - 1 - col;
                h.push_back(flipped == a ? 0.0 : (flipped > a ? -1.0 : 1.0));
            } else {
                h.push_back((zj + zi) / (zj - zi));
            }
        }
    }
    return median_of(h);
}

double quantile_type7(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw DomainError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

BoxplotBounds adjusted_bounds(double q1, double q3, double mc) {
    const double iqr = q3 - q1;
    BoxplotBounds b;
    b.q1 = q1;
    b.q3 = q3;
    b.medcouple = mc;
    if (iqr == 0.0) {
        b.lower = q1;
        b.upper = q3;
        b.degenerate = true;
        return b;
    }
    b.lower = q1 - 1.5 * std::exp(-4.0 * mc) * iqr;
    b.upper = q3 + 1.5 * std::exp(3.0 * mc) * iqr;
    return b;
}

BoxplotBounds tukey_bounds(double q1, double q3) {
    const double iqr = q3 - q1;
    BoxplotBounds b;
    b.q1 = q1;
    b.q3 = q3;
    if (iqr == 0.0) {
        b.lower = q1;
        b.upper = q3;
        b.degenerate = true;
        return b;
    }
    b.lower = q1 - 1.5 * iqr;
    b.upper = q3 + 1.5 * iqr;
    return b;
}

BoxplotBounds adjusted_boxplot_bounds(std::span<const double> sample) {
    if (sample.size() < 4) throw DomainError("adjusted boxplot needs at least four values");
    std::vector<double> s(sample.begin(), sample.end());
    std::sort(s.begin(), s.end());
    const double q1 = quantile_type7(s, 0.25);
    const double q3 = quantile_type7(s, 0.75);
    return adjusted_bounds(q1, q3, medcouple(s));
}

std::string_view to_string(NoiseFlag f) {
    switch (f) {
        case NoiseFlag::Kept: return "kept";
        case NoiseFlag::BoxplotOutlier: return "boxplot_outlier";
        case NoiseFlag::Invisible: return "invisible";
    }
    return "kept";
}

NoiseFlag parse_noise_flag(std::string_view s) {
    if (s == "kept") return NoiseFlag::Kept;
    if (s == "boxplot_outlier") return NoiseFlag::BoxplotOutlier;
    if (s == "invisible") return NoiseFlag::Invisible;
    throw DomainError("unknown noise flag '" + std::string(s) + "'");
}

void NoiseSeries::validate() const {
    if (acquisition_ids.size() != sigma_phi.size())
        throw DomainError("noise series: id and value counts differ");
    if (!flags.empty() && flags.size() != sigma_phi.size())
        throw DomainError("noise series: flag and value counts differ");
    for (double v : sigma_phi)
        if (!std::isfinite(v) || v < 0.0)
            throw DomainError("noise series: values must be finite and non-negative");
}

std::size_t NoiseSeries::kept_count() const {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), NoiseFlag::Kept));
}

NoiseSeries screen_series(const NoiseSeries& series, const ScreenOptions& options) {
    series.validate();
    NoiseSeries out = series;
    out.flags.assign(series.sigma_phi.size(), NoiseFlag::Kept);
    out.short_series = series.sigma_phi.size() < 4;
    if (!out.short_series) {
        const BoxplotBounds b = adjusted_boxplot_bounds(series.sigma_phi);
        for (std::size_t i = 0; i < series.sigma_phi.size(); ++i) {
            const double v = series.sigma_phi[i];
            if (v < b.lower || v > b.upper) out.flags[i] = NoiseFlag::BoxplotOutlier;
        }
    }
    for (std::size_t i = 0; i < series.sigma_phi.size(); ++i)
        if (out.flags[i] == NoiseFlag::Kept && series.sigma_phi[i] > options.visibility_max_rad)
            out.flags[i] = NoiseFlag::Invisible;
    return out;
}

}  // namespace sargcp
