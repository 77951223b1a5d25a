// SPDX-License-Identifier: Apache-2.0
#include "sargcp/error.hpp"
#include "sargcp/pta.hpp"
#include "sargcp/scene_sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace sargcp;

namespace {

SlcChip to_chip(const io::RasterTile& tile) {
    const auto& g = std::get<Grid<std::complex<float>>>(tile.data);
    SlcChip chip{Grid<Complex>(g.rows(), g.cols()), tile.georef.origin(), 1.0};
    for (std::size_t i = 0; i < g.size(); ++i) chip.samples.values()[i] = Complex(g.values()[i]);
    return chip;
}

SlcChip point_chip(const PixelCoord& peak, double clutter_power, std::mt19937_64& rng) {
    const PixelCoord origin{std::floor(peak.line) - 16.0, std::floor(peak.sample) - 16.0};
    return to_chip(sim::synthesize_tile(origin, 32, peak, 100.0, clutter_power, 1.57, 1.5, rng));
}

}  // namespace

TEST(Oversample, ConstantStaysConstant) {
    const Grid<Complex> chip(8, 8, Complex(2.0, -1.0));
    const Grid<Complex> up = oversample_complex(chip, 4);
    ASSERT_EQ(up.rows(), 32u);
    for (const Complex& v : up.values()) EXPECT_LT(std::abs(v - Complex(2.0, -1.0)), 1e-12);
}

TEST(Oversample, SinusoidMatchesAnalyticAtSubsamples) {
    constexpr std::size_t n = 16;
    constexpr int factor = 8;
    const double kr = 3.0, kc = -5.0;
    const auto wave = [&](double r, double c) {
        return std::polar(1.0, 2.0 * std::numbers::pi * (kr * r + kc * c) / n);
    };
    Grid<Complex> chip(n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) chip(r, c) = wave(r, c);
    const Grid<Complex> up = oversample_complex(chip, factor);
    double worst = 0.0;
    for (std::size_t r = 0; r < up.rows(); ++r)
        for (std::size_t c = 0; c < up.cols(); ++c)
            worst = std::max(worst, std::abs(up(r, c) - wave(double(r) / factor, double(c) / factor)));
    EXPECT_LT(worst, 1e-8);
}

TEST(Oversample, OriginalSamplesUnchanged) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Grid<Complex> chip(16, 16);
    for (auto& v : chip.values()) v = Complex(g(rng), g(rng));
    const Grid<Complex> up = oversample_complex(chip, 4);
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 16; ++c) EXPECT_LT(std::abs(up(4 * r, 4 * c) - chip(r, c)), 1e-10);
}

TEST(RefinePeak, ExactParaboloidVertex) {
    const double r0 = 3.3, c0 = 2.8;
    Grid<double> g(7, 7);
    for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < 7; ++c) {
            const double dr = r - r0, dc = c - c0;
            g(r, c) = 10.0 - dr * dr - 0.5 * dc * dc + 0.2 * dr * dc;
        }
    const PeakEstimate p = refine_peak(g);
    EXPECT_EQ(p.status, PeakStatus::Ok);
    EXPECT_NEAR(p.row, r0, 1e-12);
    EXPECT_NEAR(p.col, c0, 1e-12);
}

TEST(RefinePeak, SymmetricPeakHasNoFraction) {
    Grid<double> g(5, 5);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 5; ++c) g(r, c) = std::exp(-(std::pow(r - 2.0, 2) + std::pow(c - 2.0, 2)));
    const PeakEstimate p = refine_peak(g);
    EXPECT_NEAR(p.row, 2.0, 1e-12);
    EXPECT_NEAR(p.col, 2.0, 1e-12);
}

TEST(RefinePeak, BorderAndFlatReported) {
    Grid<double> g(5, 5, 1.0);
    EXPECT_EQ(refine_peak(g).status, PeakStatus::Flat);
    g(0, 2) = 3.0;
    EXPECT_EQ(refine_peak(g).status, PeakStatus::BorderPeak);
}

TEST(Scr, TenDecibels) {
    const ScrEstimate s = scr_from_powers(30.0, 20.0);
    EXPECT_NEAR(s.scr, 10.0, 1e-12);
    EXPECT_NEAR(s.sigma_phi, 1.0 / std::sqrt(20.0), 1e-12);
    EXPECT_NEAR(s.sigma_phi, 0.2236, 1e-4);
}

TEST(Scr, FiftyGivesOneTenthRadian) {
    const ScrEstimate s = scr_from_powers(10.0 * std::log10(50.0), 0.0);
    EXPECT_NEAR(s.sigma_phi, 0.1, 1e-12);
}

TEST(AnalyzeChip, CleanResponseAtKnownOffset) {
    std::mt19937_64 rng(1);
    const PixelCoord peak{500.3, 800.0 - 0.2};
    const PtaResult r = analyze_chip(point_chip(peak, 0.0, rng));
    EXPECT_EQ(r.status, PeakStatus::Ok);
    EXPECT_NEAR(r.peak.line, peak.line, 5e-3);
    EXPECT_NEAR(r.peak.sample, peak.sample, 5e-3);
    // Only sidelobe energy reaches the clutter ring.
    EXPECT_LT(r.scr.sigma_phi, 1e-3);
}

TEST(AnalyzeChip, MeanScrAtOneHundredWithinTolerance) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> frac(-0.5, 0.5);
    double sum_db = 0.0;
    constexpr int trials = 200;
    for (int i = 0; i < trials; ++i) {
        const PixelCoord peak{300.0 + frac(rng), 400.0 + frac(rng)};
        const PtaResult r = analyze_chip(point_chip(peak, 100.0 * 100.0 / 100.0, rng));
        sum_db += 10.0 * std::log10(r.scr.scr);
    }
    EXPECT_NEAR(sum_db / trials, 20.0, 1.5);
}

TEST(AnalyzeChip, ChipValidation) {
    SlcChip chip{Grid<Complex>(12, 12), {}, 1.0};
    EXPECT_THROW(chip.validate(), DomainError);
    chip.samples = Grid<Complex>(16, 8);
    EXPECT_THROW(chip.validate(), DomainError);
    chip.samples = Grid<Complex>(16, 16);
    chip.samples(3, 3) = Complex(std::nan(""), 0.0);
    EXPECT_THROW(chip.validate(), DomainError);
}
