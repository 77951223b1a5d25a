// SPDX-License-Identifier: Apache-2.0
#include "sargcp/error.hpp"
#include "sargcp/robust_stats.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace sargcp;

namespace {

// Median of the pairwise kernel over all (x_i >= med, x_j <= med), with the
// sign rule for pairs that both sit on the median.
double brute_medcouple(std::vector<double> x) {
    std::sort(x.begin(), x.end(), std::greater<>());
    const std::size_t n = x.size();
    const double med = n % 2 ? x[n / 2] : (x[n / 2 - 1] + x[n / 2]) / 2.0;
    std::vector<double> upper, lower;
    for (double v : x) {
        if (v >= med) upper.push_back(v - med);
        if (v <= med) lower.push_back(v - med);
    }
    std::vector<double> h;
    for (std::size_t i = 0; i < upper.size(); ++i)
        for (std::size_t j = 0; j < lower.size(); ++j) {
            if (upper[i] == 0.0 && lower[j] == 0.0) {
                const long s = static_cast<long>(i + j + 1) - static_cast<long>(upper.size());
                h.push_back(s < 0 ? -1.0 : (s == 0 ? 0.0 : 1.0));
            } else {
                h.push_back((upper[i] + lower[j]) / (upper[i] - lower[j]));
            }
        }
    std::sort(h.begin(), h.end());
    const std::size_t m = h.size();
    return m % 2 ? h[m / 2] : (h[m / 2 - 1] + h[m / 2]) / 2.0;
}

}  // namespace

TEST(Medcouple, SymmetricIsZero) {
    const std::vector<double> x{1, 2, 3, 4, 5};
    EXPECT_EQ(medcouple(x), 0.0);
}

TEST(Medcouple, RightSkewPositive) {
    // The kernel median of {1, 2, 3, 4, 100} is exactly 0 (one far point
    // does not move it); shifting the fourth value exposes the skew.
    const std::vector<double> flat{1, 2, 3, 4, 100};
    EXPECT_EQ(medcouple(flat), 0.0);
    const std::vector<double> x{1, 2, 3, 5, 100};
    EXPECT_NEAR(medcouple(x), 1.0 / 3.0, 1e-15);
    const std::vector<double> y{1, 2, 3, 4, 5, 6, 9, 15, 40};
    EXPECT_GT(medcouple(y), 0.0);
}

TEST(Medcouple, ConstantSampleIsZero) {
    const std::vector<double> x(9, 0.3);
    EXPECT_EQ(medcouple(x), 0.0);
}

TEST(Medcouple, MatchesBruteForce) {
    std::mt19937_64 rng(50);
    for (int k = 0; k < 50; ++k) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(3, 60)(rng);
        std::vector<double> x(n);
        std::gamma_distribution<double> g(1.5, 1.0);
        for (auto& v : x) v = g(rng);
        // Rounded copies force ties, including ties at the median.
        if (k % 3 == 0)
            for (auto& v : x) v = std::round(v * 2.0) / 2.0;
        EXPECT_EQ(medcouple(x), brute_medcouple(x)) << "sample " << k;
    }
}

TEST(Medcouple, SignFlipAndAffineInvariance) {
    std::mt19937_64 rng(51);
    std::lognormal_distribution<double> ln(0.0, 0.7);
    for (int k = 0; k < 30; ++k) {
        std::vector<double> x(25), neg(25), scaled(25);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = ln(rng);
            neg[i] = -x[i];
            scaled[i] = 4.0 * x[i] + 7.0;
        }
        const double mc = medcouple(x);
        EXPECT_GE(mc, -1.0);
        EXPECT_LE(mc, 1.0);
        EXPECT_NEAR(medcouple(neg), -mc, 1e-12);
        EXPECT_NEAR(medcouple(scaled), mc, 1e-12);
    }
}

TEST(Medcouple, RejectsTinyOrNonFinite) {
    const std::vector<double> two{1, 2};
    EXPECT_THROW(medcouple(two), DomainError);
    const std::vector<double> bad{1, 2, std::nan("")};
    EXPECT_THROW(medcouple(bad), DomainError);
}

TEST(Quantile, Type7) {
    const std::vector<double> x{1, 2, 3, 4, 5};
    EXPECT_EQ(quantile_type7(x, 0.25), 2.0);
    EXPECT_EQ(quantile_type7(x, 0.75), 4.0);
    const std::vector<double> y{1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(quantile_type7(y, 0.25), 1.75);
    EXPECT_EQ(quantile_type7(y, 0.0), 1.0);
    EXPECT_EQ(quantile_type7(y, 1.0), 4.0);
}

TEST(Bounds, TukeyArithmetic) {
    const BoxplotBounds b = adjusted_bounds(2.0, 4.0, 0.0);
    EXPECT_EQ(b.lower, -1.0);
    EXPECT_EQ(b.upper, 7.0);
}

TEST(Bounds, SkewAdjustedArithmetic) {
    const BoxplotBounds b = adjusted_bounds(2.0, 4.0, 0.2);
    EXPECT_NEAR(b.lower, 2.0 - 3.0 * std::exp(-0.8), 1e-14);
    EXPECT_NEAR(b.upper, 4.0 + 3.0 * std::exp(0.6), 1e-14);
    EXPECT_NEAR(b.lower, 0.6520, 1e-4);
    EXPECT_NEAR(b.upper, 9.4664, 1e-4);
}

TEST(Bounds, ZeroMedcoupleIsBitExactTukey) {
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int k = 0; k < 500; ++k) {
        double q1 = u(rng), q3 = u(rng);
        if (q1 > q3) std::swap(q1, q3);
        const BoxplotBounds a = adjusted_bounds(q1, q3, 0.0), t = tukey_bounds(q1, q3);
        EXPECT_EQ(a.lower, t.lower);
        EXPECT_EQ(a.upper, t.upper);
    }
}

TEST(Bounds, DegenerateIqr) {
    const std::vector<double> x{1, 1, 1, 1, 1, 5};
    const BoxplotBounds b = adjusted_boxplot_bounds(x);
    EXPECT_TRUE(b.degenerate);
    EXPECT_EQ(b.lower, 1.0);
    EXPECT_EQ(b.upper, 1.0);
}

TEST(Bounds, SkewedSamplesFlagFewerThanTukey) {
    std::mt19937_64 rng(53);
    std::exponential_distribution<double> e(1.0);
    std::size_t adjusted = 0, tukey = 0;
    for (int k = 0; k < 1000; ++k) {
        std::vector<double> x(40);
        for (auto& v : x) v = e(rng);
        const BoxplotBounds a = adjusted_boxplot_bounds(x);
        const BoxplotBounds t = tukey_bounds(a.q1, a.q3);
        for (double v : x) {
            adjusted += v < a.lower || v > a.upper;
            tukey += v < t.lower || v > t.upper;
        }
    }
    EXPECT_LT(adjusted, tukey);
}

TEST(Screen, AllEqualKept) {
    NoiseSeries s;
    for (int i = 0; i < 10; ++i) {
        s.acquisition_ids.push_back("a" + std::to_string(i));
        s.sigma_phi.push_back(0.1);
    }
    const NoiseSeries out = screen_series(s);
    EXPECT_EQ(out.kept_count(), 10u);
}

TEST(Screen, GrossValueFlagged) {
    NoiseSeries s{{"a", "b", "c", "d", "e"}, {0.1, 0.12, 0.11, 0.13, 0.9}, {}, false};
    const NoiseSeries out = screen_series(s);
    EXPECT_NE(out.flags[4], NoiseFlag::Kept);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(out.flags[i], NoiseFlag::Kept);
}

TEST(Screen, ShortSeriesOnlyVisibility) {
    NoiseSeries s{{"a", "b", "c"}, {0.1, 0.2, 0.7}, {}, false};
    const NoiseSeries out = screen_series(s);
    EXPECT_TRUE(out.short_series);
    EXPECT_EQ(out.flags[2], NoiseFlag::Invisible);
    EXPECT_EQ(out.kept_count(), 2u);
}

TEST(Screen, Idempotent) {
    std::mt19937_64 rng(54);
    std::lognormal_distribution<double> ln(-2.0, 0.5);
    NoiseSeries s;
    for (int i = 0; i < 30; ++i) {
        s.acquisition_ids.push_back(std::to_string(i));
        s.sigma_phi.push_back(ln(rng));
    }
    s.sigma_phi[3] = 1.2;
    const NoiseSeries once = screen_series(s);
    const NoiseSeries twice = screen_series(once);
    EXPECT_EQ(once.flags, twice.flags);
}

TEST(Screen, FlagNamesRoundTrip) {
    for (auto f : {NoiseFlag::Kept, NoiseFlag::BoxplotOutlier, NoiseFlag::Invisible})
        EXPECT_EQ(parse_noise_flag(to_string(f)), f);
}
