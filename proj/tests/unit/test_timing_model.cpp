// SPDX-License-Identifier: Apache-2.0
#include "sargcp/error.hpp"
#include "sargcp/scene_sim.hpp"
#include "sargcp/timing_model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace sargcp;

namespace {

struct Fixture {
    std::vector<sim::StackGeometry> stacks;
    Ecef target;
    Fixture() {
        std::mt19937_64 rng(4);
        const auto cfg = sim::preset("minimal");
        stacks = sim::build_geometries(cfg, rng);
        const double d = std::numbers::pi / 180.0;
        target = geodetic_to_ecef({cfg.latitude_deg * d, cfg.longitude_deg * d, cfg.ground_height_m});
    }
    CorrectionContext context(std::size_t stack = 0) const {
        const auto& acq = stacks.at(stack).acquisitions.front();
        return {acq.geometry, acq.acquisition_id, target, acq.epoch_days};
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

}  // namespace

TEST(Corrections, NoProvidersGiveZeros) {
    const CorrectionSet c = assemble_corrections({}, fixture().context());
    for (const TermId id : all_terms()) {
        EXPECT_EQ(c.at(id), 0.0);
        EXPECT_EQ(c.provenance(id), "zero");
    }
}

TEST(Corrections, ConstantSlantDelayConvertsWithTwoOverC) {
    const auto p = std::make_shared<ConstantProvider>(TermId::range(RangeTerm::Troposphere), 3.0,
                                                      ConstantProvider::Unit::Meters);
    const CorrectionSet c = assemble_corrections({p}, fixture().context());
    EXPECT_NEAR(c.range[static_cast<int>(RangeTerm::Troposphere)], 2.0 * 3.0 / 299792458.0, 1e-20);
    EXPECT_NEAR(c.range_total(), 2.0014e-8, 1e-12);
    EXPECT_NEAR(range_term_length(c.range_total()), 3.0, 1e-12);
}

TEST(Corrections, ZenithMappingAtBeamIncidence) {
    const ZenithMappedProvider p(TermId::range(RangeTerm::Troposphere), 1.0);
    EXPECT_NEAR(p.slant_delay_m(41.9), 1.343, 1e-3);
    EXPECT_NEAR(p.slant_delay_m(41.9), 1.0 / std::cos(41.9 * std::numbers::pi / 180.0), 1e-14);
    EXPECT_NEAR(p.slant_delay_m(0.0), 1.0, 1e-15);
}

TEST(Corrections, DuplicateProvidersRejected) {
    const auto a = std::make_shared<ConstantProvider>(TermId::range(RangeTerm::Ionosphere), 1e-9,
                                                      ConstantProvider::Unit::Seconds);
    EXPECT_THROW(assemble_corrections({a, a}, fixture().context()), DomainError);
}

TEST(Corrections, InsaneMagnitudeRejected) {
    const auto a = std::make_shared<ConstantProvider>(TermId::range(RangeTerm::Troposphere), 50.0,
                                                      ConstantProvider::Unit::Meters);
    EXPECT_THROW(assemble_corrections({a}, fixture().context()), DomainError);
}

TEST(Corrections, AzimuthLengthUsesAlongTrackSpeed) {
    const auto p = std::make_shared<ConstantProvider>(TermId::azimuth(AzimuthTerm::Geodynamics), 0.5,
                                                      ConstantProvider::Unit::Meters);
    const auto ctx = fixture().context();
    const CorrectionSet c = assemble_corrections({p}, ctx);
    EXPECT_NEAR(c.azimuth_total() * along_track_speed(ctx), 0.5, 1e-9);
    EXPECT_GT(along_track_speed(ctx), 6000.0);
    EXPECT_LT(along_track_speed(ctx), 8000.0);
}

TEST(Corrections, LinearDriftEvaluatesAtEpoch) {
    auto ctx = fixture().context();
    ctx.epoch_days = 12.0;
    const LinearDriftProvider p(TermId::range(RangeTerm::Orbit), 0.1, 0.01, 2.0);
    EXPECT_NEAR(p.evaluate(ctx), 2.0 * 0.2 / kSpeedOfLight, 1e-20);
}

TEST(Corrections, WhiteNoiseIsDeterministicPerKey) {
    const WhiteNoiseProvider p(TermId::range(RangeTerm::Feature), 0.01, 42);
    const auto ctx = fixture().context();
    EXPECT_EQ(p.evaluate(ctx), p.evaluate(ctx));
    const auto other = fixture().context(1);
    EXPECT_NE(p.evaluate(ctx), p.evaluate(other));
}

TEST(Corrections, UpwardDisplacementShortensRange) {
    const auto ctx = fixture().context();
    const DisplacementProvider up(TermId::range(RangeTerm::Geodynamics), {0.0, 0.0, 0.05});
    const double tau = up.evaluate(ctx);
    // Lifting the target brings it closer to the sensor by about h cos(incidence).
    const double expected = -2.0 * 0.05 * std::cos(ctx.geometry.incidence_deg * std::numbers::pi / 180.0) / kSpeedOfLight;
    EXPECT_LT(tau, 0.0);
    EXPECT_NEAR(tau, expected, std::abs(expected) * 0.05);
}

TEST(CorrectTiming, ArithmeticExample) {
    CorrectionSet c;
    c.range[0] = 2.0 / kSpeedOfLight;
    const RadarTiming out = correct_timing({1.0, 5.0e-3}, c);
    EXPECT_NEAR(out.tau_rg, 5.0e-3 - 6.6713e-9, 1e-13);
    EXPECT_EQ(out.t_az, 1.0);
}

TEST(CorrectTiming, ZeroSetIsIdentity) {
    const RadarTiming t{123.456, 4.5e-3};
    const CorrectionSet zero;
    EXPECT_EQ(correct_timing(t, zero).t_az, t.t_az);
    EXPECT_EQ(apply_timing_errors(t, zero).tau_rg, t.tau_rg);
}

TEST(CorrectTiming, SingleTermShifts) {
    CorrectionSet c;
    c.azimuth[1] = 2e-6;
    const RadarTiming out = apply_timing_errors({10.0, 5e-3}, c);
    EXPECT_EQ(out.t_az, 10.0 + 2e-6);
    EXPECT_EQ(out.tau_rg, 5e-3);
}

TEST(CorrectTiming, RandomSetsInvertApply) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> rg(0, 1e-8), az(0, 1e-5);
    for (int i = 0; i < 200; ++i) {
        CorrectionSet c;
        for (auto& v : c.range) v = rg(rng);
        for (auto& v : c.azimuth) v = az(rng);
        const RadarTiming t{100.0 + az(rng), 5e-3 + rg(rng)};
        const RadarTiming back = correct_timing(apply_timing_errors(t, c), c);
        EXPECT_NEAR(back.t_az, t.t_az, 1e-13);
        EXPECT_NEAR(back.tau_rg, t.tau_rg, 1e-18);
    }
}

TEST(TermKeys, RoundTrip) {
    EXPECT_EQ(all_terms().size(), kRangeTermCount + kAzimuthTermCount);
    for (const TermId id : all_terms()) EXPECT_EQ(parse_term_key(term_key(id)), id);
    EXPECT_EQ(term_key(TermId::range(RangeTerm::Troposphere)), "range.T");
    EXPECT_FALSE(parse_term_key("azimuth.T").has_value());
}

TEST(CorrectionConfig, ParsesProviders) {
    std::istringstream in("# atmosphere\nformat_version = 1\nrange.T = zenith_mapped zenith_m=2.3\n"
                          "azimuth.SD = constant seconds=1e-6\nrange.O = drift offset_m=0.1 rate_m_per_day=0.001\n");
    const auto providers = parse_correction_config(in, "cfg");
    ASSERT_EQ(providers.size(), 3u);
    EXPECT_EQ(providers[0]->term(), TermId::range(RangeTerm::Troposphere));
    const CorrectionSet c = assemble_corrections(providers, fixture().context());
    EXPECT_EQ(c.azimuth[0], 1e-6);
    EXPECT_NE(c.provenance(TermId::range(RangeTerm::Troposphere)).find("zenith_mapped"), std::string::npos);
}

TEST(CorrectionConfig, ErrorsCarryLineNumbers) {
    const auto line_of = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            parse_correction_config(in, "cfg");
        } catch (const ParseError& e) {
            EXPECT_EQ(e.unit(), ParseError::Unit::Line);
            return e.location();
        }
        return 0;
    };
    EXPECT_EQ(line_of("format_version = 1\nrange.X = zero\n"), 2u);
    EXPECT_EQ(line_of("format_version = 1\n\nrange.T = constant\n"), 3u);
    EXPECT_EQ(line_of("format_version = 2\n"), 1u);
    EXPECT_EQ(line_of("range.T = zero\n"), 1u);
    EXPECT_EQ(line_of("format_version = 1\nrange.T = teleport x=1\n"), 2u);
}
