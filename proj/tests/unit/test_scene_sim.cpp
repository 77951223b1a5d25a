// SPDX-License-Identifier: Apache-2.0
#include "sargcp/error.hpp"
#include "sargcp/scene_sim.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numbers>
#include <random>

using namespace sargcp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sargcp_unit_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<sim::TruthPoint> truth_grid() {
    const double d = std::numbers::pi / 180.0;
    const LocalFrame frame(geodetic_to_ecef({65.0 * d, 25.5 * d, 10.0}));
    std::vector<sim::TruthPoint> out;
    for (int i = 0; i < 6; ++i)
        out.push_back({"T" + std::to_string(i), frame.to_ecef({20.0 * i, -10.0 * i, 2.0 * i})});
    return out;
}

std::vector<sim::SolvedPoint> solved_from(const std::vector<sim::TruthPoint>& truth, double up_offset) {
    std::vector<sim::SolvedPoint> out;
    for (const auto& t : truth) {
        const LocalFrame at(t.position);
        out.push_back({"C" + t.id, at.to_ecef({0.0, 0.0, up_offset}), t.id});
    }
    return out;
}

}  // namespace

TEST(Presets, OuluHeadingsAndIncidence) {
    const sim::SimConfig cfg = sim::preset("oulu");
    ASSERT_EQ(cfg.geometries.size(), 4u);
    const std::vector<HeadingClass> expected{HeadingClass::Ascending, HeadingClass::Descending,
                                             HeadingClass::Ascending, HeadingClass::Descending};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(cfg.geometries[i].heading, expected[i]);
    EXPECT_DOUBLE_EQ(cfg.geometries[0].incidence_deg, 30.9);
    EXPECT_DOUBLE_EQ(cfg.geometries[3].incidence_deg, 53.4);
}

TEST(Presets, UnknownNameAndInvalidConfig) {
    EXPECT_THROW(sim::preset("atlantis"), DomainError);
    sim::SimConfig cfg = sim::preset("minimal");
    cfg.geometries[0].epochs = 1;
    EXPECT_THROW(cfg.validate(), DomainError);
    cfg = sim::preset("minimal");
    cfg.geometries[1].incidence_deg = 65.0;
    EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(Geometries, ReachRequestedIncidenceAndHeading) {
    sim::SimConfig cfg = sim::preset("oulu");
    std::mt19937_64 rng(1);
    const auto stacks = sim::build_geometries(cfg, rng);
    const double d = std::numbers::pi / 180.0;
    const Ecef centre = geodetic_to_ecef({cfg.latitude_deg * d, cfg.longitude_deg * d, cfg.ground_height_m});
    const LocalFrame frame(centre);
    for (const auto& s : stacks) {
        EXPECT_EQ(s.acquisitions.size(), s.spec.epochs);
        const AcquisitionGeometry& g = s.acquisitions.front().geometry;
        const RadarTiming t = radar_code(g, centre);
        const OrbitState st = g.orbit.state(t.t_az);
        const Eigen::Vector3d los = (st.position - centre).normalized();
        const double incidence = std::acos(los.dot(frame.rotation().row(2).transpose())) / d;
        EXPECT_NEAR(incidence, s.spec.incidence_deg, 0.5) << s.spec.id;
        const Eigen::Vector3d v = frame.rotation() * st.velocity;
        double heading = std::atan2(v.x(), v.y()) / d;
        if (heading < 0) heading += 360.0;
        EXPECT_NEAR(heading, s.spec.heading_deg, 1.0) << s.spec.id;
    }
}

TEST(Scene, SameSeedWritesIdenticalFiles) {
    const sim::SimConfig cfg = sim::preset("minimal", 5);
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    sim::write_scene(sim::build_scene(cfg), a.string());
    sim::write_scene(sim::build_scene(cfg), b.string());
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), a);
        ASSERT_TRUE(fs::exists(b / rel)) << rel;
        EXPECT_EQ(io::read_file(e.path().string()), io::read_file((b / rel).string())) << rel;
        ++files;
    }
    EXPECT_GT(files, 10u);
}

TEST(Scene, ZeroNoiseRawTimingsCarryOnlyErrorTerms) {
    sim::SimConfig cfg = sim::preset("minimal", 2);
    cfg.zero_noise = true;
    cfg.error_terms = false;
    const sim::Scene scene = sim::build_scene(cfg);
    ASSERT_FALSE(scene.truth.timings.empty());
    for (const auto& t : scene.truth.timings) {
        EXPECT_EQ(t.raw.t_az, t.clean.t_az);
        EXPECT_EQ(t.raw.tau_rg, t.clean.tau_rg);
    }
}

TEST(Clutter, MeanPowerMatches) {
    std::mt19937_64 rng(3);
    double sum = 0.0;
    constexpr int n = 200000;
    for (int i = 0; i < n; ++i) sum += std::norm(sim::clutter_sample(rng, 4.0));
    EXPECT_NEAR(sum / n, 4.0, 0.05);
}

TEST(Response, PeakAndSymmetry) {
    EXPECT_NEAR(sim::point_response(0.0, 1.5), 1.0, 1e-12);
    for (double x : {0.3, 1.1, 2.7}) {
        EXPECT_NEAR(sim::point_response(x, 1.5), sim::point_response(-x, 1.5), 1e-15);
        EXPECT_LT(std::abs(sim::point_response(x, 1.5)), 1.0);
    }
}

TEST(Score, PerfectSolutions) {
    const auto truth = truth_grid();
    const sim::Score s = sim::score_against_truth(solved_from(truth, 0.0), truth);
    EXPECT_EQ(s.matched, truth.size());
    EXPECT_EQ(s.precision, 1.0);
    EXPECT_EQ(s.recall, 1.0);
    EXPECT_LT(s.rmse.norm(), 1e-9);
    EXPECT_LT(s.max_error_m, 1e-9);
}

TEST(Score, HeightOffsetReportedAsBias) {
    const auto truth = truth_grid();
    const sim::Score s = sim::score_against_truth(solved_from(truth, 0.10), truth);
    EXPECT_NEAR(s.bias.z(), 0.10, 1e-6);
    EXPECT_NEAR(s.bias.x(), 0.0, 1e-6);
    EXPECT_NEAR(s.bias.y(), 0.0, 1e-6);
    EXPECT_NEAR(s.rmse.z(), 0.10, 1e-6);
}

TEST(Score, PermutationInvariant) {
    const auto truth = truth_grid();
    auto solved = solved_from(truth, 0.05);
    solved.pop_back();
    for (auto& p : solved) p.truth_id.reset();
    const sim::Score a = sim::score_against_truth(solved, truth);
    std::reverse(solved.begin(), solved.end());
    std::rotate(solved.begin(), solved.begin() + 2, solved.end());
    const sim::Score b = sim::score_against_truth(solved, truth);
    EXPECT_EQ(a.matched, b.matched);
    EXPECT_EQ(a.matched, truth.size() - 1);
    EXPECT_NEAR(a.precision, b.precision, 1e-15);
    EXPECT_NEAR(a.recall, b.recall, 1e-15);
    EXPECT_LT((a.rmse - b.rmse).norm(), 1e-12);
    EXPECT_LT((a.bias - b.bias).norm(), 1e-12);
}
