// SPDX-License-Identifier: Apache-2.0
#include "sargcp/detect_fusion.hpp"
#include "sargcp/error.hpp"
#include "sargcp/scene_sim.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace sargcp;

namespace {

PsiPointCloud random_cloud(const std::string& stack, std::uint64_t seed, std::size_t n = 400) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> xy(-100, 100), h(0, 30), q(0.05, 1.0), adi(0.05, 0.3);
    PsiPointCloud c{stack, 34, true, {}};
    for (std::size_t i = 0; i < n; ++i)
        c.points.push_back({stack + "_" + std::to_string(i), 450000 + xy(rng), 7200000 + xy(rng), h(rng), 0.9,
                            q(rng), adi(rng)});
    return c;
}

PsiPointCloud translated(const PsiPointCloud& a, const std::string& stack, const Eigen::Vector3d& t) {
    PsiPointCloud b = a;
    b.stack_id = stack;
    for (auto& p : b.points) {
        p.id = stack + p.id.substr(p.id.find('_'));
        p.easting += t.x();
        p.northing += t.y();
        p.height += t.z();
    }
    return b;
}

PsPair pair_at(double e, double n, double separation, double adi, const std::string& tag) {
    PsPair p;
    p.id_a = "a" + tag;
    p.id_b = "b" + tag;
    p.separation = separation;
    p.adi_max = adi;
    p.midpoint = {e, n, 10.0};
    return p;
}

}  // namespace

TEST(CoarseRegister, RecoversTranslation) {
    const PsiPointCloud a = random_cloud("A", 1);
    const Eigen::Vector3d t(3, -2, 1);
    const CoarseShift s = coarse_register(a, translated(a, "B", t), {.cell_m = 1.0, .subset_quantile = 1.0});
    ASSERT_TRUE(s.registered);
    EXPECT_LT((s.shift - t).cwiseAbs().maxCoeff(), 0.5 + 1e-9);
}

TEST(CoarseRegister, IdenticalCloudsZeroShift) {
    const PsiPointCloud a = random_cloud("A", 2);
    const CoarseShift s = coarse_register(a, translated(a, "B", Eigen::Vector3d::Zero()), {.subset_quantile = 1.0});
    ASSERT_TRUE(s.registered);
    EXPECT_LT(s.shift.norm(), 1e-9);
}

TEST(CoarseRegister, MismatchedZoneRejected) {
    const PsiPointCloud a = random_cloud("A", 3);
    PsiPointCloud b = translated(a, "B", Eigen::Vector3d::Zero());
    b.zone = 33;
    EXPECT_THROW(coarse_register(a, b), DomainError);
}

TEST(RefineAndPair, TranslatedCloneFullyPaired) {
    const PsiPointCloud a = random_cloud("A", 4, 150);
    const Eigen::Vector3d t(1.25, -0.5, 0.75);
    const PairingResult r = refine_and_pair(a, translated(a, "B", t), t);
    EXPECT_EQ(r.pairs.size(), a.points.size());
    EXPECT_LT((r.refined_shift - t).norm(), 1e-9);
    for (const auto& p : r.pairs) {
        EXPECT_LT(p.separation, 1e-9);
        EXPECT_EQ(p.index_a, p.index_b);
    }
}

TEST(RefineAndPair, DisjointSupportGivesNothing) {
    const PsiPointCloud a = random_cloud("A", 5, 100);
    const PairingResult r = refine_and_pair(a, translated(a, "B", {5000, 0, 0}), Eigen::Vector3d::Zero());
    EXPECT_TRUE(r.pairs.empty());
}

TEST(ThinPairs, KeepsSmallestSeparationPerCell) {
    const std::vector<PsPair> pairs{pair_at(1, 1, 2.0, 0.1, "x"), pair_at(3, 4, 1.0, 0.2, "y"),
                                    pair_at(25, 25, 0.5, 0.1, "z")};
    const auto kept = thin_pairs(pairs, 10.0);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_TRUE(std::any_of(kept.begin(), kept.end(), [](const PsPair& p) { return p.id_a == "ay"; }));
    EXPECT_TRUE(std::none_of(kept.begin(), kept.end(), [](const PsPair& p) { return p.id_a == "ax"; }));
}

TEST(ThinPairs, TieBrokenByAdiAndIdempotent) {
    const std::vector<PsPair> pairs{pair_at(1, 1, 1.0, 0.3, "x"), pair_at(2, 2, 1.0, 0.1, "y")};
    const auto kept = thin_pairs(pairs, 10.0);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].id_a, "ay");
    const auto again = thin_pairs(kept, 10.0);
    ASSERT_EQ(again.size(), 1u);
    EXPECT_EQ(again[0].id_a, "ay");
}

TEST(RadarCodePairs, EmptyInputEmptyOutput) {
    const PsiPointCloud a = random_cloud("A", 6, 5);
    EXPECT_TRUE(radar_code_pairs({}, a, a, {}).empty());
}

TEST(RadarCodePairs, FailingAcquisitionMarksPartial) {
    sim::SimConfig cfg = sim::preset("oulu");
    for (auto& g : cfg.geometries) g.epochs = 2;
    std::mt19937_64 rng(1);
    const auto stacks = sim::build_geometries(cfg, rng);
    std::vector<AcquisitionRef> acqs;
    for (const auto& s : stacks)
        for (std::size_t k = 0; k < s.acquisitions.size(); ++k) acqs.push_back(s.ref(k));

    const Ecef centre = geodetic_to_ecef({cfg.latitude_deg * std::numbers::pi / 180.0,
                                          cfg.longitude_deg * std::numbers::pi / 180.0, cfg.ground_height_m});
    const MapGrid m = ecef_to_map(centre, utm_zone_for(cfg.longitude_deg * std::numbers::pi / 180.0), true);
    PsiPointCloud a = random_cloud("A1", 7, 3);
    a.zone = m.zone;
    for (auto& p : a.points) {
        p.easting += m.easting - 450000;
        p.northing += m.northing - 7200000;
        p.height += m.height;
    }
    const PsiPointCloud b = translated(a, "D1", Eigen::Vector3d::Zero());
    const auto pairs = refine_and_pair(a, b, Eigen::Vector3d::Zero()).pairs;
    ASSERT_FALSE(pairs.empty());

    const std::string excluded = acqs[1].acquisition_id;
    const PixelPredictor predict = [&](const AcquisitionRef& acq, const Ecef& p) {
        if (acq.acquisition_id == excluded) throw DomainError("not imaged");
        return nominal_pixel(acq, p);
    };
    const auto full = radar_code_pairs(pairs, a, b, acqs);
    const auto partial = radar_code_pairs(pairs, a, b, acqs, predict);
    ASSERT_EQ(partial.size(), pairs.size());
    EXPECT_FALSE(full[0].partial);
    EXPECT_TRUE(partial[0].partial);
    EXPECT_EQ(partial[0].pixels.size() + 1, full[0].pixels.size());
}

TEST(PsiTable, RoundTrip) {
    const PsiPointCloud a = random_cloud("A", 8, 20);
    const PsiPointCloud back = psi_cloud_from_table(psi_cloud_to_table(a));
    EXPECT_EQ(back.stack_id, a.stack_id);
    EXPECT_EQ(back.zone, a.zone);
    ASSERT_EQ(back.points.size(), a.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        EXPECT_EQ(back.points[i].id, a.points[i].id);
        EXPECT_EQ(back.points[i].xyz(), a.points[i].xyz());
        EXPECT_EQ(back.points[i].height_precision, a.points[i].height_precision);
    }
}
