#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace samcirt;

TEST(Partition, WorkedInstance) {
    const std::vector<double> s{0.95, 0.94, 0.30, 0.96};
    const SubscanPlan plan = partition_exact(s, 100.0);
    ASSERT_EQ(plan.segments.size(), 3u);
    EXPECT_EQ(plan.segments[0], (IndexRange{0, 2}));
    EXPECT_EQ(plan.segments[1], (IndexRange{2, 3}));
    EXPECT_EQ(plan.segments[2], (IndexRange{3, 4}));
    EXPECT_NEAR(plan.objective_value, 3.0025, 1e-12);
}

TEST(Partition, ConstantSignalIsOneSegment) {
    const std::vector<double> s(9, 0.9);
    const SubscanPlan plan = partition_exact(s, 1000.0);
    ASSERT_EQ(plan.segments.size(), 1u);
    EXPECT_EQ(plan.objective_value, 1.0);
}

TEST(Partition, ExactMatchesBruteForceAndRecursionOracle) {
    random::Stream rng(2024, 0);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + std::size_t(rng.uniform() * 12.0);
        std::vector<double> s(n);
        const int style = t % 3;
        for (double& v : s) {
            if (style == 0) v = rng.uniform();
            else if (style == 1) v = rng.uniform() < 0.75 ? 0.95 : 0.3;
            else v = std::round(rng.uniform() * 4.0) / 4.0;
        }
        for (double lambda : {1.5, 10.0, 100.0}) {
            const SubscanPlan a = partition_exact(s, lambda);
            const SubscanPlan b = partition_bruteforce(s, lambda);
            ASSERT_EQ(a.objective_value, b.objective_value) << "t=" << t << " lambda=" << lambda;
            ASSERT_EQ(a.segments, b.segments) << "t=" << t << " lambda=" << lambda;
            ASSERT_NEAR(a.objective_value, oracle::best_partition_objective(s, lambda), 1e-12);
        }
    }
}

TEST(Partition, LambdaAtMostOneGivesSingleSegment) {
    random::Stream rng(7, 1);
    for (int t = 0; t < 500; ++t) {
        const std::size_t n = 1 + std::size_t(rng.uniform() * 40.0);
        std::vector<double> s(n);
        for (double& v : s) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
        EXPECT_EQ(partition_exact(s, rng.uniform(1e-3, 1.0)).n_segments(), 1u);
    }
    const std::vector<double> s{1.0, 0.0};
    EXPECT_EQ(partition_exact(s, 1.0).n_segments(), 1u);
}

TEST(Partition, NoImprovingMergeOrSplit) {
    random::Stream rng(9, 2);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> s(15);
        for (double& v : s) v = rng.uniform() < 0.8 ? 0.9 + 0.05 * rng.uniform() : 0.2 * rng.uniform();
        const double lambda = 50.0;
        const SubscanPlan plan = partition_exact(s, lambda);
        for (std::size_t k = 0; k + 1 < plan.segments.size(); ++k) {
            auto merged = plan.segments;
            merged[k].end = merged[k + 1].end;
            merged.erase(merged.begin() + std::ptrdiff_t(k + 1));
            EXPECT_GE(plan_objective(s, merged, lambda), plan.objective_value - 1e-12);
        }
        for (std::size_t k = 0; k < plan.segments.size(); ++k)
            for (std::size_t cut = plan.segments[k].begin + 1; cut < plan.segments[k].end; ++cut) {
                auto split = plan.segments;
                split.insert(split.begin() + std::ptrdiff_t(k + 1), IndexRange{cut, split[k].end});
                split[k].end = cut;
                EXPECT_GE(plan_objective(s, split, lambda), plan.objective_value - 1e-12);
            }
    }
}

TEST(Partition, SegmentVariancesInUnitInterval) {
    random::Stream rng(11, 3);
    std::vector<double> s(30);
    for (double& v : s) v = rng.uniform();
    const SubscanPlan plan = partition_exact(s, 10.0);
    for (const auto& r : plan.segments) {
        const double v = segment_variance(s, r);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Partition, EpsilonConstraintIsRespected) {
    const std::vector<double> s{0.95, 0.90, 0.80, 0.96, 0.97};
    const SubscanPlan plan = partition_exact(s, 1.5, 0.06);
    for (const auto& r : plan.segments) {
        const auto [lo, hi] = std::minmax_element(s.begin() + std::ptrdiff_t(r.begin), s.begin() + std::ptrdiff_t(r.end));
        EXPECT_LT(*hi - *lo, 0.06);
    }
    const SubscanPlan brute = partition_bruteforce(s, 1.5, 0.06);
    EXPECT_EQ(plan.segments, brute.segments);
}

TEST(Partition, PlanToSubscansConvention) {
    SubscanPlan one;
    one.s = {0.9, 0.9, 0.9};
    one.segments = {{0, 3}};
    EXPECT_EQ(plan_to_subscans(one), (std::vector<IndexRange>{{0, 4}}));

    SubscanPlan three;
    three.s = {0.95, 0.94, 0.30, 0.96};
    three.segments = {{0, 2}, {2, 3}, {3, 4}};
    EXPECT_EQ(plan_to_subscans(three), (std::vector<IndexRange>{{0, 3}, {3, 4}, {4, 5}}));

    SubscanPlan six;
    six.s.assign(12, 0.9);
    six.segments = {{0, 2}, {2, 4}, {4, 6}, {6, 8}, {8, 10}, {10, 12}};
    const auto subs = plan_to_subscans(six);
    EXPECT_EQ(subs.size(), 6u);
    EXPECT_TRUE(ranges_partition(subs, 13));
}

TEST(Partition, RejectsBadInput) {
    EXPECT_THROW(partition_exact(std::vector<double>{}, 10.0), Error);
    EXPECT_THROW(partition_exact(std::vector<double>{0.5, 1.5}, 10.0), Error);
    EXPECT_THROW(partition_exact(std::vector<double>{0.5}, 0.0), Error);
    EXPECT_THROW(partition_bruteforce(std::vector<double>(21, 0.5), 10.0), Error);
}

TEST(Ssim, MatchesExplicitWindowOracle) {
    const std::size_t rows = 13, cols = 17;
    const auto a = oracle::random_vector(rows * cols, 1);
    auto b = a;
    const auto noise = oracle::random_vector(rows * cols, 2);
    axpy(0.3, noise, b);
    for (double range : {1.0, 2.5}) {
        const SsimParams prm{1.5, 0.01, 0.03, range};
        EXPECT_NEAR(ssim_pair(a, b, rows, cols, prm), oracle::ssim(a, b, rows, cols, 1.5, 0.01, 0.03, range), 1e-12);
    }
    EXPECT_EQ(SsimParams{}.radius(), 5);
}

TEST(Ssim, IdenticalImagesScoreOne) {
    const auto a = oracle::random_vector(64, 3);
    EXPECT_NEAR(ssim_pair(a, a, 8, 8, SsimParams{}), 1.0, 1e-12);
}

TEST(Ssim, AdjacentScoresLieInUnitInterval) {
    ProjArray p(6, 4, 20);
    p.data = oracle::random_vector(p.size(), 4);
    for (std::size_t n = p.size() / 2; n < p.size(); ++n) p.data[n] = -p.data[n];
    const auto s = adjacent_ssim(p);
    ASSERT_EQ(s.size(), 5u);
    for (double v : s) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Ssim, MotionEventLowersAdjacentScore) {
    const Grid g = Grid::make_2d(48, 48);
    const Volume x = make_phantom({PhantomKind::shepp_logan, g, 0, 1.0, 0});
    Geometry geo;
    geo.angles = std::vector<double>(8, 0.0);
    for (std::size_t k = 0; k < 8; ++k) geo.angles[k] = 0.01 * double(k);
    geo.det_count = 64;
    ScanModel scan{geo, {{0, 4}, {4, 8}}, MotionModel{MotionKind::translation, 2}, InterpKernel::cubic};
    MotionSchedule sch{{AffineParams::identity(scan.motion_model), AffineParams{scan.motion_model, {4.0, 0.0}}}, 0.0};
    const ProjStack b = simulate_scan(x, scan, sch, 0);
    const auto s = adjacent_ssim(b.data);
    const auto lowest = std::min_element(s.begin(), s.end()) - s.begin();
    EXPECT_EQ(lowest, 3);
    const SubscanPlan plan = partition_exact(s, 100.0);
    const auto subs = plan_to_subscans(plan);
    EXPECT_EQ(subs.front().end, 4u);
}
