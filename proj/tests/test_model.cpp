#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace samcirt;

namespace {

const MotionKind kKinds[] = {MotionKind::general, MotionKind::rigid, MotionKind::scaling, MotionKind::translation};

struct Problem {
    ScanModel scan;
    ProjStack b;
    JointState s;
};

Problem problem(std::size_t nd, MotionKind kind, std::uint64_t seed = 1) {
    auto g = verify::gradient_problem(nd, kind, seed);
    return {g.scan, g.b, g.s};
}

} // namespace

TEST(Model, ResidualMatchesOracleComposition) {
    for (std::size_t nd : {2u, 3u}) {
        Problem pr = problem(nd, MotionKind::rigid);
        for (std::size_t i = 0; i < pr.scan.n_subscans(); ++i) {
            const ProjArray r = residual(pr.s, pr.scan, pr.b, i);
            Geometry sub = pr.scan.geometry;
            const IndexRange range = pr.scan.subscan_bounds[i];
            sub.angles.assign(sub.angles.begin() + std::ptrdiff_t(range.begin),
                              sub.angles.begin() + std::ptrdiff_t(range.end));
            const ProjArray ref = oracle::project(oracle::warp(pr.s.x, pr.s.p[i], InterpKernel::cubic), sub);
            const ProjArray bi = pr.b.subscan(i);
            for (std::size_t n = 0; n < r.size(); ++n) ASSERT_NEAR(r.data[n], ref.data[n] - bi.data[n], 1e-10);
        }
    }
}

TEST(Model, ObjectiveIsHalfSumOfSquaredDistances) {
    for (std::size_t nd : {2u, 3u}) {
        Problem pr = problem(nd, MotionKind::general);
        double sq = 0.0;
        for (std::size_t i = 0; i < pr.scan.n_subscans(); ++i) {
            const double d = projection_distance(pr.s, pr.scan, pr.b, i);
            sq += d * d;
        }
        EXPECT_LE(oracle::rel(2.0 * objective(pr.s, pr.scan, pr.b), sq), 1e-12);
    }
}

TEST(Model, GradXMatchesCentralDifferences) {
    for (std::size_t nd : {2u, 3u})
        for (MotionKind kind : kKinds) {
            Problem pr = problem(nd, kind);
            const Volume g = grad_x(pr.s, pr.scan, pr.b);
            const auto v = oracle::random_vector(g.size(), 3);
            const double h = 1e-3;
            JointState a = pr.s, b = pr.s;
            axpy(h, v, a.x.data);
            axpy(-h, v, b.x.data);
            const double fd = (objective(a, pr.scan, pr.b) - objective(b, pr.scan, pr.b)) / (2 * h);
            EXPECT_LE(oracle::rel(fd, dot(g.data, v)), 1e-6) << nd << "D " << to_string(kind);
        }
}

TEST(Model, GradPMatchesCentralDifferences) {
    for (std::size_t nd : {2u, 3u})
        for (MotionKind kind : kKinds) {
            Problem pr = problem(nd, kind);
            for (std::size_t i = 0; i < pr.scan.n_subscans(); ++i) {
                const auto g = grad_p(pr.s, pr.scan, pr.b, i);
                const double scale = norm(g);
                for (std::size_t k = 0; k < g.size(); ++k) {
                    JointState a = pr.s, b = pr.s;
                    a.p[i].raw[k] += 1e-5;
                    b.p[i].raw[k] -= 1e-5;
                    const double fd = (objective(a, pr.scan, pr.b) - objective(b, pr.scan, pr.b)) / 2e-5;
                    EXPECT_LE(std::abs(fd - g[k]) / scale, 1e-3) << nd << "D " << to_string(kind) << " i=" << i;
                }
            }
        }
}

TEST(Model, GradPDependsOnlyOnItsOwnSubscan) {
    Problem pr = problem(2, MotionKind::rigid);
    const auto before = grad_p(pr.s, pr.scan, pr.b, 0);
    pr.s.p[1].raw[0] += 0.05;
    pr.s.p[1].raw[2] -= 1.0;
    EXPECT_EQ(grad_p(pr.s, pr.scan, pr.b, 0), before);
}

TEST(Model, EvaluateAgreesWithSeparateCalls) {
    Problem pr = problem(3, MotionKind::rigid);
    const Evaluation ev = evaluate(pr.s, pr.scan, pr.b);
    EXPECT_DOUBLE_EQ(ev.objective, objective(pr.s, pr.scan, pr.b));
    EXPECT_EQ(ev.grad_x.data, grad_x(pr.s, pr.scan, pr.b).data);
    const auto g1 = grad_p(pr.s, pr.scan, pr.b, 1);
    for (std::size_t k = 0; k < g1.size(); ++k) EXPECT_EQ(ev.grad_p[g1.size() + k], g1[k]);
}

TEST(Model, ZeroAtTheTruthOnNoiselessData) {
    const Grid g = Grid::make_2d(32, 32);
    const Volume x = make_phantom({PhantomKind::ellipsoids, g, 4, 1.0, 0});
    Geometry geo;
    geo.angles = oracle::angles(10);
    geo.det_count = 48;
    ScanModel scan{geo, {{0, 5}, {5, 10}}, MotionModel{MotionKind::rigid, 2}, InterpKernel::cubic};
    MotionSchedule sch{{AffineParams::identity(scan.motion_model),
                        AffineParams{scan.motion_model, {0.1, 1.5, -2.0}}},
                       0.0};
    const ProjStack b = simulate_scan(x, scan, sch, 0);
    const JointState truth{x, sch.params};
    EXPECT_LE(objective(truth, scan, b), 1e-18 * norm2(b.data.data));
}

TEST(Model, RejectsMismatchedInputs) {
    Problem pr = problem(2, MotionKind::rigid);
    JointState s = pr.s;
    s.p.pop_back();
    EXPECT_THROW(objective(s, pr.scan, pr.b), Error);
    EXPECT_THROW(residual(pr.s, pr.scan, pr.b, 2), Error);
    s = pr.s;
    s.p[0] = AffineParams::identity(MotionModel{MotionKind::translation, 2});
    EXPECT_THROW(grad_x(s, pr.scan, pr.b), Error);
}

TEST(Model, RegisterAffineRecoversScaling) {
    const Grid g = Grid::make_2d(48, 48);
    const Volume x1 = make_phantom({PhantomKind::gaussian_blobs, g, 5, 0.0, 8});
    const MotionModel m{MotionKind::scaling, 2};
    const Volume x2 = warp_apply(x1, AffineParams{m, {0.96, 1.07}}, InterpKernel::cubic);
    const RegistrationResult r = register_affine(x1, x2, m);
    EXPECT_NEAR(r.params.raw[0], 0.96, 1e-3);
    EXPECT_NEAR(r.params.raw[1], 1.07, 1e-3);
    EXPECT_LE(r.final_objective, r.initial_objective);
    EXPECT_EQ(r.objectives.size(), 101u);
}

TEST(Model, RegisterAffineRecoversRigidMotion) {
    const Grid g = Grid::make_2d(48, 48);
    const Volume x1 = make_phantom({PhantomKind::gaussian_blobs, g, 6, 1.0, 8});
    const MotionModel m{MotionKind::rigid, 2};
    const AffineParams truth{m, {0.05, 1.2, -0.8}};
    const Volume x2 = warp_apply(x1, truth, InterpKernel::cubic);
    const RegistrationResult r = register_affine(x1, x2, m);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(r.params.raw[k], truth.raw[k], 1e-2);
}
