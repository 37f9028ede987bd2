#include "hvi/nonsmooth_step.hpp"
#include "hvi/oracle_suite.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace hvi;
using hvi::testing::scalar_matrix;

namespace {

/// (A + τB) u = A u_prev + τ f without constraints.
StepProblem linear_scalar_step(double a, double b, double tau, double u_prev, double f)
{
    StepProblem sp;
    sp.K = CoerciveOperator::declared(scalar_matrix(a + tau * b), a + tau * b, a + tau * b);
    sp.tau = tau;
    sp.self_history = SparseMatrix(1, 1);
    sp.rhs = Vector::Constant(1, a * u_prev + tau * f);
    sp.M = SparseMatrix(0, 1);
    return sp;
}

StepProblem abs_scalar_step(double rhs)
{
    StepProblem sp = linear_scalar_step(1.0, 1.0, 0.5, 0.0, 0.0);
    sp.rhs = Vector::Constant(1, rhs);
    sp.M = scalar_matrix(1.0);
    sp.potentials = {LipschitzPotential::abs(1.0)};
    return sp;
}

double soft_threshold(double b, double a, double t)
{
    return std::copysign(std::max(std::abs(b) - t, 0.0), b) / a;
}

} // namespace

TEST(Prox, Examples)
{
    EXPECT_DOUBLE_EQ(prox_1d(LipschitzPotential::abs(1.0), 1.0, 0.5, 0.2), 0.0);
    EXPECT_NEAR(prox_1d(LipschitzPotential::zero(), 2.0, 1.0, 3.0), 1.5, 1e-14);
    EXPECT_NEAR(prox_1d(LipschitzPotential::smooth_quadratic(1.0), 1.0, 1.0, 4.0), 2.0, 1e-14);
}

TEST(Prox, SoftThresholdAgreesWithClosedForm)
{
    const auto j = LipschitzPotential::abs(1.0);
    for (double b = -3.0; b <= 3.0; b += 0.125) {
        for (double a : {0.5, 1.0, 3.0}) {
            EXPECT_NEAR(prox_1d(j, a, 0.7, b), soft_threshold(b, a, 0.7), 1e-13) << "a " << a << " b " << b;
        }
    }
}

TEST(Prox, SolutionSatisfiesTheScalarInclusion)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    const auto j = LipschitzPotential::nonmonotone_drop(2.0, 0.5, 0.3);
    for (int i = 0; i < 300; ++i) {
        const double tau = 0.3;
        const double a = tau * j.relaxed_monotonicity_constant() + 0.05 + std::abs(u(rng));
        const double b = u(rng);
        const double r = prox_1d(j, a, tau, b);
        const double zeta = prox_selection(j, a, tau, b, r);
        EXPECT_TRUE(j.subgrad_interval(r).contains(zeta, 1e-12));
        EXPECT_NEAR(a * r + tau * zeta, b, 1e-10 * (1.0 + std::abs(b)));
    }
}

TEST(Prox, RefusesWhenScalarSmallnessFails)
{
    const auto j = LipschitzPotential::nonmonotone_drop(2.0, 1.0, 0.5);
    EXPECT_THROW(prox_1d(j, 0.5, 1.0, 1.0), Error);
}

TEST(Prox, ScalarMapIsStrictlyIncreasingAtSmoothPoints)
{
    // g(r) = a r + τ proj_{∂j(r)}((b - a r)/τ) - b
    const auto j = LipschitzPotential::nonmonotone_drop(3.0, 0.4, 0.1);
    const double tau = 0.5;
    const double a = tau * j.relaxed_monotonicity_constant() + 1e-3;
    const double b = 2.0;
    auto g = [&](double r) { return a * r + tau * j.subgrad_interval(r).project((b - a * r) / tau) - b; };
    const double h = 1e-6;
    for (double r = -3.0; r < 3.0; r += 1e-3) {
        if (std::abs(r) < 2 * h || std::abs(r - 0.4) < 2 * h) {
            continue;
        }
        EXPECT_GT(g(r + h) - g(r), 0.0) << "r = " << r;
    }
}

TEST(SolveStep, LinearReduction)
{
    const auto sol = solve_step(linear_scalar_step(1.0, 1.0, 0.1, 1.0, 0.0));
    EXPECT_NEAR(sol.u[0], 1.0 / 1.1, 1e-14);
    EXPECT_EQ(sol.xi.size(), 0);
}

TEST(SolveStep, SoftThresholdRegion)
{
    const auto sol = solve_step(abs_scalar_step(0.2));
    EXPECT_NEAR(sol.u[0], 0.0, 1e-14);
    EXPECT_TRUE(LipschitzPotential::abs(1.0).subgrad_interval(0.0).contains(sol.xi[0]));
    // outside the region the closed form is (rhs - τ sign(rhs)) / K
    for (double rhs : {-2.0, -0.6, 0.9, 3.0}) {
        EXPECT_NEAR(solve_step(abs_scalar_step(rhs)).u[0], soft_threshold(rhs, 1.5, 0.5), 1e-12);
    }
}

TEST(SolveStep, SelectionsLieInTheSubdifferential)
{
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto oc = oracle::random_step_case(seed);
        StepSolverConfig cfg;
        cfg.tol = 1e-12;
        cfg.max_iter = 100000;
        const auto sol = solve_step(oc.problem, cfg);
        EXPECT_LE(residual(oc.problem, sol.u), 1e-12);
        const Vector r = oc.problem.M * sol.u;
        for (Eigen::Index c = 0; c < r.size(); ++c) {
            const auto& j = oc.problem.potentials[static_cast<std::size_t>(c)];
            EXPECT_TRUE(j.enlarged_subgradient(r[c], 1e-10).contains(sol.xi[c], 1e-10)) << "seed " << seed;
        }
    }
}

TEST(SolveStep, MatchesBruteForceOnRandomInstances)
{
    StepSolverConfig cfg;
    cfg.tol = 1e-13;
    cfg.max_iter = 100000;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto oc = oracle::random_step_case(seed);
        const Vector a = solve_step(oc.problem, cfg).u;
        const Vector b = brute_force_step(oc.problem, oc.box);
        EXPECT_LT((a - b).lpNorm<Eigen::Infinity>(), 1e-6) << "seed " << seed << " " << oc.kind;
        EXPECT_LE(residual(oc.problem, b), residual(oc.problem, a) + 1e-8) << "seed " << seed;
    }
}

TEST(SolveStep, UniqueAcrossInitialIterates)
{
    // 50 instances, 5 starting points each.
    std::mt19937_64 rng(99);
    StepSolverConfig cfg;
    cfg.tol = 1e-13;
    cfg.max_iter = 100000;
    for (std::uint64_t seed = 1000; seed < 1050; ++seed) {
        const auto oc = oracle::random_step_case(seed);
        std::uniform_real_distribution<double> u(oc.box[0].lo, oc.box[0].hi);
        std::vector<Vector> sols;
        for (int s = 0; s < 5; ++s) {
            Vector start(oc.problem.dim());
            for (Eigen::Index i = 0; i < start.size(); ++i) {
                start[i] = u(rng);
            }
            sols.push_back(solve_step(oc.problem, cfg, &start).u);
        }
        for (std::size_t i = 0; i < sols.size(); ++i) {
            for (std::size_t k = i + 1; k < sols.size(); ++k) {
                EXPECT_LT((sols[i] - sols[k]).norm(), 1e-8) << "seed " << seed;
            }
        }
    }
}

TEST(SolveStep, IncrementsAreNonincreasingWithoutAcceleration)
{
    // plain sweep, damping 1.
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const auto oc = oracle::random_step_case(seed);
        StepSolverConfig cfg;
        cfg.tol = 1e-12;
        cfg.max_iter = 100000;
        const auto sol = solve_step(oc.problem, cfg);
        for (std::size_t i = 2; i < sol.increments.size(); ++i) {
            EXPECT_LE(sol.increments[i], sol.increments[i - 1] * (1.0 + 1e-12) + 1e-15)
                << "seed " << seed << " iteration " << i;
        }
    }
}

TEST(SolveStep, AccelerationReachesTheSameSolution)
{
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto oc = oracle::random_step_case(seed);
        StepSolverConfig plain;
        plain.tol = 1e-13;
        plain.max_iter = 100000;
        StepSolverConfig fast = plain;
        fast.accelerate = true;
        EXPECT_LT((solve_step(oc.problem, plain).u - solve_step(oc.problem, fast).u).norm(), 1e-10);
    }
}

TEST(SolveStep, Errors)
{
    auto sp = abs_scalar_step(1.0);
    sp.tau0 = 0.4;
    try {
        solve_step(sp);
        FAIL() << "expected TauTooLarge";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TauTooLarge);
    }

    // a case that needs several sweeps at the default tolerance
    std::uint64_t seed = 3;
    while (solve_step(oracle::random_step_case(seed).problem).iterations < 5) {
        seed += 2;
    }
    const auto oc = oracle::random_step_case(seed);
    StepSolverConfig cfg;
    cfg.tol = 1e-15;
    cfg.max_iter = 1;
    try {
        solve_step(oc.problem, cfg);
        FAIL() << "expected NoConvergence";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
        EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
    }

    StepSolverConfig bad;
    bad.damping = 0.0;
    EXPECT_THROW(solve_step(sp, bad), Error);
}

TEST(Residual, Examples)
{
    const auto lin = linear_scalar_step(1.0, 1.0, 0.1, 1.0, 0.0);
    EXPECT_LE(residual(lin, Vector::Constant(1, 1.0 / 1.1)), 1e-12);

    StepProblem zero = abs_scalar_step(0.0);
    EXPECT_EQ(residual(zero, Vector::Zero(1)), 0.0);

    // Θ(δ): away from kinks the residual is |K δ|
    for (double delta : {1e-2, 1e-4, 1e-6}) {
        EXPECT_NEAR(residual(lin, Vector::Constant(1, 1.0 / 1.1 + delta)), 1.1 * delta, 1e-12);
    }
    const auto abs_step = abs_scalar_step(2.0);
    const double u_star = soft_threshold(2.0, 1.5, 0.5);
    for (double delta : {1e-2, 1e-4, 1e-6}) {
        const double r = residual(abs_step, Vector::Constant(1, u_star + delta));
        EXPECT_NEAR(r / delta, 1.5, 1e-6);
    }
}

TEST(BruteForce, LinearAndSoftThreshold)
{
    const std::vector<Interval> box{{-2.0, 2.0}};
    const auto lin = linear_scalar_step(1.0, 1.0, 0.1, 1.0, 0.0);
    EXPECT_NEAR(brute_force_step(lin, box)[0], 1.0 / 1.1, 1e-9);
    for (double rhs : {0.2, 1.7, -2.4}) {
        EXPECT_NEAR(brute_force_step(abs_scalar_step(rhs), box)[0], soft_threshold(rhs, 1.5, 0.5), 1e-9);
    }
}

TEST(BruteForce, BoundaryHitWhenTheBoxMissesTheSolution)
{
    const std::vector<Interval> box{{-0.5, 0.5}};
    try {
        brute_force_step(linear_scalar_step(1.0, 1.0, 0.1, 1.0, 0.0), box);
        FAIL() << "expected BoundaryHit";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BoundaryHit);
    }
}

TEST(OracleSuite, AprioriBallContainsTheSolution)
{
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto oc = oracle::random_step_case(seed);
        EXPECT_EQ(oc.kind, seed % 2 == 0 ? "convex" : "nonmonotone");
        StepSolverConfig cfg;
        cfg.tol = 1e-12;
        cfg.max_iter = 100000;
        EXPECT_LE(solve_step(oc.problem, cfg).u.norm(), oracle::apriori_radius(oc.problem) * (1.0 + 1e-12));
    }
}
