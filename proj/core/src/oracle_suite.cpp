#include "hvi/oracle_suite.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <random>

namespace hvi::oracle {

namespace {

double symmetric_min_eigenvalue(const DenseMatrix& A)
{
    const DenseMatrix S = 0.5 * (A + A.transpose());
    return Eigen::SelfAdjointEigenSolver<DenseMatrix>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

double weighted_coupling_sq(const StepProblem& sp)
{
    const DenseMatrix M = DenseMatrix(sp.M);
    Vector w = Vector::Ones(M.rows());
    if (sp.weights.size() != 0) {
        w = sp.weights;
    }
    const DenseMatrix G = M.transpose() * w.asDiagonal() * M;
    return Eigen::SelfAdjointEigenSolver<DenseMatrix>(G, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

LipschitzPotential random_convex(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (rng() % 3) {
    case 0:
        return LipschitzPotential::zero();
    case 1:
        return LipschitzPotential::quadratic(0.5 + 4.5 * u(rng));
    default:
        return LipschitzPotential::abs(0.2 + 1.8 * u(rng));
    }
}

LipschitzPotential random_drop(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return LipschitzPotential::nonmonotone_drop(0.5 + 4.5 * u(rng), 0.2 + 0.8 * u(rng), 0.8 * u(rng));
}

} // namespace

double apriori_radius(const StepProblem& sp)
{
    const DenseMatrix A = DenseMatrix(sp.system_matrix());
    const double mu = symmetric_min_eigenvalue(A);
    double m = 0.0;
    Vector xi0 = Vector::Zero(sp.M.rows());
    for (std::size_t c = 0; c < sp.potentials.size(); ++c) {
        m = std::max(m, sp.potentials[c].relaxed_monotonicity_constant());
        xi0[static_cast<Eigen::Index>(c)] = sp.potentials[c].subgrad_interval(0.0).project(0.0);
    }
    const double margin = mu - sp.tau * m * weighted_coupling_sq(sp);
    if (!(margin > 0.0)) {
        throw Error(ErrorCode::SmallnessViolated, "step problem violates the smallness condition");
    }
    Vector wxi = xi0;
    for (Eigen::Index c = 0; c < wxi.size(); ++c) {
        wxi[c] *= sp.weight(c);
    }
    return (sp.rhs.norm() + sp.tau * (sp.M.transpose() * wxi).norm()) / margin;
}

OracleCase random_step_case(std::uint64_t seed)
{
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool nonmonotone = seed % 2 == 1;

    for (;;) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 2);
        const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 2);
        const double tau = 0.1 + 0.4 * u(rng);

        const double angle = 3.14159265358979 * u(rng);
        DenseMatrix Q(2, 2);
        Q << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
        const Eigen::Vector2d lam(0.5 + 2.5 * u(rng), 0.5 + 2.5 * u(rng));
        const DenseMatrix K2 = Q * lam.asDiagonal() * Q.transpose();
        const DenseMatrix K = K2.topLeftCorner(n, n);

        DenseMatrix Bh(n, n);
        for (Eigen::Index i = 0; i < Bh.size(); ++i) {
            Bh.data()[i] = u(rng) - 0.5;
        }
        const DenseMatrix H = tau * 0.2 * Bh.transpose() * Bh;

        DenseMatrix M(m, n);
        for (Eigen::Index i = 0; i < M.size(); ++i) {
            M.data()[i] = 2.0 * u(rng) - 1.0;
        }
        if ((M.rowwise().norm().array() < 0.1).any()) {
            continue;
        }

        StepProblem sp;
        sp.tau = tau;
        const double kmin = symmetric_min_eigenvalue(K);
        const double kmax = Eigen::SelfAdjointEigenSolver<DenseMatrix>(K).eigenvalues().maxCoeff();
        sp.K = CoerciveOperator::declared(K.sparseView(), kmin, kmax);
        sp.self_history = H.sparseView();
        sp.M = M.sparseView();
        sp.weights = Vector(m);
        for (Eigen::Index c = 0; c < m; ++c) {
            sp.weights[c] = 0.5 + u(rng);
        }
        for (Eigen::Index c = 0; c < m; ++c) {
            const bool drop = nonmonotone && (c == 0 || rng() % 2 == 0);
            sp.potentials.push_back(drop ? random_drop(rng) : random_convex(rng));
        }
        sp.rhs = Vector(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            sp.rhs[i] = 6.0 * u(rng) - 3.0;
        }

        const double mu = symmetric_min_eigenvalue(DenseMatrix(sp.system_matrix()));
        double mj = 0.0;
        for (const auto& j : sp.potentials) {
            mj = std::max(mj, j.relaxed_monotonicity_constant());
        }
        if (mu - tau * mj * weighted_coupling_sq(sp) < 0.1 * mu) {
            continue;
        }

        OracleCase oc;
        oc.seed = seed;
        oc.kind = nonmonotone ? "nonmonotone" : "convex";
        const double r = 1.5 * apriori_radius(sp) + 0.1;
        oc.box.assign(static_cast<std::size_t>(n), Interval{-r, r});
        oc.problem = std::move(sp);
        return oc;
    }
}

OracleSummary run_oracle_suite(int count, std::uint64_t seed, double tol)
{
    OracleSummary summary;
    StepSolverConfig cfg;
    cfg.tol = 1e-13;
    cfg.max_iter = 100000;
    for (int i = 0; i < count; ++i) {
        OracleResult r;
        r.seed = seed + static_cast<std::uint64_t>(i);
        try {
            const auto oc = random_step_case(r.seed);
            r.kind = oc.kind;
            const Vector a = solve_step(oc.problem, cfg).u;
            const Vector b = brute_force_step(oc.problem, oc.box);
            r.difference = (a - b).lpNorm<Eigen::Infinity>();
            r.passed = r.difference <= tol;
        } catch (const Error& e) {
            r.error = e.what();
            r.passed = false;
        }
        summary.max_difference = std::max(summary.max_difference, r.difference);
        summary.failures += r.passed ? 0 : 1;
        summary.results.push_back(std::move(r));
    }
    return summary;
}

} // namespace hvi::oracle
