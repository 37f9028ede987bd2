#include "hvi/abstract_hvi.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace hvi {

namespace {

constexpr double kSymmetryTolerance = 1e-12;

Vector start_vector(Eigen::Index n)
{
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = 1.0 + 0.5 * std::sin(1.3 * static_cast<double>(i) + 0.7);
    }
    return x;
}

// Dominant eigenvalue of an operator that is self-adjoint and positive
// semidefinite with respect to `inner`; returns the Rayleigh quotient.
template <class Apply, class Inner>
double power_iteration(Eigen::Index n, const Apply& apply, const Inner& inner, int max_iter, double tol)
{
    Vector x = start_vector(n);
    x /= std::sqrt(inner(x, x));
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const Vector y = apply(x);
        const double rq = inner(x, y);
        const double ny = std::sqrt(std::max(inner(y, y), 0.0));
        if (ny == 0.0) {
            return 0.0;
        }
        x = y / ny;
        if (it > 0 && std::abs(rq - lambda) <= tol * std::abs(rq)) {
            return rq;
        }
        lambda = rq;
    }
    return lambda;
}

bool positive_definite(const SparseMatrix& matrix)
{
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(matrix);
    if (ldlt.info() != Eigen::Success) {
        return false;
    }
    return (ldlt.vectorD().array() > 0.0).all();
}

double largest_singular_value_dense(const DenseMatrix& a)
{
    if (a.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<DenseMatrix> svd(a);
    return svd.singularValues()(0);
}

} // namespace

// ---------------------------------------------------------------- SpaceNorms

SpaceNorms::SpaceNorms(SparseMatrix gram, Vector weights) : gram_(std::move(gram)), weights_(std::move(weights))
{
    if (gram_.rows() != gram_.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "Gram matrix must be square");
    }
    if (weights_.size() > 0 && !(weights_.array() > 0.0).all()) {
        throw Error(ErrorCode::InvalidArgument, "constraint weights must be positive");
    }
    if (gram_.rows() > 0) {
        gram_solver_ = std::make_shared<const LinearSolver>(gram_);
    }
}

double SpaceNorms::state_inner(const Vector& a, const Vector& b) const
{
    return euclidean_state() ? a.dot(b) : a.dot(gram_ * b);
}

double SpaceNorms::state_norm(const Vector& v) const
{
    return std::sqrt(std::max(state_inner(v, v), 0.0));
}

double SpaceNorms::dual_norm(const Vector& y) const
{
    return euclidean_state() ? y.norm() : std::sqrt(std::max(y.dot(gram_solver_->solve(y)), 0.0));
}

double SpaceNorms::constraint_norm(const Vector& r) const
{
    if (weights_.size() == 0) {
        return r.norm();
    }
    return std::sqrt((weights_.array() * r.array().square()).sum());
}

Vector SpaceNorms::apply_gram(const Vector& v) const
{
    return euclidean_state() ? v : Vector(gram_ * v);
}

Vector SpaceNorms::solve_gram(const Vector& y) const
{
    return euclidean_state() ? y : gram_solver_->solve(y);
}

// ---------------------------------------------------------- norm estimation

double estimate_coercivity(const SparseMatrix& matrix, const SparseMatrix& gram)
{
    const Eigen::Index n = matrix.rows();
    if (n < 1 || matrix.cols() != n) {
        throw Error(ErrorCode::DimensionMismatch, "estimate_coercivity needs a nonempty square matrix");
    }
    if (relative_asymmetry(matrix) > kSymmetryTolerance) {
        throw Error(ErrorCode::InvalidArgument, "estimate_coercivity needs a symmetric matrix");
    }
    const bool euclidean = gram.rows() == 0;
    if (!euclidean && gram.rows() != n) {
        throw Error(ErrorCode::DimensionMismatch, "Gram matrix size does not match");
    }
    if (!positive_definite(matrix)) {
        throw Error(ErrorCode::NonCoercive, "matrix has a non-positive pivot");
    }

    const LinearSolver solver(matrix);
    std::unique_ptr<LinearSolver> gram_solver;
    if (!euclidean) {
        gram_solver = std::make_unique<LinearSolver>(gram);
    }
    auto G = [&](const Vector& v) -> Vector { return euclidean ? v : Vector(gram * v); };
    auto Ginv = [&](const Vector& v) -> Vector { return euclidean ? v : gram_solver->solve(v); };

    Vector x = start_vector(n);
    x /= std::sqrt(x.dot(G(x)));
    double theta = 0.0;
    double rnorm = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 2000; ++it) {
        Vector y = solver.solve(G(x));
        x = y / std::sqrt(y.dot(G(y)));
        const Vector ax = matrix * x;
        theta = x.dot(ax);
        const Vector r = ax - theta * G(x);
        rnorm = std::sqrt(std::max(r.dot(Ginv(r)), 0.0));
        if (rnorm <= 1e-14 * std::abs(theta)) {
            break;
        }
    }
    const double bound = theta - rnorm;
    if (!(bound > 1e-12)) {
        throw Error(ErrorCode::NonCoercive, "smallest eigenvalue bound " + std::to_string(bound) + " <= 1e-12");
    }
    // Sylvester inertia: A - sG positive definite certifies λ_min > s.
    const double shift = bound * (1.0 - 1e-10);
    const SparseMatrix shifted = euclidean ? SparseMatrix(matrix - shift * sparse_identity(n))
                                           : SparseMatrix(matrix - shift * gram);
    if (!positive_definite(shifted)) {
        throw Error(ErrorCode::NonCoercive, "inverse iteration did not isolate the smallest eigenvalue");
    }
    return bound;
}

double estimate_largest_eigenvalue(const SparseMatrix& matrix, const SpaceNorms& norms)
{
    const Eigen::Index n = matrix.rows();
    if (n == 0) {
        return 0.0;
    }
    return power_iteration(
        n, [&](const Vector& x) { return norms.solve_gram(matrix * x); },
        [&](const Vector& a, const Vector& b) { return norms.state_inner(a, b); }, 5000, 1e-10);
}

double measure_coupling_norm(const SparseMatrix& M, const SpaceNorms& norms, int max_iter)
{
    const Eigen::Index m = M.rows();
    if (m == 0 || M.nonZeros() == 0) {
        return 0.0;
    }
    Vector sw(m);
    for (Eigen::Index c = 0; c < m; ++c) {
        sw[c] = std::sqrt(norms.weight(c));
    }
    if (m <= 1000) {
        const SparseMatrix Mt = M.transpose();
        DenseMatrix S(m, m);
        for (Eigen::Index c = 0; c < m; ++c) {
            const Vector col = Vector(Mt.col(c)) * sw[c];
            S.col(c) = (M * norms.solve_gram(col)).cwiseProduct(sw);
        }
        S = 0.5 * (S + S.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(S, Eigen::EigenvaluesOnly);
        return std::sqrt(std::max(eig.eigenvalues().maxCoeff(), 0.0));
    }
    const Vector w = sw.cwiseProduct(sw);
    const double lambda = power_iteration(
        M.cols(),
        [&](const Vector& x) {
            const Vector mx = (M * x).cwiseProduct(w);
            return norms.solve_gram(M.transpose() * mx);
        },
        [&](const Vector& a, const Vector& b) { return norms.state_inner(a, b); }, max_iter, 1e-10);
    return std::sqrt(std::max(lambda, 0.0));
}

double measure_dual_map_norm(const SparseMatrix& Q, const SpaceNorms& norms, int max_iter)
{
    if (Q.nonZeros() == 0) {
        return 0.0;
    }
    if (norms.euclidean_state() && Q.rows() <= 400) {
        return largest_singular_value_dense(DenseMatrix(Q));
    }
    const double lambda = power_iteration(
        Q.cols(),
        [&](const Vector& x) { return norms.solve_gram(Q.transpose() * norms.solve_gram(Q * x)); },
        [&](const Vector& a, const Vector& b) { return norms.state_inner(a, b); }, max_iter, 1e-10);
    return std::sqrt(std::max(lambda, 0.0));
}

double measure_dual_endomorphism_norm(const SparseMatrix& E, const SpaceNorms& norms, int max_iter)
{
    if (E.nonZeros() == 0) {
        return 0.0;
    }
    if (norms.euclidean_state() && E.rows() <= 400) {
        return largest_singular_value_dense(DenseMatrix(E));
    }
    const double lambda = power_iteration(
        E.cols(),
        [&](const Vector& x) { return norms.apply_gram(E.transpose() * norms.solve_gram(E * x)); },
        [&](const Vector& a, const Vector& b) { return a.dot(norms.solve_gram(b)); }, max_iter, 1e-10);
    return std::sqrt(std::max(lambda, 0.0));
}

// -------------------------------------------------------- CoerciveOperator

CoerciveOperator CoerciveOperator::declared(SparseMatrix matrix, double coercivity, double bound,
                                            bool require_symmetric)
{
    if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
        throw Error(ErrorCode::DimensionMismatch, "operator matrix must be square and nonempty");
    }
    if (!(coercivity > 0.0)) {
        throw Error(ErrorCode::NonCoercive, "declared coercivity must be positive");
    }
    if (!(bound >= coercivity)) {
        throw Error(ErrorCode::InvalidArgument, "declared bound must not be below the coercivity");
    }
    const bool symmetric = relative_asymmetry(matrix) <= kSymmetryTolerance;
    if (require_symmetric && !symmetric) {
        throw Error(ErrorCode::InvalidArgument, "operator matrix is not symmetric");
    }
    CoerciveOperator op;
    op.matrix = std::move(matrix);
    op.coercivity = coercivity;
    op.bound = bound;
    op.symmetric = symmetric;
    return op;
}

CoerciveOperator CoerciveOperator::measured(SparseMatrix matrix, const SpaceNorms& norms)
{
    const double m = estimate_coercivity(matrix, norms.gram());
    const double b = std::max(estimate_largest_eigenvalue(matrix, norms), m);
    return declared(std::move(matrix), m, b);
}

bool CoerciveOperator::verify(const SpaceNorms& norms, double slack) const
{
    try {
        const double certified = estimate_coercivity(matrix, norms.gram());
        return coercivity <= certified + slack * std::max(1.0, std::abs(certified));
    } catch (const Error&) {
        return false;
    }
}

// ------------------------------------------------------------ HistoryKernel

std::array<double, 2> gauss2_nodes(double a, double b)
{
    const double mid = 0.5 * (a + b);
    const double d = 0.5 * (b - a) / std::sqrt(3.0);
    return {mid - d, mid + d};
}

Vector average_load(const std::function<Vector(double)>& f, double a, double b)
{
    const auto s = gauss2_nodes(a, b);
    return 0.5 * (f(s[0]) + f(s[1]));
}

KernelTerm KernelTerm::general(std::function<double(double, double)> phi, SparseMatrix Q)
{
    KernelTerm term;
    term.weight = std::move(phi);
    term.matrix = std::move(Q);
    return term;
}

KernelTerm KernelTerm::convolution(std::function<double(double)> psi, SparseMatrix Q)
{
    KernelTerm term;
    term.lag_weight = std::move(psi);
    term.matrix = std::move(Q);
    return term;
}

double KernelTerm::step_integral(int n, int j, double tau) const
{
    if (lag_weight) {
        const double a = static_cast<double>(n - j) * tau;
        const auto s = gauss2_nodes(a, a + tau);
        return 0.5 * tau * (lag_weight(s[0]) + lag_weight(s[1]));
    }
    const double t = static_cast<double>(n) * tau;
    const double a = static_cast<double>(j - 1) * tau;
    const auto s = gauss2_nodes(a, a + tau);
    return 0.5 * tau * (weight(t, s[0]) + weight(t, s[1]));
}

HistoryKernel HistoryKernel::none(Eigen::Index n, double horizon)
{
    HistoryKernel k;
    k.E = sparse_identity(n);
    k.alpha = Vector::Zero(n);
    k.horizon = horizon;
    k.c_E = 1.0;
    return k;
}

SparseMatrix HistoryKernel::evaluate(double t, double s) const
{
    SparseMatrix q(E.cols(), E.cols());
    for (const auto& term : terms) {
        q += term.at(t, s) * term.matrix;
    }
    return q;
}

namespace {

Vector alpha_or_zero(const HistoryKernel& kernel)
{
    return kernel.alpha.size() == 0 ? Vector(Vector::Zero(kernel.E.cols())) : kernel.alpha;
}

} // namespace

Vector apply_history(const HistoryKernel& kernel, const StateFunction& u, double t)
{
    const double slack = 1e-12 * std::max(1.0, kernel.horizon);
    if (!(t >= -slack && t <= kernel.horizon + slack)) {
        throw Error(ErrorCode::TimeOutOfRange,
                    "t = " + std::to_string(t) + " outside [0, " + std::to_string(kernel.horizon) + "]");
    }
    Vector w = alpha_or_zero(kernel);
    if (t > 0.0 && !kernel.terms.empty()) {
        const int pieces = std::max(1, kernel.quadrature_subdivisions);
        const double h = t / pieces;
        std::vector<Vector> acc(kernel.terms.size(), Vector::Zero(w.size()));
        for (int i = 0; i < pieces; ++i) {
            const auto s = gauss2_nodes(i * h, (i + 1) * h);
            for (double si : s) {
                const Vector us = u(si);
                for (std::size_t m = 0; m < kernel.terms.size(); ++m) {
                    acc[m] += (0.5 * h * kernel.terms[m].at(t, si)) * us;
                }
            }
        }
        for (std::size_t m = 0; m < kernel.terms.size(); ++m) {
            w += kernel.terms[m].matrix * acc[m];
        }
    }
    return kernel.E * w;
}

Vector history_memory(const HistoryKernel& kernel, std::span<const Vector> traj, int n, double tau, int last)
{
    if (last < 0 || last > static_cast<int>(traj.size()) || last > n) {
        throw Error(ErrorCode::IndexOutOfRange, "history index " + std::to_string(last) + " out of range");
    }
    if (!(tau > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "tau must be positive");
    }
    Vector w = alpha_or_zero(kernel);
    for (const auto& term : kernel.terms) {
        Vector acc = Vector::Zero(w.size());
        for (int j = 1; j <= last; ++j) {
            acc += term.step_integral(n, j, tau) * traj[static_cast<std::size_t>(j - 1)];
        }
        w += term.matrix * acc;
    }
    return w;
}

Vector history_discrete(const HistoryKernel& kernel, std::span<const Vector> traj, int n, double tau)
{
    if (n < 1 || n > static_cast<int>(traj.size())) {
        throw Error(ErrorCode::IndexOutOfRange, "step index " + std::to_string(n) + " out of range");
    }
    return kernel.E * history_memory(kernel, traj, n, tau, n);
}

// -------------------------------------------------------------- AbstractHVI

void AbstractHVI::check_consistency() const
{
    const Eigen::Index n = dim();
    auto fail = [](const std::string& what) { throw Error(ErrorCode::DimensionMismatch, what); };
    if (n == 0) {
        fail("empty state space");
    }
    if (B.matrix.rows() != n || B.matrix.cols() != n) {
        fail("B does not match the size of A");
    }
    if (kernel.E.rows() != n || kernel.E.cols() != n) {
        fail("E does not match the state dimension");
    }
    for (const auto& term : kernel.terms) {
        if (term.matrix.rows() != n || term.matrix.cols() != n) {
            fail("kernel term does not match the state dimension");
        }
    }
    if (kernel.alpha.size() != 0 && kernel.alpha.size() != n) {
        fail("alpha does not match the state dimension");
    }
    if (M.cols() != n) {
        fail("M does not act on the state space");
    }
    if (static_cast<Eigen::Index>(potentials.size()) != M.rows()) {
        fail("need one potential per constraint component");
    }
    if (u0.size() != n) {
        fail("u0 does not match the state dimension");
    }
    if (!load) {
        fail("missing load");
    }
    if (load(0.0).size() != n) {
        fail("load does not match the state dimension");
    }
    if (!norms.euclidean_state() && norms.gram().rows() != n) {
        fail("Gram matrix does not match the state dimension");
    }
    if (norms.weights().size() != 0 && norms.weights().size() != M.rows()) {
        fail("constraint weights do not match M");
    }
    if (!(T > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "horizon T must be positive");
    }
}

double AbstractHVI::max_relaxed_monotonicity() const
{
    double m = 0.0;
    for (const auto& j : potentials) {
        m = std::max(m, j.relaxed_monotonicity_constant());
    }
    return m;
}

AbstractHVI prepare(AbstractHVI p)
{
    p.check_consistency();
    if (std::isnan(p.coupling_norm)) {
        p.coupling_norm = measure_coupling_norm(p.M, p.norms);
    }
    return p;
}

double coupling_norm_of(const AbstractHVI& p)
{
    return std::isnan(p.coupling_norm) ? measure_coupling_norm(p.M, p.norms) : p.coupling_norm;
}

// ---------------------------------------------------------- validation

bool HypothesisReport::all_hold() const
{
    return std::all_of(margins.begin(), margins.end(), [](const HypothesisMargin& m) { return m.holds; });
}

const HypothesisMargin* HypothesisReport::find(const std::string& name) const
{
    for (const auto& m : margins) {
        if (m.name == name) {
            return &m;
        }
    }
    return nullptr;
}

HypothesisReport validate_hypotheses(const AbstractHVI& p, const ValidationOptions& options)
{
    p.check_consistency();
    HypothesisReport report;
    const double audit_tol = 1e-9;
    auto add = [&](std::string name, double value, double slack, bool holds, std::string detail) {
        report.margins.push_back({std::move(name), value, slack, holds, std::move(detail)});
    };

    add("H(A)", p.A.coercivity, p.A.coercivity, p.A.coercivity > 0.0 && p.A.symmetric,
        p.A.symmetric ? "coercivity m_A, symmetric" : "coercivity m_A, NOT symmetric");
    add("H(B)", p.B.coercivity, p.B.coercivity, p.B.coercivity > 0.0, "coercivity m_B");
    if (options.verify_coercivity) {
        for (const auto* op : {&p.A, &p.B}) {
            const char* name = op == &p.A ? "H(A) certified" : "H(B) certified";
            double certified = 0.0;
            try {
                certified = estimate_coercivity(op->matrix, p.norms.gram());
            } catch (const Error&) {
                certified = -std::numeric_limits<double>::infinity();
            }
            const double slack = certified - op->coercivity;
            add(name, certified, slack, slack >= -audit_tol * std::max(1.0, op->coercivity),
                "certified eigenvalue bound minus declared coercivity");
        }
    }

    const auto& kernel = p.kernel;
    const double e_norm = measure_dual_endomorphism_norm(kernel.E, p.norms, options.max_power_iterations);
    add("H(E)", e_norm, kernel.c_E - e_norm, kernel.c_E - e_norm >= -audit_tol * std::max(1.0, kernel.c_E),
        "declared c_E minus measured norm of E");

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> uni(0.0, p.T);
    double q_max = 0.0;
    double lip_max = 0.0;
    if (!kernel.memoryless()) {
        std::vector<std::pair<double, double>> pairs = {{0.0, 0.0}, {p.T, p.T}, {p.T, 0.0}};
        while (static_cast<int>(pairs.size()) < std::max(3, options.kernel_samples)) {
            double t = uni(rng);
            double s = uni(rng);
            if (s > t) {
                std::swap(s, t);
            }
            pairs.emplace_back(t, s);
        }
        // A single separable term has ‖φ(t,s) Q‖ = |φ(t,s)| ‖Q‖ exactly.
        const bool single = kernel.terms.size() == 1;
        const double q_norm =
            single ? measure_dual_map_norm(kernel.terms.front().matrix, p.norms, options.max_power_iterations) : 0.0;
        auto term_norm = [&](double t, double s) {
            return single ? std::abs(kernel.terms.front().at(t, s)) * q_norm
                          : measure_dual_map_norm(kernel.evaluate(t, s), p.norms, options.max_power_iterations);
        };
        auto diff_norm = [&](double t1, double t2, double s) {
            if (single) {
                const auto& term = kernel.terms.front();
                return std::abs(term.at(t1, s) - term.at(t2, s)) * q_norm;
            }
            const SparseMatrix diff = kernel.evaluate(t1, s) - kernel.evaluate(t2, s);
            return measure_dual_map_norm(diff, p.norms, options.max_power_iterations);
        };
        for (const auto& [t, s] : pairs) {
            q_max = std::max(q_max, term_norm(t, s));
        }
        for (int i = 0; i < std::max(2, options.kernel_samples); ++i) {
            const double s = uni(rng);
            const double t1 = s + (p.T - s) * uni(rng) / p.T;
            const double t2 = i == 0 ? s : s + (p.T - s) * uni(rng) / p.T;
            if (t1 == t2) {
                continue;
            }
            lip_max = std::max(lip_max, diff_norm(t1, t2, s) / std::abs(t1 - t2));
        }
    }
    add("H(q) bound", q_max, kernel.c_q - q_max, kernel.c_q - q_max >= -audit_tol * std::max(1.0, kernel.c_q),
        "declared c_q minus sampled sup of |q(t,s)|");
    add("H(q) Lipschitz", lip_max, kernel.L_q - lip_max,
        kernel.L_q - lip_max >= -audit_tol * std::max(1.0, kernel.L_q),
        "declared L_q minus sampled difference quotient");

    double growth_slack = std::numeric_limits<double>::infinity();
    double mono_slack = std::numeric_limits<double>::infinity();
    std::map<std::tuple<const PotentialModel*, double, double>, PotentialAudit> audited;
    for (const auto& j : p.potentials) {
        const auto key = std::make_tuple(j.model_id(), j.growth_constant(), j.relaxed_monotonicity_constant());
        auto it = audited.find(key);
        if (it == audited.end()) {
            it = audited.emplace(key, audit_potential(j, options.samples, 10.0, options.seed)).first;
        }
        growth_slack = std::min(growth_slack, it->second.growth_slack);
        mono_slack = std::min(mono_slack, it->second.monotonicity_slack);
    }
    if (p.potentials.empty()) {
        growth_slack = 0.0;
        mono_slack = 0.0;
    }
    add("H(J) growth", growth_slack, growth_slack, growth_slack >= -1e-12, "sampled c_J(1+|r|) - |subgradient|");
    add("H(J) relaxed monotonicity", mono_slack, mono_slack, mono_slack >= -1e-12,
        "sampled m_J|u-v|^2 - [j°(u;v-u) + j°(v;u-v)]");

    report.coupling_norm = coupling_norm_of(p);
    report.m_J = p.max_relaxed_monotonicity();
    add("H(M)", report.coupling_norm, report.coupling_norm, std::isfinite(report.coupling_norm),
        "measured norm of the coupling map");

    const double h0 = p.B.coercivity - report.m_J * report.coupling_norm * report.coupling_norm;
    report.h0_holds = h0 > 0.0;
    add("(H0)", h0, h0, report.h0_holds, "m_B - m_J |M|^2");

    const double cc = kernel.c_E * kernel.c_q;
    if (!report.h0_holds) {
        report.tau0 = 0.0;
    } else if (cc == 0.0) {
        report.tau0 = std::numeric_limits<double>::infinity();
    } else {
        report.tau0 = h0 / cc;
    }
    return report;
}

} // namespace hvi
