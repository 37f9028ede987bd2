#include "hvi/nonsmooth_step.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace hvi {

namespace {

double kink_eps(double tolerance, double r)
{
    return tolerance < 0.0 ? default_kink_tolerance(r) : tolerance;
}

// Minimizes ‖g + B ξ‖ over the box ξ_c ∈ I_c by cyclic coordinate descent.
// One sweep is exact when the columns of B are orthogonal (nodal coupling).
template <class ColumnDot, class ColumnAxpy>
void box_least_squares(Vector& res, Vector& xi, const std::vector<Interval>& box, const Vector& col_norm2,
                       const ColumnDot& dot, const ColumnAxpy& axpy)
{
    const auto m = static_cast<Eigen::Index>(box.size());
    for (Eigen::Index c = 0; c < m; ++c) {
        const double start = box[static_cast<std::size_t>(c)].project(0.0);
        if (start != 0.0) {
            axpy(c, start, res);
        }
        xi[c] = start;
    }
    for (int sweep = 0; sweep < 200; ++sweep) {
        double change = 0.0;
        for (Eigen::Index c = 0; c < m; ++c) {
            if (col_norm2[c] == 0.0) {
                continue;
            }
            const double target = xi[c] - dot(c, res) / col_norm2[c];
            const double next = box[static_cast<std::size_t>(c)].project(target);
            const double d = next - xi[c];
            if (d != 0.0) {
                axpy(c, d, res);
                xi[c] = next;
                change = std::max(change, std::abs(d) * std::sqrt(col_norm2[c]));
            }
        }
        if (change <= 1e-16 * (1.0 + res.norm())) {
            break;
        }
    }
}

double residual_impl(const SparseMatrix& L, const Vector& rhs, const SparseMatrix& M, const SparseMatrix& Mt,
                     const StepProblem& sp, const Vector& u, Vector& xi, double tolerance)
{
    Vector res = L * u - rhs;
    const Eigen::Index m = M.rows();
    const Vector r = M * u;
    std::vector<Interval> box(static_cast<std::size_t>(m));
    Vector col_norm2(m);
    for (Eigen::Index c = 0; c < m; ++c) {
        const auto& j = sp.potentials[static_cast<std::size_t>(c)];
        box[static_cast<std::size_t>(c)] =
            j.is_zero() ? Interval{0.0, 0.0} : j.enlarged_subgradient(r[c], kink_eps(tolerance, r[c]));
        const double scale = sp.tau * sp.weight(c);
        col_norm2[c] = scale * scale * Mt.col(c).squaredNorm();
    }
    xi.setZero(m);
    box_least_squares(
        res, xi, box, col_norm2,
        [&](Eigen::Index c, const Vector& v) { return sp.tau * sp.weight(c) * Mt.col(c).dot(v); },
        [&](Eigen::Index c, double d, Vector& v) { v += (d * sp.tau * sp.weight(c)) * Mt.col(c); });
    return res.norm();
}

} // namespace

// ---------------------------------------------------------------- problem

SparseMatrix StepProblem::system_matrix() const
{
    if (self_history.rows() == 0 || self_history.nonZeros() == 0) {
        return K.matrix;
    }
    return K.matrix + self_history;
}

void StepProblem::check_consistency() const
{
    const Eigen::Index n = dim();
    auto fail = [](const std::string& what) { throw Error(ErrorCode::DimensionMismatch, what); };
    if (n == 0 || K.matrix.cols() != n) {
        fail("K must be square and nonempty");
    }
    if (self_history.rows() != 0 && (self_history.rows() != n || self_history.cols() != n)) {
        fail("self history does not match K");
    }
    if (rhs.size() != n) {
        fail("rhs does not match K");
    }
    if (M.cols() != n) {
        fail("M does not act on the state space");
    }
    if (static_cast<Eigen::Index>(potentials.size()) != M.rows()) {
        fail("need one potential per constraint component");
    }
    if (weights.size() != 0 && weights.size() != M.rows()) {
        fail("weights do not match M");
    }
    if (!(tau > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "tau must be positive");
    }
}

void StepSolverConfig::check() const
{
    if (!(tol > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "solver tolerance must be positive");
    }
    if (max_iter < 1) {
        throw Error(ErrorCode::InvalidArgument, "max_iter must be at least 1");
    }
    if (!(damping > 0.0 && damping <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "damping must lie in (0, 1]");
    }
}

double residual(const StepProblem& sp, const Vector& u, Vector& xi, double kink_tolerance)
{
    sp.check_consistency();
    if (u.size() != sp.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "state vector does not match the step problem");
    }
    const SparseMatrix Mt = sp.M.transpose();
    return residual_impl(sp.system_matrix(), sp.rhs, sp.M, Mt, sp, u, xi, kink_tolerance);
}

double residual(const StepProblem& sp, const Vector& u, double kink_tolerance)
{
    Vector xi;
    return residual(sp, u, xi, kink_tolerance);
}

// ------------------------------------------------------------------ prox

double prox_1d(const LipschitzPotential& j, double a, double tau, double b)
{
    if (!(a > 0.0) || !(tau > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "prox_1d needs a > 0 and tau > 0");
    }
    if (!(a - tau * j.relaxed_monotonicity_constant() > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "prox_1d needs a - tau m_J > 0");
    }
    if (j.is_zero()) {
        return b / a;
    }
    // g(r) = a r + τ ∂j(r) - b is a strictly increasing set-valued map.
    auto g = [&](double r) {
        const Interval z = j.subgrad_interval(r);
        return Interval{a * r + tau * z.lo - b, a * r + tau * z.hi - b};
    };

    double left = -std::numeric_limits<double>::infinity();
    double right = std::numeric_limits<double>::infinity();
    for (double bp : j.breakpoints()) {
        const Interval v = g(bp);
        if (v.contains(0.0)) {
            return bp;
        }
        if (v.hi < 0.0) {
            left = std::max(left, bp);
        } else {
            right = std::min(right, bp);
        }
    }

    if (!std::isfinite(left) || !std::isfinite(right)) {
        const double c = j.growth_constant();
        double R = 0.0;
        if (a > tau * c) {
            R = (std::abs(b) + tau * c) / (a - tau * c);
            R = R * (1.0 + 1e-12) + 1e-300;
        } else {
            R = std::max(1.0, std::abs(b) / a);
        }
        bool bracketed = false;
        for (int k = 0; k < 200 && !bracketed; ++k) {
            const double lo = std::isfinite(left) ? left : -R;
            const double hi = std::isfinite(right) ? right : R;
            const Interval gl = g(lo);
            const Interval gh = g(hi);
            if (gl.contains(0.0)) {
                return lo;
            }
            if (gh.contains(0.0)) {
                return hi;
            }
            if (gl.hi < 0.0 && gh.lo > 0.0) {
                left = lo;
                right = hi;
                bracketed = true;
            } else {
                R *= 2.0;
            }
        }
        if (!bracketed) {
            throw Error(ErrorCode::BracketFailure, "no sign change of a r + tau dj(r) - b found");
        }
    }

    if (const auto piece = j.affine_derivative(0.5 * (left + right))) {
        const double r = (b - tau * piece->offset) / (a + tau * piece->slope);
        if (r >= left && r <= right) {
            return r;
        }
    }

    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (left + right);
        if (mid <= left || mid >= right) {
            break;
        }
        const Interval v = g(mid);
        if (v.contains(0.0)) {
            return mid;
        }
        if (v.hi < 0.0) {
            left = mid;
        } else {
            right = mid;
        }
    }
    return 0.5 * (left + right);
}

double prox_selection(const LipschitzPotential& j, double a, double tau, double b, double r)
{
    return j.subgrad_interval(r).project((b - a * r) / tau);
}

// ---------------------------------------------------------- step operator

StepOperator::StepOperator(const StepProblem& sp, const StepSolverConfig& cfg) : sp_(sp)
{
    sp_.check_consistency();
    cfg.check();
    L_ = sp_.system_matrix();
    Mt_ = sp_.M.transpose();
    solver_ = LinearSolver(L_, cfg.linear);
    symmetric_ = solver_.method() == LinearSolver::Method::SymmetricDirect ||
                 solver_.method() == LinearSolver::Method::SymmetricIterative;

    for (Eigen::Index c = 0; c < sp_.M.rows(); ++c) {
        if (!sp_.potentials[static_cast<std::size_t>(c)].is_zero() && Mt_.col(c).nonZeros() > 0 &&
            Mt_.col(c).squaredNorm() > 0.0) {
            active_.push_back(c);
        }
    }
    const auto na = static_cast<Eigen::Index>(active_.size());
    if (na == 0) {
        return;
    }

    std::vector<Triplet> trips;
    wa_.resize(na);
    ma_.resize(na);
    for (Eigen::Index a = 0; a < na; ++a) {
        const Eigen::Index c = active_[static_cast<std::size_t>(a)];
        for (SparseMatrix::InnerIterator it(Mt_, c); it; ++it) {
            trips.emplace_back(a, it.row(), it.value());
        }
        wa_[a] = sp_.weight(c);
        ma_[a] = sp_.potentials[static_cast<std::size_t>(c)].relaxed_monotonicity_constant();
    }
    Ma_.resize(na, sp_.dim());
    Ma_.setFromTriplets(trips.begin(), trips.end());
    const SparseMatrix Mat = Ma_.transpose();

    G_.resize(na, na);
    for (Eigen::Index a = 0; a < na; ++a) {
        G_.col(a) = Ma_ * solver_.solve(Vector(Mat.col(a)));
    }
    if (symmetric_) {
        G_ = (0.5 * (G_ + G_.transpose())).eval();
    }
    // W^{1/2} G W^{1/2} is singular exactly when the active rows are dependent
    const Vector sw = wa_.cwiseSqrt();
    const DenseMatrix S = sw.asDiagonal() * G_ * sw.asDiagonal();
    const Vector eigs = Eigen::SelfAdjointEigenSolver<DenseMatrix>(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly)
                            .eigenvalues();
    const double smax = eigs.maxCoeff();
    Eigen::FullPivLU<DenseMatrix> lu(S);
    lu.setThreshold(1e-10);
    if (lu.rank() < na) {
        // K̃ = L − τ Maᵀ W m Ma keeps the smooth part monotone once τ W m r is moved into the proxes
        const SparseMatrix shift = Mat * (wa_.cwiseProduct(ma_)).asDiagonal() * Ma_;
        const SparseMatrix Kt = L_ - sp_.tau * shift;
        mu_ = estimate_coercivity(SparseMatrix(0.5 * (SparseMatrix(Kt.transpose()) + Kt)));
        if (!(mu_ > 0.0)) {
            throw Error(ErrorCode::NonCoercive, "step operator is not strongly monotone (smallness condition fails)");
        }
        double smin = smax;
        for (Eigen::Index i = 0; i < eigs.size(); ++i) {
            if (eigs[i] > 1e-10 * smax) {
                smin = std::min(smin, eigs[i]);
            }
        }
        split_ = true;
        penalty_ = sp_.tau * ma_.maxCoeff() + 1.0 / std::sqrt(smin * smax);
        const Vector added = wa_.cwiseProduct(Vector::Constant(na, penalty_) - sp_.tau * ma_);
        split_solver_ = LinearSolver(SparseMatrix(L_ + Mat * added.asDiagonal() * Ma_), cfg.linear);
        contraction_ = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    if (symmetric_) {
        P_ = Eigen::LLT<DenseMatrix>(G_).solve(DenseMatrix::Identity(na, na));
        P_ = (0.5 * (P_ + P_.transpose())).eval();
    } else {
        P_ = Eigen::FullPivLU<DenseMatrix>(G_).inverse();
    }

    const Vector isw = wa_.cwiseSqrt().cwiseInverse();
    DenseMatrix T = isw.asDiagonal() * P_ * isw.asDiagonal();
    T.diagonal() -= sp_.tau * ma_;
    if (symmetric_) {
        Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(0.5 * (T + T.transpose()), Eigen::EigenvaluesOnly);
        mu_ = eig.eigenvalues().minCoeff();
        lip_ = eig.eigenvalues().maxCoeff();
    } else {
        Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(0.5 * (T + T.transpose()), Eigen::EigenvaluesOnly);
        mu_ = eig.eigenvalues().minCoeff();
        Eigen::JacobiSVD<DenseMatrix> svd(T);
        lip_ = svd.singularValues()(0);
    }
    if (!(mu_ > 0.0)) {
        throw Error(ErrorCode::NonCoercive,
                    "step operator is not strongly monotone on the contact space (smallness condition fails)");
    }
    if (symmetric_) {
        omega_ = cfg.accelerate ? lip_ : 0.5 * (mu_ + lip_);
        contraction_ = (lip_ - mu_) / (lip_ + mu_);
        const double kappa = lip_ / mu_;
        momentum_ = cfg.accelerate ? (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0) : 0.0;
    } else {
        omega_ = lip_ * lip_ / mu_;
        contraction_ = std::sqrt(std::max(0.0, 1.0 - (mu_ * mu_) / (lip_ * lip_)));
        momentum_ = 0.0;
    }
}

StepSolution StepOperator::solve(const Vector& rhs, const StepSolverConfig& cfg, const Vector* initial) const
{
    cfg.check();
    if (rhs.size() != sp_.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "rhs does not match the step operator");
    }
    StepSolution sol;
    const Vector u_hat = solver_.solve(rhs);
    const auto na = static_cast<Eigen::Index>(active_.size());

    auto finish = [&](Vector u) {
        Vector xi;
        sol.residual = residual_impl(L_, rhs, sp_.M, Mt_, sp_, u, xi, -1.0);
        sol.u = std::move(u);
        sol.xi = std::move(xi);
        if (!(sol.residual <= cfg.tol)) {
            throw Error(ErrorCode::NoConvergence, "step residual " + std::to_string(sol.residual) +
                                                      " above tolerance after " + std::to_string(sol.iterations) +
                                                      " iterations");
        }
        return sol;
    };

    if (na == 0) {
        return finish(u_hat);
    }

    if (split_) {
        return solve_split(rhs, cfg, initial);
    }

    const Vector r_hat = Ma_ * u_hat;
    const Vector P_r_hat = P_ * r_hat;
    const double tau = sp_.tau;
    const double theta = cfg.damping;
    const SparseMatrix Mat = Ma_.transpose();

    Vector r = initial ? Vector(Ma_ * *initial) : r_hat;
    if (initial && initial->size() != sp_.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "initial iterate does not match the step problem");
    }
    Vector y = r;
    Vector zeta(na);
    Vector rho(na);
    double bound = std::numeric_limits<double>::infinity();

    for (int it = 0; it < cfg.max_iter; ++it) {
        // forward step on the smooth part, evaluated at y
        const Vector grad = (P_ * y - P_r_hat).cwiseQuotient(wa_) - tau * ma_.cwiseProduct(y);
        const Vector z = y - grad / omega_;
        for (Eigen::Index a = 0; a < na; ++a) {
            const auto& j = sp_.potentials[static_cast<std::size_t>(active_[static_cast<std::size_t>(a)])];
            const double aa = omega_ + tau * ma_[a];
            const double bb = omega_ * z[a];
            rho[a] = prox_1d(j, aa, tau, bb);
            zeta[a] = prox_selection(j, aa, tau, bb, rho[a]);
        }
        const Vector r_next = (1.0 - theta) * y + theta * rho;
        sol.increments.push_back(std::sqrt((wa_.array() * (r_next - r).array().square()).sum()));
        sol.iterations = it + 1;

        // residual bound at u = L⁻¹(rhs - τ Maᵀ W ζ), whose trace is r̂ - τ G W ζ
        const Vector wz = wa_.cwiseProduct(zeta);
        const Vector trace = r_hat - tau * (G_ * wz);
        Vector dxi(na);
        for (Eigen::Index a = 0; a < na; ++a) {
            const auto& j = sp_.potentials[static_cast<std::size_t>(active_[static_cast<std::size_t>(a)])];
            const Interval iv = j.enlarged_subgradient(trace[a], default_kink_tolerance(trace[a]));
            dxi[a] = iv.project(zeta[a]) - zeta[a];
        }
        bound = tau * (Mat * wa_.cwiseProduct(dxi)).norm();
        if (bound <= 0.5 * cfg.tol) {
            sol.u = solver_.solve(Vector(rhs - tau * (Mat * wz)));
            return finish(sol.u);
        }

        // adaptive restart: drop the momentum when the step opposes the last move
        const bool restart = momentum_ > 0.0 && (wa_.array() * (y - r_next).array() * (r_next - r).array()).sum() > 0.0;
        y = restart ? r_next : Vector(r_next + momentum_ * (r_next - r));
        r = r_next;
    }
    const Vector wz = wa_.cwiseProduct(zeta);
    Vector u = solver_.solve(Vector(rhs - tau * (Mat * wz)));
    Vector xi;
    const double res = residual_impl(L_, rhs, sp_.M, Mt_, sp_, u, xi, -1.0);
    throw Error(ErrorCode::NoConvergence, "no convergence after " + std::to_string(cfg.max_iter) +
                                              " iterations, last residual " + std::to_string(res));
}

// Scaled ADMM on min f̃(u) + g̃(r) s.t. Ma u = r in the W-metric, with
// f̃ = ½ uᵀL̃u − rhs·u, L̃ = L − τ MaᵀWmMa and g̃ = τ Σ w (j + m r²/2).
// Both parts are monotone under (H0), and the recorded increments
// ‖(Δr, Δy)‖_W are nonincreasing. Damping and acceleration do not apply.
StepSolution StepOperator::solve_split(const Vector& rhs, const StepSolverConfig& cfg, const Vector* initial) const
{
    if (initial && initial->size() != sp_.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "initial iterate does not match the step problem");
    }
    StepSolution sol;
    const auto na = static_cast<Eigen::Index>(active_.size());
    const double tau = sp_.tau;
    const double rho_pen = penalty_;
    const SparseMatrix Mat = Ma_.transpose();
    const Vector r_hat = Ma_ * solver_.solve(rhs);

    Vector r = initial ? Vector(Ma_ * *initial) : r_hat;
    Vector y = Vector::Zero(na);
    Vector zeta = Vector::Zero(na);
    Vector u;
    for (int it = 0; it < cfg.max_iter; ++it) {
        u = split_solver_.solve(Vector(rhs + rho_pen * (Mat * wa_.cwiseProduct(r - y))));
        const Vector v = Ma_ * u + y;
        Vector r_next(na);
        for (Eigen::Index a = 0; a < na; ++a) {
            const auto& j = sp_.potentials[static_cast<std::size_t>(active_[static_cast<std::size_t>(a)])];
            const double aa = rho_pen + tau * ma_[a];
            r_next[a] = prox_1d(j, aa, tau, rho_pen * v[a]);
            zeta[a] = prox_selection(j, aa, tau, rho_pen * v[a], r_next[a]);
        }
        const Vector y_next = v - r_next;
        sol.increments.push_back(
            std::sqrt((wa_.array() * ((r_next - r).array().square() + (y_next - y).array().square())).sum()));
        sol.iterations = it + 1;
        r = r_next;
        y = y_next;

        const Vector wz = wa_.cwiseProduct(zeta);
        const Vector trace = r_hat - tau * (G_ * wz);
        Vector dxi(na);
        for (Eigen::Index a = 0; a < na; ++a) {
            const auto& j = sp_.potentials[static_cast<std::size_t>(active_[static_cast<std::size_t>(a)])];
            const Interval iv = j.enlarged_subgradient(trace[a], default_kink_tolerance(trace[a]));
            dxi[a] = iv.project(zeta[a]) - zeta[a];
        }
        if (tau * (Mat * wa_.cwiseProduct(dxi)).norm() <= 0.5 * cfg.tol) {
            u = solver_.solve(Vector(rhs - tau * (Mat * wz)));
            Vector xi;
            sol.residual = residual_impl(L_, rhs, sp_.M, Mt_, sp_, u, xi, -1.0);
            sol.u = std::move(u);
            sol.xi = std::move(xi);
            if (sol.residual <= cfg.tol) {
                return sol;
            }
        }
    }
    Vector xi;
    const double res = residual_impl(L_, rhs, sp_.M, Mt_, sp_, solver_.solve(Vector(rhs - tau * (Mat * wa_.cwiseProduct(zeta)))), xi, -1.0);
    throw Error(ErrorCode::NoConvergence, "no convergence after " + std::to_string(cfg.max_iter) +
                                              " iterations, last residual " + std::to_string(res));
}

StepSolution solve_step(const StepProblem& sp, const StepSolverConfig& cfg, const Vector* initial)
{
    cfg.check();
    if (sp.tau >= sp.tau0) {
        throw Error(ErrorCode::TauTooLarge,
                    "tau = " + std::to_string(sp.tau) + " is not below tau0 = " + std::to_string(sp.tau0));
    }
    const StepOperator op(sp, cfg);
    return op.solve(sp.rhs, cfg, initial);
}

// ------------------------------------------------------------ brute force

Vector brute_force_step(const StepProblem& sp, std::span<const Interval> box, const BruteForceConfig& cfg)
{
    sp.check_consistency();
    const Eigen::Index n = sp.dim();
    if (n < 1 || n > 3) {
        throw Error(ErrorCode::InvalidArgument, "brute_force_step supports 1 to 3 unknowns");
    }
    if (static_cast<Eigen::Index>(box.size()) != n) {
        throw Error(ErrorCode::DimensionMismatch, "box does not match the state dimension");
    }
    if (cfg.grid < 3 || cfg.zoom <= 1.0) {
        throw Error(ErrorCode::InvalidArgument, "brute force needs grid >= 3 and zoom > 1");
    }

    const DenseMatrix L = DenseMatrix(sp.system_matrix());
    const DenseMatrix M = DenseMatrix(sp.M);
    const Eigen::Index m = M.rows();
    DenseMatrix B(n, m);
    for (Eigen::Index c = 0; c < m; ++c) {
        B.col(c) = sp.tau * sp.weight(c) * M.row(c).transpose();
    }
    const Vector col_norm2 = B.colwise().squaredNorm().transpose();
    std::vector<Interval> ivs(static_cast<std::size_t>(m));
    Vector xi(m);

    auto eval = [&](const Vector& u, double eps) {
        Vector res = L * u - sp.rhs;
        const Vector r = M * u;
        for (Eigen::Index c = 0; c < m; ++c) {
            const auto& j = sp.potentials[static_cast<std::size_t>(c)];
            ivs[static_cast<std::size_t>(c)] = j.is_zero() ? Interval{0.0, 0.0} : j.enlarged_subgradient(r[c], eps);
        }
        box_least_squares(
            res, xi, ivs, col_norm2, [&](Eigen::Index c, const Vector& v) { return B.col(c).dot(v); },
            [&](Eigen::Index c, double d, Vector& v) { v += d * B.col(c); });
        return res.norm();
    };

    Vector lo(n);
    Vector step(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        lo[i] = box[static_cast<std::size_t>(i)].lo;
        step[i] = (box[static_cast<std::size_t>(i)].hi - lo[i]) / (cfg.grid - 1);
    }
    const int g = cfg.grid;
    long total = 1;
    for (Eigen::Index i = 0; i < n; ++i) {
        total *= g;
    }

    Vector best(n);
    std::vector<int> best_idx(static_cast<std::size_t>(n), 0);
    for (int pass = 0; pass <= cfg.refinements; ++pass) {
        const double eps = step.maxCoeff();
        double best_val = std::numeric_limits<double>::infinity();
        Vector u(n);
        for (long flat = 0; flat < total; ++flat) {
            long rest = flat;
            std::vector<int> idx(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                idx[static_cast<std::size_t>(i)] = static_cast<int>(rest % g);
                rest /= g;
                u[i] = lo[i] + idx[static_cast<std::size_t>(i)] * step[i];
            }
            const double v = eval(u, eps);
            if (v < best_val) {
                best_val = v;
                best = u;
                best_idx = idx;
            }
        }
        if (pass == 0) {
            for (int k : best_idx) {
                if (k == 0 || k == g - 1) {
                    throw Error(ErrorCode::BoundaryHit, "grid minimizer lies on the box boundary");
                }
            }
        }
        const double shrink = static_cast<double>(g - 1) / cfg.zoom;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double half = 0.5 * shrink * step[i];
            lo[i] = best[i] - half;
            step[i] = 2.0 * half / (g - 1);
        }
    }

    // Grid points miss a kink by the final spacing, where the exact residual
    // jumps. Try the nearest points on nearby breakpoint sets instead.
    const double reach = (g - 1) * cfg.zoom * step.maxCoeff();
    const Vector r = M * best;
    std::vector<std::pair<Eigen::Index, double>> near;
    for (Eigen::Index c = 0; c < m; ++c) {
        for (double bp : sp.potentials[static_cast<std::size_t>(c)].breakpoints()) {
            if (std::abs(r[c] - bp) <= reach) {
                near.emplace_back(c, bp);
            }
        }
    }
    Vector snapped = best;
    double snapped_res = residual(sp, best);
    const auto count = static_cast<unsigned>(near.size());
    for (unsigned mask = 1; count < 16 && mask < (1u << count); ++mask) {
        std::vector<std::pair<Eigen::Index, double>> pick;
        for (unsigned i = 0; i < count; ++i) {
            if (mask & (1u << i)) {
                pick.push_back(near[i]);
            }
        }
        const auto k = static_cast<Eigen::Index>(pick.size());
        DenseMatrix Ms(k, n);
        Vector target(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            Ms.row(i) = M.row(pick[static_cast<std::size_t>(i)].first);
            target[i] = pick[static_cast<std::size_t>(i)].second - r[pick[static_cast<std::size_t>(i)].first];
        }
        const Vector d = Ms.completeOrthogonalDecomposition().solve(target);
        if (!((Ms * d - target).norm() <= 1e-12 * (1.0 + target.norm()))) {
            continue;
        }
        const Vector cand = best + d;
        const double res = residual(sp, cand);
        if (res < snapped_res) {
            snapped_res = res;
            snapped = cand;
        }
    }
    return snapped;
}

} // namespace hvi
