#pragma once

#include "hvi/abstract_hvi.hpp"
#include "hvi/linear_solver.hpp"
#include "hvi/potential.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace hvi {

/// One implicit step: find u with
///   (K + H) u + τ Mᵀ W ξ = rhs,   ξ_c ∈ ∂j_c((Mu)_c),
/// where K = A + τB, H = τ E I_kk is the unknown's own memory contribution and
/// W holds the constraint weights (empty = ones).
struct StepProblem {
    CoerciveOperator K;
    double tau = 0.0;
    SparseMatrix self_history;
    Vector rhs;
    SparseMatrix M;
    Vector weights;
    std::vector<LipschitzPotential> potentials;
    double tau0 = std::numeric_limits<double>::infinity();

    Eigen::Index dim() const { return K.matrix.rows(); }
    /// K + H as one sparse matrix.
    SparseMatrix system_matrix() const;
    double weight(Eigen::Index c) const { return weights.size() == 0 ? 1.0 : weights[c]; }
    void check_consistency() const;
};

struct StepSolverConfig {
    double tol = 1e-10;
    int max_iter = 200;
    /// Relaxation factor in (0, 1].
    double damping = 1.0;
    /// Constant-momentum acceleration of the forward-backward sweep.
    bool accelerate = false;
    LinearSolverConfig linear;

    void check() const;
};

struct StepSolution {
    Vector u;
    Vector xi;
    int iterations = 0;
    double residual = 0.0;
    /// ‖r^{i+1} - r^i‖_W of the constraint-space iterates.
    std::vector<double> increments;
};

/// Smallest enlargement used by `residual` at kinks: 1e-12 (1 + |r|).
inline double default_kink_tolerance(double r)
{
    return 1e-12 * (1.0 + std::abs(r));
}

/// Distance from 0 to {(K + H)u + τ Mᵀ W ξ - rhs : ξ_c ∈ ∂_ε j_c((Mu)_c)} in
/// the Euclidean norm. ∂_ε is the hull of ∂j over [r - ε, r + ε]; a negative
/// `kink_tolerance` selects default_kink_tolerance per component.
double residual(const StepProblem& sp, const Vector& u, double kink_tolerance = -1.0);

/// Residual together with the minimizing selection.
double residual(const StepProblem& sp, const Vector& u, Vector& xi, double kink_tolerance = -1.0);

/// r solving a r + τ ∂j(r) ∋ b. Requires a - τ m_J > 0.
double prox_1d(const LipschitzPotential& j, double a, double tau, double b);

/// The selection ζ ∈ ∂j(r) closest to (b - a r)/τ.
double prox_selection(const LipschitzPotential& j, double a, double tau, double b, double r);

/// Factorized step operator for one (K, H, M, W, J, τ). Reusable across right
/// hand sides; immutable and safe to share after construction.
///
/// The inclusion is reduced to the constraint space: with P = (M L⁻¹ Mᵀ)⁻¹
/// the trace r = Mu satisfies P(r - r̂) + τ W ∂J(r) ∋ 0 with r̂ = M L⁻¹ rhs.
/// This is solved by forward-backward splitting in the W-metric, shifting
/// τ W m_c r_c into the scalar proxes so that the smooth part stays strongly
/// monotone exactly when (H0) holds for the step.
class StepOperator {
public:
    explicit StepOperator(const StepProblem& sp, const StepSolverConfig& cfg = {});

    StepSolution solve(const Vector& rhs, const StepSolverConfig& cfg, const Vector* initial = nullptr) const;

    /// Contraction factor of the (unaccelerated) sweep in the W-metric; NaN
    /// when the coupling rows are dependent and the split iteration is used.
    double contraction() const { return contraction_; }
    double strong_monotonicity() const { return mu_; }
    Eigen::Index active_constraints() const { return static_cast<Eigen::Index>(active_.size()); }
    const LinearSolver& linear_solver() const { return solver_; }

private:
    StepProblem sp_;
    SparseMatrix L_;
    SparseMatrix Mt_;
    LinearSolver solver_;
    std::vector<Eigen::Index> active_;
    SparseMatrix Ma_;
    Vector wa_;
    Vector ma_;
    DenseMatrix P_;
    DenseMatrix G_;
    double mu_ = 0.0;
    double lip_ = 0.0;
    double omega_ = 1.0;
    double contraction_ = 0.0;
    double momentum_ = 0.0;
    bool symmetric_ = true;
    // dependent coupling rows: ADMM on u and r = M u instead of the Schur sweep
    bool split_ = false;
    double penalty_ = 0.0;
    LinearSolver split_solver_;

    StepSolution solve_split(const Vector& rhs, const StepSolverConfig& cfg, const Vector* initial) const;
};

/// Solves one step. Throws TauTooLarge when τ >= τ₀ and NoConvergence when the
/// residual stays above cfg.tol after cfg.max_iter sweeps.
StepSolution solve_step(const StepProblem& sp, const StepSolverConfig& cfg = {}, const Vector* initial = nullptr);

struct BruteForceConfig {
    int grid = 201;
    /// Number of local re-gridding passes after the global scan.
    int refinements = 8;
    double zoom = 10.0;
};

/// Exhaustive grid minimization of `residual` over a box (state dimension <= 3),
/// followed by zoomed re-gridding around the best point. The kink enlargement
/// at each pass equals the current grid spacing. Throws BoundaryHit when the
/// global scan's minimizer lies on the box boundary.
Vector brute_force_step(const StepProblem& sp, std::span<const Interval> box, const BruteForceConfig& cfg = {});

} // namespace hvi
