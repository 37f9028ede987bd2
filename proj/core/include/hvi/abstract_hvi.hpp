#pragma once

#include "hvi/linear_solver.hpp"
#include "hvi/potential.hpp"
#include "hvi/types.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hvi {

/// Inner products of the state space V (Gram matrix G) and of the constraint
/// space X (diagonal weights W). An empty Gram means the Euclidean product;
/// empty weights mean all ones. The dual norm on V* is ‖y‖_* = sqrt(yᵀ G⁻¹ y).
class SpaceNorms {
public:
    SpaceNorms() = default;
    SpaceNorms(SparseMatrix gram, Vector weights);

    bool euclidean_state() const { return gram_.rows() == 0; }
    const SparseMatrix& gram() const { return gram_; }
    const Vector& weights() const { return weights_; }

    double state_inner(const Vector& a, const Vector& b) const;
    double state_norm(const Vector& v) const;
    double dual_norm(const Vector& y) const;
    double constraint_norm(const Vector& r) const;
    double weight(Eigen::Index c) const { return weights_.size() == 0 ? 1.0 : weights_[c]; }

    Vector apply_gram(const Vector& v) const;
    Vector solve_gram(const Vector& y) const;

private:
    SparseMatrix gram_;
    Vector weights_;
    std::shared_ptr<const LinearSolver> gram_solver_;
};

/// A symmetric coercive operator with its coercivity constant m and its bound
/// ‖·‖, both relative to the state norm of the problem it belongs to.
struct CoerciveOperator {
    SparseMatrix matrix;
    double coercivity = 0.0;
    double bound = 0.0;
    bool symmetric = true;

    /// Wraps a matrix with declared constants. Checks symmetry (when required)
    /// and positivity of the constants; does not solve eigenproblems.
    static CoerciveOperator declared(SparseMatrix matrix, double coercivity, double bound,
                                     bool require_symmetric = true);

    /// Measures both constants: coercivity by estimate_coercivity and bound by
    /// power iteration, relative to `norms`.
    static CoerciveOperator measured(SparseMatrix matrix, const SpaceNorms& norms = {});

    /// True when the declared coercivity does not exceed the certified lower
    /// bound on the smallest generalized eigenvalue (up to `slack`).
    bool verify(const SpaceNorms& norms = {}, double slack = 1e-10) const;
};

/// Certified lower bound on the smallest eigenvalue of the symmetric pencil
/// (matrix, gram) by inverse iteration and the residual bound |λ - θ| <= ‖r‖.
/// Throws NonCoercive when the bound is <= 1e-12 or the factorization shows
/// a non-positive pivot.
double estimate_coercivity(const SparseMatrix& matrix, const SparseMatrix& gram = {});

/// Largest eigenvalue of a symmetric pencil (power iteration, Rayleigh quotient).
double estimate_largest_eigenvalue(const SparseMatrix& matrix, const SpaceNorms& norms = {});

/// sup ‖Mv‖_X / ‖v‖_V. With few constraint rows this is the largest
/// eigenvalue of the dense Schur matrix W^½ M G⁻¹ Mᵀ W^½; otherwise power
/// iteration on G⁻¹ Mᵀ W M (tolerance 1e-10).
double measure_coupling_norm(const SparseMatrix& M, const SpaceNorms& norms, int max_iter = 5000);

/// Operator norm of a map V -> V* (e.g. q(t,s)): sup ‖Qv‖_* / ‖v‖_V.
/// Power iteration estimates are lower bounds when they stop early.
double measure_dual_map_norm(const SparseMatrix& Q, const SpaceNorms& norms, int max_iter = 5000);

/// Operator norm of a map Y -> V* with Y = V* (the map E): sup ‖Ey‖_* / ‖y‖_*.
double measure_dual_endomorphism_norm(const SparseMatrix& E, const SpaceNorms& norms, int max_iter = 5000);

/// One separable term φ(t,s)·Q of the memory kernel. Convolution terms store
/// ψ with φ(t,s) = ψ(t - s); their interval integrals are computed in the lag
/// variable from integer step offsets so that equal offsets give bitwise equal
/// coefficients.
struct KernelTerm {
    std::function<double(double, double)> weight;
    std::function<double(double)> lag_weight;
    SparseMatrix matrix;

    static KernelTerm general(std::function<double(double, double)> phi, SparseMatrix Q);
    static KernelTerm convolution(std::function<double(double)> psi, SparseMatrix Q);

    bool is_convolution() const { return static_cast<bool>(lag_weight); }
    double at(double t, double s) const { return lag_weight ? lag_weight(t - s) : weight(t, s); }

    /// ∫_{t_{j-1}}^{t_j} φ(t_n, s) ds on a uniform grid of step tau, by two-point Gauss.
    double step_integral(int n, int j, double tau) const;
};

/// The history operator (Ru)(t) = E(∫_0^t q(t,s) u(s) ds + α) with
/// q(t,s) = Σ_m φ_m(t,s) Q_m and declared constants c_E, c_q, L_q.
struct HistoryKernel {
    SparseMatrix E;
    std::vector<KernelTerm> terms;
    Vector alpha;
    double horizon = 1.0;
    double c_E = 0.0;
    double c_q = 0.0;
    double L_q = 0.0;
    int quadrature_subdivisions = 64;

    /// A kernel with no memory terms on an n-dimensional state space.
    static HistoryKernel none(Eigen::Index n, double horizon);

    Eigen::Index dim() const { return E.rows(); }
    bool memoryless() const { return terms.empty(); }
    SparseMatrix evaluate(double t, double s) const;
};

using StateFunction = std::function<Vector(double)>;

/// (Ru)(t) by composite two-point Gauss on `kernel.quadrature_subdivisions` pieces.
Vector apply_history(const HistoryKernel& kernel, const StateFunction& u, double t);

/// w = α + Σ_{j=1}^{last} I_j u^j with I_j = ∫_{t_{j-1}}^{t_j} q(t_n, s) ds,
/// where traj[j-1] holds u^j. This is the memory state before E is applied.
Vector history_memory(const HistoryKernel& kernel, std::span<const Vector> traj, int n, double tau, int last);

/// x = E(α + Σ_{j=1}^n I_j u^j) with I_j = ∫_{t_{j-1}}^{t_j} q(t_n, s) ds;
/// traj[j-1] holds u^j.
Vector history_discrete(const HistoryKernel& kernel, std::span<const Vector> traj, int n, double tau);

/// The finite-dimensional problem data (A, B, E, q, α, M, J, f, u₀).
struct AbstractHVI {
    CoerciveOperator A;
    CoerciveOperator B;
    HistoryKernel kernel;
    SparseMatrix M;
    std::vector<LipschitzPotential> potentials;
    std::function<Vector(double)> load;
    Vector u0;
    double T = 1.0;
    SpaceNorms norms;
    /// Cached ‖M‖; NaN until `prepare` measured it.
    double coupling_norm = std::numeric_limits<double>::quiet_NaN();

    Eigen::Index dim() const { return A.matrix.rows(); }
    Eigen::Index constraint_dim() const { return M.rows(); }

    /// Throws DimensionMismatch when the pieces do not fit together.
    void check_consistency() const;
    double max_relaxed_monotonicity() const;
};

/// Checks consistency and measures ‖M‖ if it is not cached yet.
AbstractHVI prepare(AbstractHVI p);

/// ‖M‖ from the cache, or measured on the fly.
double coupling_norm_of(const AbstractHVI& p);

struct HypothesisMargin {
    std::string name;
    double value = 0.0;
    double slack = 0.0;
    bool holds = true;
    std::string detail;
};

struct HypothesisReport {
    bool h0_holds = false;
    double tau0 = 0.0;
    double m_J = 0.0;
    double coupling_norm = 0.0;
    std::vector<HypothesisMargin> margins;

    bool all_hold() const;
    const HypothesisMargin* find(const std::string& name) const;
};

struct ValidationOptions {
    /// Sample count for the potential audits.
    int samples = 200;
    /// (t, s) samples for the kernel audits; each costs one norm estimate.
    int kernel_samples = 8;
    int max_power_iterations = 500;
    std::uint64_t seed = 0;
    /// Also compare the declared coercivities against certified eigenvalue bounds.
    bool verify_coercivity = false;
};

/// Audits every hypothesis and computes τ₀ = (m_B - m_J ‖M‖²) / (c_E c_q).
HypothesisReport validate_hypotheses(const AbstractHVI& p, const ValidationOptions& options = {});

/// Two-point Gauss nodes on [a, b] (weights are (b - a)/2 each).
std::array<double, 2> gauss2_nodes(double a, double b);

/// (1/τ) ∫_{t_{k-1}}^{t_k} f(s) ds by two-point Gauss.
Vector average_load(const std::function<Vector(double)>& f, double a, double b);

} // namespace hvi
