#pragma once

#include "hvi/abstract_hvi.hpp"
#include "hvi/nonsmooth_step.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace hvi {

struct TimeGrid {
    double T = 1.0;
    int N = 1;
    double tau = 1.0;

    static TimeGrid uniform(double T, int N);
    double node(int k) const { return k == N ? T : static_cast<double>(k) * tau; }
};

/// Rothe sequence u^0..u^N with per-step selections ξ^k, memory states
/// w^k = α + Σ_j I_j u^j, history terms x^k = E w^k and averaged loads f^k.
/// Step-indexed members (k = 1..N) are stored at position k - 1.
struct DiscreteTrajectory {
    TimeGrid grid;
    std::vector<Vector> states;
    std::vector<Vector> selections;
    std::vector<Vector> memories;
    std::vector<Vector> histories;
    std::vector<Vector> loads;
    std::vector<double> residuals;
    std::vector<int> iterations;
    Vector initial_memory;
    Vector initial_load;
    SpaceNorms norms;

    int steps() const { return grid.N; }
    const Vector& state(int k) const;
    const Vector& selection(int k) const;
    const Vector& memory(int k) const;
    const Vector& history(int k) const;
    const Vector& load(int k) const;
    /// v^k = (u^k - u^{k-1}) / τ.
    Vector rate(int k) const;
};

/// Piecewise affine and piecewise constant interpolants of a trajectory.
/// Constant interpolants take the value with index k on (t_{k-1}, t_k] and the
/// k = 0 value at t = 0.
class Interpolants {
public:
    explicit Interpolants(const DiscreteTrajectory& traj) : traj_(traj) {}

    Vector affine(double t) const;
    Vector constant(double t) const;
    Vector selection(double t) const;
    Vector load(double t) const;
    Vector history_state(double t) const;

    /// Index k with t ∈ (t_{k-1}, t_k], 0 for t = 0.
    int interval(double t) const;

private:
    const DiscreteTrajectory& traj_;
};

struct RotheOptions {
    StepSolverConfig solver;
    /// Start each step's fixed point from the previous state instead of the
    /// unconstrained linear solution.
    bool warm_start = false;
    /// Skip the hypothesis audit; τ₀ is then taken from `tau0`.
    bool skip_validation = false;
    double tau0 = std::numeric_limits<double>::infinity();
    ValidationOptions validation;
};

/// Runs the implicit Euler scheme for N steps. Throws TauTooLarge when
/// τ = T/N >= τ₀ and rethrows step failures annotated with the step index.
DiscreteTrajectory run_rothe(const AbstractHVI& p, int N, const RotheOptions& options = {});

/// Builds step k's problem from the computed states u^1..u^{k-1}; the memory
/// state before the unknown's own contribution is returned in `past_memory`.
StepProblem rothe_step_problem(const AbstractHVI& p, const TimeGrid& grid, const std::vector<Vector>& states, int k,
                               double tau0, Vector& past_memory);

struct EstimateReport {
    double max_state = 0.0;
    double sum_sq_increments = 0.0;
    double max_selection = 0.0;
    double sum_sq_rates = 0.0;
};

/// max_{0<=k<=N} ‖u^k‖, Σ_{k=1}^N ‖u^k - u^{k-1}‖², max_{1<=k<=N} ‖ξ^k‖_X,
/// τ Σ_{k=1}^N ‖v^k‖², all in the norms the trajectory was computed with.
EstimateReport apriori_audit(const DiscreteTrajectory& traj);

/// L²(0,T;V) distance between the piecewise constant and piecewise affine
/// interpolants, integrated exactly (Gauss-2 on each quadratic piece).
double interp_gap(const DiscreteTrajectory& traj);

/// (τ²/3) τ Σ ‖v^k‖², the bound on interp_gap².
double interp_gap_bound(const DiscreteTrajectory& traj);

/// Discrete L²(0,T;V) distance between the piecewise constant interpolants of
/// two trajectories on nested uniform grids (same space, same norms).
double piecewise_constant_distance(const DiscreteTrajectory& coarse, const DiscreteTrajectory& fine);

/// Comma-separated dump: header "t,u0,u1,...", one row per time node, %.17g.
void write_trajectory_csv(std::ostream& out, const DiscreteTrajectory& traj);
void write_trajectory_csv(const std::string& path, const DiscreteTrajectory& traj);

} // namespace hvi
