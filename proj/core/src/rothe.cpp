#include "hvi/rothe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>

namespace hvi {

TimeGrid TimeGrid::uniform(double T, int N)
{
    if (N < 1) {
        throw Error(ErrorCode::InvalidArgument, "need at least one time step");
    }
    if (!(T > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
    }
    return TimeGrid{T, N, T / N};
}

namespace {

const Vector& step_entry(const std::vector<Vector>& v, int k, int N)
{
    if (k < 1 || k > N) {
        throw Error(ErrorCode::IndexOutOfRange, "step index " + std::to_string(k) + " out of range");
    }
    return v[static_cast<std::size_t>(k - 1)];
}

std::vector<double> self_coefficients(const HistoryKernel& kernel, int k, double tau)
{
    std::vector<double> c;
    c.reserve(kernel.terms.size());
    for (const auto& term : kernel.terms) {
        c.push_back(term.step_integral(k, k, tau));
    }
    return c;
}

SparseMatrix self_memory_matrix(const HistoryKernel& kernel, const std::vector<double>& coeffs)
{
    SparseMatrix S(kernel.E.cols(), kernel.E.cols());
    for (std::size_t m = 0; m < kernel.terms.size(); ++m) {
        S += coeffs[m] * kernel.terms[m].matrix;
    }
    return S;
}

} // namespace

const Vector& DiscreteTrajectory::state(int k) const
{
    if (k < 0 || k > grid.N) {
        throw Error(ErrorCode::IndexOutOfRange, "state index " + std::to_string(k) + " out of range");
    }
    return states[static_cast<std::size_t>(k)];
}

const Vector& DiscreteTrajectory::selection(int k) const { return step_entry(selections, k, grid.N); }
const Vector& DiscreteTrajectory::memory(int k) const
{
    return k == 0 ? initial_memory : step_entry(memories, k, grid.N);
}
const Vector& DiscreteTrajectory::history(int k) const { return step_entry(histories, k, grid.N); }
const Vector& DiscreteTrajectory::load(int k) const { return step_entry(loads, k, grid.N); }

Vector DiscreteTrajectory::rate(int k) const
{
    if (k < 1 || k > grid.N) {
        throw Error(ErrorCode::IndexOutOfRange, "rate index " + std::to_string(k) + " out of range");
    }
    return (states[static_cast<std::size_t>(k)] - states[static_cast<std::size_t>(k - 1)]) / grid.tau;
}

// ------------------------------------------------------------ interpolants

int Interpolants::interval(double t) const
{
    const auto& g = traj_.grid;
    if (t < -1e-12 * g.T || t > g.T * (1.0 + 1e-12)) {
        throw Error(ErrorCode::TimeOutOfRange, "t = " + std::to_string(t) + " outside [0, T]");
    }
    if (t <= 0.0) {
        return 0;
    }
    int k = static_cast<int>(std::ceil(t / g.tau - 1e-9));
    return std::clamp(k, 1, g.N);
}

Vector Interpolants::affine(double t) const
{
    const int k = interval(t);
    if (k == 0) {
        return traj_.state(0);
    }
    return traj_.state(k - 1) + (t - traj_.grid.node(k - 1)) * traj_.rate(k);
}

Vector Interpolants::constant(double t) const
{
    return traj_.state(interval(t));
}

Vector Interpolants::selection(double t) const
{
    return traj_.selection(std::max(1, interval(t)));
}

Vector Interpolants::load(double t) const
{
    const int k = interval(t);
    return k == 0 ? traj_.initial_load : traj_.load(k);
}

Vector Interpolants::history_state(double t) const
{
    return traj_.memory(interval(t));
}

// --------------------------------------------------------------- time loop

StepProblem rothe_step_problem(const AbstractHVI& p, const TimeGrid& grid, const std::vector<Vector>& states, int k,
                               double tau0, Vector& past_memory)
{
    if (k < 1 || k > grid.N || static_cast<int>(states.size()) < k) {
        throw Error(ErrorCode::IndexOutOfRange, "step index " + std::to_string(k) + " out of range");
    }
    const double tau = grid.tau;
    const std::span<const Vector> computed(states.data() + 1, static_cast<std::size_t>(k - 1));
    past_memory = history_memory(p.kernel, computed, k, tau, k - 1);

    StepProblem sp;
    sp.tau = tau;
    sp.tau0 = tau0;
    sp.K = CoerciveOperator::declared(SparseMatrix(p.A.matrix + tau * p.B.matrix),
                                      p.A.coercivity + tau * p.B.coercivity, p.A.bound + tau * p.B.bound, false);
    if (!p.kernel.memoryless()) {
        sp.self_history = tau * (p.kernel.E * self_memory_matrix(p.kernel, self_coefficients(p.kernel, k, tau)));
    }
    const Vector f = average_load(p.load, grid.node(k - 1), grid.node(k));
    sp.rhs = tau * f + p.A.matrix * states[static_cast<std::size_t>(k - 1)] - tau * (p.kernel.E * past_memory);
    sp.M = p.M;
    sp.weights = p.norms.weights();
    sp.potentials = p.potentials;
    return sp;
}

DiscreteTrajectory run_rothe(const AbstractHVI& p, int N, const RotheOptions& options)
{
    p.check_consistency();
    options.solver.check();
    const TimeGrid grid = TimeGrid::uniform(p.T, N);

    double tau0 = options.tau0;
    if (!options.skip_validation) {
        tau0 = validate_hypotheses(p, options.validation).tau0;
    }
    if (grid.tau >= tau0) {
        throw Error(ErrorCode::TauTooLarge,
                    "tau = " + std::to_string(grid.tau) + " is not below tau0 = " + std::to_string(tau0));
    }

    DiscreteTrajectory traj;
    traj.grid = grid;
    traj.norms = p.norms;
    traj.states.reserve(static_cast<std::size_t>(N) + 1);
    traj.states.push_back(p.u0);
    traj.initial_memory = p.kernel.alpha.size() == 0 ? Vector(Vector::Zero(p.dim())) : p.kernel.alpha;
    traj.initial_load = p.load(0.0);

    std::unique_ptr<StepOperator> op;
    std::vector<double> op_coeffs;

    for (int k = 1; k <= N; ++k) {
        try {
            Vector past;
            StepProblem sp = rothe_step_problem(p, grid, traj.states, k, tau0, past);
            const auto coeffs = self_coefficients(p.kernel, k, grid.tau);
            if (!op || coeffs != op_coeffs) {
                op = std::make_unique<StepOperator>(sp, options.solver);
                op_coeffs = coeffs;
            }
            const Vector* initial = options.warm_start ? &traj.states.back() : nullptr;
            StepSolution sol = op->solve(sp.rhs, options.solver, initial);

            Vector w = past;
            if (!p.kernel.memoryless()) {
                w += self_memory_matrix(p.kernel, coeffs) * sol.u;
            }
            traj.histories.push_back(p.kernel.E * w);
            traj.memories.push_back(std::move(w));
            traj.loads.push_back(average_load(p.load, grid.node(k - 1), grid.node(k)));
            traj.selections.push_back(std::move(sol.xi));
            traj.residuals.push_back(sol.residual);
            traj.iterations.push_back(sol.iterations);
            traj.states.push_back(std::move(sol.u));
        } catch (const Error& e) {
            if (e.step()) {
                throw;
            }
            throw e.at_step(k);
        }
    }
    return traj;
}

// ------------------------------------------------------------ diagnostics

EstimateReport apriori_audit(const DiscreteTrajectory& traj)
{
    EstimateReport r;
    const auto& norms = traj.norms;
    for (int k = 0; k <= traj.grid.N; ++k) {
        r.max_state = std::max(r.max_state, norms.state_norm(traj.state(k)));
    }
    for (int k = 1; k <= traj.grid.N; ++k) {
        const Vector d = traj.state(k) - traj.state(k - 1);
        const double dn = norms.state_norm(d);
        r.sum_sq_increments += dn * dn;
        r.sum_sq_rates += traj.grid.tau * (dn / traj.grid.tau) * (dn / traj.grid.tau);
        r.max_selection = std::max(r.max_selection, norms.constraint_norm(traj.selection(k)));
    }
    return r;
}

double interp_gap(const DiscreteTrajectory& traj)
{
    const Interpolants I(traj);
    double sum = 0.0;
    for (int k = 1; k <= traj.grid.N; ++k) {
        const auto s = gauss2_nodes(traj.grid.node(k - 1), traj.grid.node(k));
        for (double t : s) {
            const double d = traj.norms.state_norm(I.constant(t) - I.affine(t));
            sum += 0.5 * traj.grid.tau * d * d;
        }
    }
    return std::sqrt(sum);
}

double interp_gap_bound(const DiscreteTrajectory& traj)
{
    const double tau = traj.grid.tau;
    return tau * tau / 3.0 * apriori_audit(traj).sum_sq_rates;
}

double piecewise_constant_distance(const DiscreteTrajectory& coarse, const DiscreteTrajectory& fine)
{
    const int Nc = coarse.grid.N;
    const int Nf = fine.grid.N;
    if (Nf % Nc != 0 || std::abs(coarse.grid.T - fine.grid.T) > 1e-12 * coarse.grid.T) {
        throw Error(ErrorCode::NotNested, "time grids are not nested");
    }
    const int ratio = Nf / Nc;
    double sum = 0.0;
    for (int i = 1; i <= Nf; ++i) {
        const int k = (i + ratio - 1) / ratio;
        const double d = fine.norms.state_norm(fine.state(i) - coarse.state(k));
        sum += fine.grid.tau * d * d;
    }
    return std::sqrt(sum);
}

void write_trajectory_csv(std::ostream& out, const DiscreteTrajectory& traj)
{
    const Eigen::Index n = traj.states.empty() ? 0 : traj.states.front().size();
    out << "t";
    for (Eigen::Index i = 0; i < n; ++i) {
        out << ",u" << i;
    }
    out << '\n';
    char buf[64];
    for (int k = 0; k <= traj.grid.N; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", traj.grid.node(k));
        out << buf;
        const Vector& u = traj.state(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof buf, ",%.17g", u[i]);
            out << buf;
        }
        out << '\n';
    }
}

void write_trajectory_csv(const std::string& path, const DiscreteTrajectory& traj)
{
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path);
    }
    write_trajectory_csv(out, traj);
}

} // namespace hvi
