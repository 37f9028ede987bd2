#pragma once

#include "hvi/contact_model.hpp"
#include "hvi/rothe.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hvi::study {

/// P1 embedding of a coarse mesh into a nested fine mesh (free dofs to free
/// dofs) and the nodal injection back.
class Prolongation {
public:
    /// Throws NotNested unless every fine triangle lies inside one coarse
    /// triangle and every coarse node is a fine node.
    static Prolongation build(const fem::TriMesh& coarse, const fem::DofMap& coarse_dofs, const fem::TriMesh& fine,
                              const fem::DofMap& fine_dofs);
    static Prolongation identity(Eigen::Index n);

    const SparseMatrix& matrix() const { return P_; }
    Vector prolong(const Vector& coarse) const { return P_ * coarse; }
    /// Values of a fine field at the coarse nodes.
    Vector restrict_nodal(const Vector& fine) const { return R_ * fine; }

private:
    SparseMatrix P_;
    SparseMatrix R_;
};

struct LevelSolution {
    contact::ContactInstance instance;
    DiscreteTrajectory trajectory;
};

/// max over shared time nodes 1 <= n <= N of ‖u_ref − P u_coarse‖ in the
/// norm of `gram` (the reference mesh's strain Gram). Throws NotNested when
/// the time grids are not nested.
double v_norm_error(const Prolongation& P, const SpaceNorms& ref_norms, const DiscreteTrajectory& coarse,
                    const DiscreteTrajectory& ref);
double v_norm_error(const LevelSolution& coarse, const LevelSolution& ref);

/// Terms of the best-approximation error bound for one level, with
/// d_n = u_n − v_n^h on the reference grid and k the level time step.
struct CeaTerms {
    /// k Σ ‖δ d_l‖²
    double interp_sq = 0.0;
    /// max_n ‖d_n‖²
    double max_interp_sq = 0.0;
    /// k Σ ‖M d_l‖_X
    double trace_sum = 0.0;
    /// k Σ |S_l(v_l^h)|
    double residual_sum = 0.0;
    /// k Σ ‖δu_l − u_l'‖²
    double delta_sum = 0.0;

    double total() const { return interp_sq + max_interp_sq + trace_sum + residual_sum + delta_sum; }
};

/// v_n^h on the level's free dofs for level time index n.
using InterpolantSource = std::function<Vector(int n)>;

/// The nodal interpolant of the reference solution on the level mesh.
InterpolantSource nodal_interpolant_source(const Prolongation& P, const DiscreteTrajectory& level,
                                           const DiscreteTrajectory& ref);

/// Céa terms of `level` against `ref`. u_n' is the second-order central
/// difference on the reference time grid (one-sided at t = T) and R_n u the
/// reference history. `P` maps the level mesh into the reference mesh.
CeaTerms cea_terms(const AbstractHVI& ref_problem, const DiscreteTrajectory& ref, const Prolongation& P,
                   const DiscreteTrajectory& level, const InterpolantSource& source);

struct StudyLevel {
    int level = 0;
    double h = 0.0;
    double k = 0.0;
    int steps = 0;
    Eigen::Index dofs = 0;
    double error = 0.0;
    /// log(e_{ℓ-1}/e_ℓ) / log(x_{ℓ-1}/x_ℓ) with x = h + k; NaN on the first level.
    double rate = 0.0;
    std::optional<CeaTerms> terms;
    double seconds = 0.0;
};

struct FitResult {
    double p = 0.0;
    double C = 0.0;
    /// Root mean square of the log residuals.
    double residual = 0.0;
};

/// Least squares on log e = log C + p log x. Needs at least three points
/// (InvalidArgument) and positive errors; DegenerateFit when every error is
/// below 1e-13 or some error is not positive.
FitResult fit_rate(const std::vector<double>& x, const std::vector<double>& error);
/// Fit against h + k.
FitResult fit_rate(const std::vector<StudyLevel>& levels);

struct ConvergenceReport {
    std::string kind;
    std::vector<StudyLevel> levels;
    double fitted_rate = 0.0;
    double constant = 0.0;
    double fit_residual = 0.0;
    double reference_h = 0.0;
    double reference_k = 0.0;
    int reference_steps = 0;
    /// Set when Céa terms were computed: max over levels of
    /// error² / (terms + k²), and the per-level ratios.
    std::optional<double> cea_constant;
    std::vector<double> cea_ratios;

    bool below(double threshold) const { return !(fitted_rate >= threshold); }
};

struct StudyOptions {
    int levels = 4;
    int ref_extra = 2;
    /// Levels are solved concurrently on this many threads.
    int threads = 1;
    bool cea = false;
    StepSolverConfig solver;
    contact::BuildOptions build{true, false, {}};
};

/// Joint (h, k) refinement: level ℓ uses the mesh refined ℓ times and
/// steps·2^ℓ time steps; the reference uses levels − 1 + ref_extra.
ConvergenceReport run_study(const contact::ContactConfig& cc, const StudyOptions& options = {});

/// k-only refinement on a fixed problem: N0·2^ℓ steps against a reference
/// with N0·2^(levels − 1 + ref_extra) steps. Errors use the problem norms;
/// h is reported as 0.
ConvergenceReport run_time_study(const AbstractHVI& p, int N0, const StudyOptions& options = {});

/// level,h,k,steps,dofs,error,rate (rate empty on the first level).
void write_report_csv(std::ostream& out, const ConvergenceReport& report);

/// Writes <stem>.dat (h+k, error) and <stem>.gp (log-log plot with a slope-1
/// guide) into `dir`.
void write_plot_script(const std::string& dir, const std::string& stem, const ConvergenceReport& report);

} // namespace hvi::study
