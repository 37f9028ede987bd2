#pragma once

#include "hvi/abstract_hvi.hpp"
#include "hvi/fem2d.hpp"
#include "hvi/rothe.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hvi::contact {

using fem::IsotropicTensor;
using fem::Point;
using fem::Tensor2;

/// Relaxation tensor 𝒞(t) = φ(t) 𝒞₀ with φ ≡ 0, φ ≡ 1 or φ(t) = exp(-t/θ).
struct Relaxation {
    enum class Kind { None, Constant, Exponential };

    Kind kind = Kind::None;
    IsotropicTensor scale;
    double time_scale = 1.0;

    static Relaxation none() { return {}; }
    static Relaxation constant(IsotropicTensor c0);
    static Relaxation exponential(IsotropicTensor c0, double time_scale);

    double factor(double t) const;
    IsotropicTensor at(double t) const;
    bool is_zero() const { return kind == Kind::None || scale.is_zero(); }
    /// sup_t ‖𝒞(t)‖.
    double sup_norm() const;
    /// Lipschitz constant L_C of t ↦ 𝒞(t).
    double lipschitz() const;
};

struct Material {
    IsotropicTensor viscosity{1.0, 0.0};
    IsotropicTensor elasticity{1.0, 0.0};
    Relaxation relaxation;
};

struct LawParameters {
    double stiffness = 1.0;
    double threshold = 1.0;
    double residual_ratio = 0.5;
    /// Overrides of the catalog constants c_ν and m_ν.
    std::optional<double> declared_c;
    std::optional<double> declared_m;
};

struct ComplianceLaw {
    std::string name;
    LipschitzPotential potential;
    double c_nu = 0.0;
    double m_nu = 0.0;
    LawParameters params;
};

/// "zero", "quadratic", "abs" or "nonmonotone_drop"; throws UnknownLaw.
ComplianceLaw law_catalog(const std::string& name, const LawParameters& params = {});
const std::vector<std::string>& law_names();

struct MeshSpec {
    double lx = 1.0;
    double ly = 1.0;
    int nx = 4;
    int ny = 4;
    fem::SideTagging tagging = fem::SideTagging::clamped_left_contact_bottom();
    /// When set, the mesh is read from this file instead of generated.
    std::string file;

    /// Same rectangle with nx, ny multiplied by 2^levels.
    MeshSpec refined(int levels) const;
    fem::TriMesh build() const;
};

struct ContactConfig {
    MeshSpec mesh;
    Material material;
    ComplianceLaw law = law_catalog("zero");
    fem::VectorField f0;
    fem::VectorField fN;
    double T = 1.0;
    int steps = 16;
    /// Initial displacement; empty means zero.
    std::function<Point(double, double)> u0;
};

struct BuildOptions {
    /// Throw SmallnessViolated when (H0) fails.
    bool check_smallness = true;
    /// Run the full hypothesis audit (otherwise only (H0) and τ₀ are computed).
    bool audit = true;
    ValidationOptions validation;
};

struct ContactInstance {
    fem::TriMesh mesh;
    fem::DofMap dofs;
    fem::ContactTrace trace;
    SparseMatrix gram;
    Material material;
    ComplianceLaw law;
    AbstractHVI problem;
    HypothesisReport report;
};

/// Assembles the abstract problem: A and B from the viscosity and elasticity
/// tensors, E = I, q(t,s) = φ(t-s) Q₀ with Q₀ assembled from 𝒞₀, α = 0,
/// M the normal trace on Γ₃ with nodal weights, one copy of the law per Γ₃
/// node and f(t) from the body force and traction. The state norm is
/// ‖ε(v)‖_{L²}, the constraint norm the weighted nodal l².
ContactInstance build_abstract(const ContactConfig& cc, const BuildOptions& options = {});

/// Same, on a given mesh.
ContactInstance build_abstract(const ContactConfig& cc, fem::TriMesh mesh, const BuildOptions& options = {});

/// Elementwise σ^k = 𝒜ε(v^k) + ℬε(u^k) + Σ_j c_{kj} 𝒞₀ ε(u^j).
std::vector<Tensor2> recover_stress(const ContactInstance& inst, const DiscreteTrajectory& traj, int k);

/// H0 and τ₀ only, without the sampling audits.
HypothesisReport smallness_report(const AbstractHVI& p);

} // namespace hvi::contact
