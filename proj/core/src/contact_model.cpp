#include "hvi/contact_model.hpp"

#include <cmath>
#include <limits>

namespace hvi::contact {

Relaxation Relaxation::constant(IsotropicTensor c0)
{
    return Relaxation{Kind::Constant, c0, 1.0};
}

Relaxation Relaxation::exponential(IsotropicTensor c0, double time_scale)
{
    if (!(time_scale > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "relaxation time scale must be positive");
    }
    return Relaxation{Kind::Exponential, c0, time_scale};
}

double Relaxation::factor(double t) const
{
    switch (kind) {
    case Kind::None:
        return 0.0;
    case Kind::Constant:
        return 1.0;
    case Kind::Exponential:
        return std::exp(-t / time_scale);
    }
    return 0.0;
}

IsotropicTensor Relaxation::at(double t) const
{
    const double f = factor(t);
    return {f * scale.shear, f * scale.bulk};
}

double Relaxation::sup_norm() const
{
    // φ is 1 at t = 0 and never larger.
    return is_zero() ? 0.0 : scale.norm();
}

double Relaxation::lipschitz() const
{
    return kind == Kind::Exponential ? scale.norm() / time_scale : 0.0;
}

// ------------------------------------------------------------------ laws

const std::vector<std::string>& law_names()
{
    static const std::vector<std::string> names = {"zero", "quadratic", "abs", "nonmonotone_drop"};
    return names;
}

ComplianceLaw law_catalog(const std::string& name, const LawParameters& params)
{
    ComplianceLaw law;
    law.name = name;
    law.params = params;
    const double c = params.stiffness;
    if (name != "zero" && !(c > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "compliance stiffness must be positive");
    }
    if (name == "zero") {
        law.potential = LipschitzPotential::zero();
    } else if (name == "quadratic") {
        law.potential = LipschitzPotential::quadratic(c);
    } else if (name == "abs") {
        law.potential = LipschitzPotential::abs(c);
    } else if (name == "nonmonotone_drop") {
        if (!(params.threshold > 0.0) || params.residual_ratio < 0.0 || params.residual_ratio > 1.0) {
            throw Error(ErrorCode::InvalidArgument, "nonmonotone_drop needs threshold > 0 and ratio in [0, 1]");
        }
        law.potential = LipschitzPotential::nonmonotone_drop(c, params.threshold, params.residual_ratio);
    } else {
        std::string known;
        for (const auto& n : law_names()) {
            known += (known.empty() ? "" : ", ") + n;
        }
        throw Error(ErrorCode::UnknownLaw, "unknown compliance law '" + name + "' (known: " + known + ")");
    }
    if (params.declared_c || params.declared_m) {
        law.potential = law.potential.with_constants(params.declared_c, params.declared_m);
    }
    law.c_nu = law.potential.growth_constant();
    law.m_nu = law.potential.relaxed_monotonicity_constant();
    return law;
}

// ------------------------------------------------------------------ mesh

MeshSpec MeshSpec::refined(int levels) const
{
    if (levels < 0) {
        throw Error(ErrorCode::InvalidArgument, "negative refinement level");
    }
    if (!file.empty() && levels > 0) {
        throw Error(ErrorCode::InvalidArgument, "mesh files cannot be refined");
    }
    MeshSpec out = *this;
    out.nx = nx << levels;
    out.ny = ny << levels;
    return out;
}

fem::TriMesh MeshSpec::build() const
{
    if (!file.empty()) {
        return fem::read_mesh_file(file);
    }
    return fem::generate_rect_mesh(nx, ny, lx, ly, tagging);
}

// -------------------------------------------------------------- assembly

HypothesisReport smallness_report(const AbstractHVI& p)
{
    HypothesisReport r;
    r.coupling_norm = coupling_norm_of(p);
    r.m_J = p.max_relaxed_monotonicity();
    const double h0 = p.B.coercivity - r.m_J * r.coupling_norm * r.coupling_norm;
    r.h0_holds = h0 > 0.0;
    r.margins.push_back({"(H0)", h0, h0, r.h0_holds, "m_B - m_J |M|^2"});
    const double cc = p.kernel.c_E * p.kernel.c_q;
    if (!r.h0_holds) {
        r.tau0 = 0.0;
    } else {
        r.tau0 = cc == 0.0 ? std::numeric_limits<double>::infinity() : h0 / cc;
    }
    return r;
}

ContactInstance build_abstract(const ContactConfig& cc, const BuildOptions& options)
{
    return build_abstract(cc, cc.mesh.build(), options);
}

ContactInstance build_abstract(const ContactConfig& cc, fem::TriMesh mesh, const BuildOptions& options)
{
    cc.material.viscosity.check();
    cc.material.elasticity.check();
    if (!(cc.T > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "horizon T must be positive");
    }

    ContactInstance inst;
    inst.mesh = std::move(mesh);
    inst.dofs = fem::DofMap::build(inst.mesh);
    inst.trace = fem::trace_normal(inst.mesh, inst.dofs);
    inst.gram = fem::assemble_strain_gram(inst.mesh, inst.dofs);
    inst.material = cc.material;
    inst.law = cc.law;

    const auto& mesh_ref = inst.mesh;
    const auto& dofs = inst.dofs;
    AbstractHVI& p = inst.problem;
    p.T = cc.T;
    p.norms = SpaceNorms(inst.gram, inst.trace.weights);
    p.A = fem::assemble_elastic(mesh_ref, dofs, cc.material.viscosity);
    p.B = fem::assemble_elastic(mesh_ref, dofs, cc.material.elasticity);

    const Eigen::Index n = dofs.free_count;
    p.kernel = HistoryKernel::none(n, cc.T);
    const Relaxation& rel = cc.material.relaxation;
    if (!rel.is_zero()) {
        if (rel.scale.shear < 0.0 || rel.scale.bulk < 0.0) {
            throw Error(ErrorCode::InvalidArgument, "relaxation coefficients must be non-negative");
        }
        SparseMatrix Q0 = fem::assemble_elastic_matrix(mesh_ref, dofs, rel.scale);
        p.kernel.terms.push_back(KernelTerm::convolution([rel](double s) { return rel.factor(s); }, std::move(Q0)));
        p.kernel.c_q = rel.sup_norm();
        p.kernel.L_q = rel.lipschitz();
    }

    p.M = inst.trace.M;
    p.potentials.assign(static_cast<std::size_t>(p.M.rows()), cc.law.potential);

    // The load closure keeps its own copies so the instance stays movable.
    p.load = [mesh_copy = inst.mesh, dofs_copy = inst.dofs, f0 = cc.f0, fN = cc.fN](double t) {
        return fem::assemble_load(mesh_copy, dofs_copy, f0, fN, t);
    };
    p.u0 = cc.u0 ? fem::interpolant_P1(mesh_ref, dofs, cc.u0) : Vector(Vector::Zero(n));
    p = prepare(std::move(p));

    inst.report = options.audit ? validate_hypotheses(p, options.validation) : smallness_report(p);
    if (options.check_smallness && !inst.report.h0_holds) {
        const double margin = inst.report.find("(H0)")->value;
        throw Error(ErrorCode::SmallnessViolated,
                    "m_B - m_J |M|^2 = " + std::to_string(margin) + " <= 0 (m_B = " + std::to_string(p.B.coercivity) +
                        ", m_J = " + std::to_string(inst.report.m_J) +
                        ", |M| = " + std::to_string(inst.report.coupling_norm) + ")");
    }
    return inst;
}

std::vector<Tensor2> recover_stress(const ContactInstance& inst, const DiscreteTrajectory& traj, int k)
{
    if (k < 1 || k > traj.grid.N) {
        throw Error(ErrorCode::IndexOutOfRange, "stress index " + std::to_string(k) + " out of range");
    }
    const auto& kernel = inst.problem.kernel;
    const Vector v = traj.rate(k);
    const Vector& u = traj.state(k);
    Vector mem = Vector::Zero(u.size());
    if (!kernel.memoryless()) {
        const auto& term = kernel.terms.front();
        for (int j = 1; j <= k; ++j) {
            mem += term.step_integral(k, j, traj.grid.tau) * traj.state(j);
        }
    }
    const auto& mat = inst.material;
    std::vector<Tensor2> out(inst.mesh.triangles.size());
    for (int e = 0; e < static_cast<int>(out.size()); ++e) {
        Tensor2 s = mat.viscosity.apply(fem::element_strain(inst.mesh, inst.dofs, v, e)) +
                    mat.elasticity.apply(fem::element_strain(inst.mesh, inst.dofs, u, e));
        if (!kernel.memoryless()) {
            s += mat.relaxation.scale.apply(fem::element_strain(inst.mesh, inst.dofs, mem, e));
        }
        out[static_cast<std::size_t>(e)] = s;
    }
    return out;
}

} // namespace hvi::contact
