// One PASS/FAIL line per criterion; exit status is the number of failures.

#include "hvi/contact_model.hpp"
#include "hvi/convergence_lab.hpp"
#include "hvi/oracle_suite.hpp"
#include "hvi/rothe.hpp"
#include "hvi/scenario.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace hvi;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void verdict(int id, bool ok, const std::string& detail)
{
    std::printf("%s %2d  %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string scenario(const std::string& name)
{
    return std::string(HVI_SCENARIO_DIR) + "/" + name;
}

contact::ContactInstance instance_of(const Scenario& sc)
{
    contact::BuildOptions bo;
    bo.audit = false;
    return contact::build_abstract(sc.config, bo);
}

DiscreteTrajectory solve(const contact::ContactInstance& inst, const StepSolverConfig& solver, int N)
{
    RotheOptions ro;
    ro.solver = solver;
    ro.skip_validation = true;
    ro.tau0 = inst.report.tau0;
    return run_rothe(inst.problem, N, ro);
}

// Every trajectory computed here feeds the interpolant-gap check.
double worst_gap_excess = -INFINITY;
int gap_runs = 0;

void record_gap(const DiscreteTrajectory& traj)
{
    const double g = interp_gap(traj);
    worst_gap_excess = std::max(worst_gap_excess, g * g - interp_gap_bound(traj));
    ++gap_runs;
}

// Composite Simpson on a fine uniform grid.
double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000)
{
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) {
        s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    }
    return s * h / 3.0;
}

void rate()
{
    const auto t0 = Clock::now();
    const auto sc = load_scenario(scenario("frictionless_quadratic.yaml"));
    study::StudyOptions o;
    o.levels = 4;
    o.ref_extra = 2;
    o.solver = sc.solver;
    const auto report = study::run_study(sc.config, o);
    const double p = report.fitted_rate;
    verdict(1, p >= 0.8 && p <= 1.3,
            fmt("joint (h,k) rate p = %.4f, want [0.8, 1.3]; finest error %.3e; %.1f s", p, report.levels.back().error,
                seconds_since(t0)));
}

void temporal_order()
{
    // One dof: u' + u + ∫ 4 e^{-(t-s)} u(s) ds = cos 3t, memory dominating the elastic term.
    AbstractHVI p;
    const auto one = [](double v) {
        DenseMatrix D(1, 1);
        D(0, 0) = v;
        return SparseMatrix(D.sparseView());
    };
    p.A = CoerciveOperator::declared(one(1.0), 1.0, 1.0);
    p.B = CoerciveOperator::declared(one(1.0), 1.0, 1.0);
    p.kernel = HistoryKernel::none(1, 1.0);
    p.kernel.terms.push_back(KernelTerm::convolution([](double r) { return std::exp(-r); }, one(4.0)));
    p.kernel.c_q = 4.0;
    p.kernel.L_q = 4.0;
    p.M = SparseMatrix(0, 1);
    p.load = [](double t) { return Vector::Constant(1, std::cos(3.0 * t)); };
    p.u0 = Vector::Zero(1);
    p.T = 1.0;

    study::StudyOptions o;
    o.levels = 4;
    o.ref_extra = 6;
    const auto report = study::run_time_study(p, 8, o);
    bool ok = true;
    std::string ratios;
    for (std::size_t i = 1; i < report.levels.size(); ++i) {
        const double r = report.levels[i - 1].error / report.levels[i].error;
        ok = ok && r >= 1.7 && r <= 2.3;
        ratios += fmt(" %.4f", r);
    }
    verdict(2, ok, "k-only error ratios" + ratios + ", want [1.7, 2.3]");
}

void oracle_equivalence()
{
    const auto t0 = Clock::now();
    const auto summary = oracle::run_oracle_suite(100, 0, 1e-6);
    const double secs = seconds_since(t0);
    int nonmonotone = 0;
    for (const auto& r : summary.results) {
        nonmonotone += r.kind == "nonmonotone" ? 1 : 0;
    }
    verdict(3, summary.failures == 0 && secs < 60.0,
            fmt("100 step problems (%.0f nonmonotone), max |solve - brute| = %.2e, want <= 1e-6; %.2f s (< 60)",
                nonmonotone, summary.max_difference, secs));
}

void uniqueness()
{
    StepSolverConfig cfg;
    cfg.tol = 1e-13;
    cfg.max_iter = 100000;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    double spread = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto c = oracle::random_step_case(1000 + s);
        const double radius = oracle::apriori_radius(c.problem);
        std::vector<Vector> sols;
        for (int start = 0; start < 5; ++start) {
            Vector u0(c.problem.dim());
            for (Eigen::Index i = 0; i < u0.size(); ++i) {
                u0[i] = 3.0 * radius * g(rng);
            }
            sols.push_back(solve_step(c.problem, cfg, &u0).u);
        }
        for (std::size_t a = 0; a < sols.size(); ++a) {
            for (std::size_t b = a + 1; b < sols.size(); ++b) {
                spread = std::max(spread, (sols[a] - sols[b]).lpNorm<Eigen::Infinity>());
            }
        }
    }
    verdict(4, spread < 1e-8, fmt("50 instances x 5 starts, max pairwise spread %.2e, want < 1e-8", spread));
}

void apriori_bounds()
{
    bool ok = true;
    std::string detail;
    for (const std::string name : {"frictionless_quadratic.yaml", "nonmonotone.yaml"}) {
        const auto sc = load_scenario(scenario(name));
        const auto inst = instance_of(sc);
        EstimateReport base;
        double worst = 1.0;
        for (int N : {16, 32, 64, 128}) {
            const auto traj = solve(inst, sc.solver, N);
            record_gap(traj);
            const auto e = apriori_audit(traj);
            if (N == 16) {
                base = e;
                continue;
            }
            // two-sided for quantities with a limit, one-sided for the O(τ) increment sum
            const auto two_sided = [&](double v, double v16) {
                if (v16 == 0.0) {
                    return v == 0.0 ? 1.0 : INFINITY;
                }
                return std::max(v / v16, v16 / v);
            };
            const double f = std::max({two_sided(e.max_state, base.max_state),
                                       two_sided(e.max_selection, base.max_selection),
                                       two_sided(e.sum_sq_rates, base.sum_sq_rates),
                                       e.sum_sq_increments / base.sum_sq_increments});
            worst = std::max(worst, f);
        }
        ok = ok && worst <= 2.0;
        detail += " " + sc.name + fmt(" %.4f", worst);
    }
    verdict(5, ok, "worst factor vs N=16 over N in {32,64,128}:" + detail + ", want <= 2");
}

void interpolant_gap()
{
    // the linear benchmark also contributes runs here
    const auto sc = load_scenario(scenario("linear.yaml"));
    const auto inst = instance_of(sc);
    for (int N : {4, 16}) {
        record_gap(solve(inst, sc.solver, N));
    }
    const auto single = solve(inst, sc.solver, 1);
    const double g = interp_gap(single);
    const double equality = std::abs(g * g - interp_gap_bound(single));
    verdict(6, worst_gap_excess <= 1e-12 && equality <= 1e-12,
            fmt("%.0f runs, max gap^2 - bound = %.2e (want <= 1e-12); single step |gap^2 - bound| = %.2e", gap_runs,
                worst_gap_excess, equality));
}

void history_lipschitz()
{
    const auto sc = load_scenario(scenario("frictionless_quadratic.yaml"));
    const auto inst = instance_of(sc);
    const auto& k = inst.problem.kernel;
    const auto& norms = inst.problem.norms;
    const double L = k.c_E * k.c_q;
    const Eigen::Index n = inst.problem.A.matrix.rows();
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto random_vec = [&] {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            v[i] = g(rng);
        }
        return v;
    };
    double worst = -INFINITY;
    for (int pair = 0; pair < 100; ++pair) {
        const Vector a1 = random_vec(), b1 = random_vec(), c1 = random_vec();
        const Vector a2 = random_vec(), b2 = random_vec(), c2 = random_vec();
        const double w = 1.0 + 8.0 * unit(rng);
        const StateFunction u1 = [=](double s) { return Vector(a1 + s * b1 + std::sin(w * s) * c1); };
        const StateFunction u2 = [=](double s) { return Vector(a2 + s * b2 + std::cos(w * s) * c2); };
        const double t = sc.config.T * (0.05 + 0.95 * unit(rng));
        const double lhs = norms.dual_norm(apply_history(k, u1, t) - apply_history(k, u2, t));
        const double rhs = L * simpson([&](double s) { return norms.state_norm(u1(s) - u2(s)); }, 0.0, t);
        worst = std::max(worst, lhs - rhs);
    }
    verdict(7, worst <= 1e-8,
            fmt("100 pairs, L = c_E c_q = %.3f, max lhs - rhs = %.3e, want <= 1e-8", L, worst));
}

void linear_reduction()
{
    const auto sc = load_scenario(scenario("linear.yaml"));
    const auto inst = instance_of(sc);
    const auto& p = inst.problem;
    const int N = 16;
    const auto traj = solve(inst, sc.solver, N);

    // implicit Euler: (A + τB) u^k = A u^{k-1} + τ f(t_{k-1/2}); loads are affine in t
    const double tau = p.T / N;
    const DenseMatrix A(p.A.matrix);
    const DenseMatrix B(p.B.matrix);
    const Eigen::PartialPivLU<DenseMatrix> lu(A + tau * B);
    Vector u = p.u0;
    double worst = (traj.state(0) - u).lpNorm<Eigen::Infinity>();
    for (int kk = 1; kk <= N; ++kk) {
        u = lu.solve(A * u + tau * p.load((kk - 0.5) * tau));
        worst = std::max(worst, (traj.state(kk) - u).lpNorm<Eigen::Infinity>());
    }
    verdict(8, worst <= 1e-10, fmt("J = 0, C = 0, %.0f steps: max |u_rothe - u_oracle| = %.2e, want <= 1e-10", N, worst));
}

void patch_and_symmetry()
{
    using namespace fem;
    const double a = 0.3;
    const double b = -0.2;
    const IsotropicTensor C{0.8, 1.7};
    Tensor2 eps;
    eps << a, 0.5 * b, 0.5 * b, 0.0;
    const Tensor2 sigma = C.apply(eps);
    SideTagging tags;
    tags.set(Side::Left, Region::Gamma1)
        .set(Side::Bottom, Region::Gamma2)
        .set(Side::Top, Region::Gamma2)
        .set(Side::Right, Region::Gamma2);
    const double lx = 2.0;
    const double ly = 1.0;
    auto mesh = generate_rect_mesh(6, 4, lx, ly, tags);
    // perturb interior nodes so the patch is irregular
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> jitter(-0.04, 0.04);
    std::vector<Point> nodes = mesh.nodes;
    for (auto& x : nodes) {
        if (x.x() > 1e-12 && x.x() < lx - 1e-12 && x.y() > 1e-12 && x.y() < ly - 1e-12) {
            x += Point(jitter(rng), jitter(rng));
        }
    }
    std::vector<TriMesh::TaggedEdge> edges;
    for (const auto& e : mesh.boundary_edges) {
        edges.push_back({e.a, e.b, static_cast<int>(e.region)});
    }
    mesh = TriMesh::build(nodes, mesh.triangles, edges);
    const auto dofs = DofMap::build(mesh);
    const VectorField traction = [&](double x, double y, double) {
        Point nrm = Point::Zero();
        if (std::abs(x - lx) < 1e-12) {
            nrm = Point(1, 0);
        } else if (std::abs(y - ly) < 1e-12) {
            nrm = Point(0, 1);
        } else if (std::abs(y) < 1e-12) {
            nrm = Point(0, -1);
        }
        return Point(sigma * nrm);
    };
    const auto K = assemble_elastic_matrix(mesh, dofs, C);
    const Vector F = assemble_load(mesh, dofs, {}, traction, 0.0);
    const Vector u = Eigen::PartialPivLU<DenseMatrix>(DenseMatrix(K)).solve(F);
    const Vector exact = interpolant_P1(mesh, dofs, [&](double x, double) { return Point(a * x, b * x); });
    const double patch = (u - exact).lpNorm<Eigen::Infinity>();

    double asym = 0.0;
    const auto check = [&](const SparseMatrix& S) {
        const DenseMatrix D(S);
        asym = std::max(asym, (D - D.transpose()).lpNorm<Eigen::Infinity>());
    };
    check(K);
    check(assemble_elastic_matrix_full(mesh, C));
    check(assemble_strain_gram(mesh, dofs));
    const auto sc = load_scenario(scenario("frictionless_quadratic.yaml"));
    const auto inst = instance_of(sc);
    check(inst.problem.A.matrix);
    check(inst.problem.B.matrix);
    for (const auto& term : inst.problem.kernel.terms) {
        check(term.matrix);
    }
    verdict(9, patch <= 1e-10 && asym <= 1e-12,
            fmt("patch test max error %.2e (want <= 1e-10); max |K - K^T| = %.2e (want <= 1e-12)", patch, asym));
}

void relaxed_monotonicity()
{
    bool ok = true;
    std::string detail;
    std::vector<contact::LawParameters> params(3);
    params[1].stiffness = 4.0;
    params[1].threshold = 0.05;
    params[1].residual_ratio = 0.2;
    params[2].stiffness = 0.3;
    params[2].threshold = 2.0;
    params[2].residual_ratio = 0.9;
    for (const auto& name : contact::law_names()) {
        double worst = INFINITY;
        for (const auto& lp : params) {
            const auto law = contact::law_catalog(name, lp);
            const auto audit = audit_potential(law.potential, 4000, 10.0, 11);
            ok = ok && audit.passes();
            worst = std::min(worst, audit.monotonicity_slack);
        }
        detail += " " + name + fmt(" %.1e", worst);
    }
    verdict(10, ok, "sampled m|u-v|^2 - [J0(u;v-u)+J0(v;u-v)], min per law:" + detail + " (want >= 0)");
}

} // namespace

int main()
{
    const std::vector<std::function<void()>> criteria = {
        rate, temporal_order, oracle_equivalence, uniqueness, apriori_bounds,
        interpolant_gap, history_lipschitz, linear_reduction, patch_and_symmetry, relaxed_monotonicity};
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        try {
            criteria[i]();
        } catch (const std::exception& e) {
            verdict(static_cast<int>(i + 1), false, std::string("threw: ") + e.what());
        }
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
