#include "hvi/convergence_lab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

namespace hvi::study {

namespace {

constexpr double kBaryTol = 1e-9;

// Uniform bucket grid over the triangles of a mesh for point location.
class TriangleLocator {
public:
    explicit TriangleLocator(const fem::TriMesh& mesh) : mesh_(mesh)
    {
        lo_ = hi_ = mesh.nodes.front();
        for (const auto& p : mesh.nodes) {
            lo_ = lo_.cwiseMin(p);
            hi_ = hi_.cwiseMax(p);
        }
        const double nt = static_cast<double>(mesh.triangles.size());
        n_ = std::max(1, static_cast<int>(std::sqrt(nt)));
        const fem::Point ext = (hi_ - lo_).cwiseMax(1e-300);
        cell_ = ext / n_;
        buckets_.resize(static_cast<std::size_t>(n_ * n_));
        for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
            fem::Point a = node(t, 0);
            fem::Point b = a;
            for (int i = 1; i < 3; ++i) {
                a = a.cwiseMin(node(t, i));
                b = b.cwiseMax(node(t, i));
            }
            const auto [i0, j0] = bucket(a - 1e-9 * ext);
            const auto [i1, j1] = bucket(b + 1e-9 * ext);
            for (int j = j0; j <= j1; ++j) {
                for (int i = i0; i <= i1; ++i) {
                    buckets_[static_cast<std::size_t>(j * n_ + i)].push_back(t);
                }
            }
        }
    }

    Eigen::Vector3d barycentric(int t, const fem::Point& p) const
    {
        const fem::Point a = node(t, 0);
        Eigen::Matrix2d J;
        J.col(0) = node(t, 1) - a;
        J.col(1) = node(t, 2) - a;
        const Eigen::Vector2d l = J.partialPivLu().solve(p - a);
        return {1.0 - l.x() - l.y(), l.x(), l.y()};
    }

    // Triangle containing p (with tolerance), or -1.
    int locate(const fem::Point& p) const
    {
        const auto [i, j] = bucket(p);
        int best = -1;
        double best_min = -std::numeric_limits<double>::infinity();
        for (int t : buckets_[static_cast<std::size_t>(j * n_ + i)]) {
            const double m = barycentric(t, p).minCoeff();
            if (m > best_min) {
                best_min = m;
                best = t;
            }
        }
        return best_min >= -kBaryTol ? best : -1;
    }

private:
    fem::Point node(int t, int i) const
    {
        return mesh_.nodes[static_cast<std::size_t>(mesh_.triangles[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)])];
    }

    std::pair<int, int> bucket(const fem::Point& p) const
    {
        auto clampi = [&](double v) { return std::clamp(static_cast<int>(std::floor(v)), 0, n_ - 1); };
        return {clampi((p.x() - lo_.x()) / cell_.x()), clampi((p.y() - lo_.y()) / cell_.y())};
    }

    const fem::TriMesh& mesh_;
    fem::Point lo_;
    fem::Point hi_;
    fem::Point cell_;
    int n_ = 1;
    std::vector<std::vector<int>> buckets_;
};

double norm_sq(const SpaceNorms& norms, const Vector& v)
{
    const double n = norms.state_norm(v);
    return n * n;
}

int time_ratio(const DiscreteTrajectory& coarse, const DiscreteTrajectory& fine)
{
    const int Nc = coarse.grid.N;
    const int Nf = fine.grid.N;
    if (Nc < 1 || Nf % Nc != 0 || std::abs(coarse.grid.T - fine.grid.T) > 1e-12 * fine.grid.T) {
        throw Error(ErrorCode::NotNested, "time grids with " + std::to_string(Nc) + " and " + std::to_string(Nf) +
                                              " steps are not nested");
    }
    return Nf / Nc;
}

} // namespace

// ------------------------------------------------------------ prolongation

Prolongation Prolongation::build(const fem::TriMesh& coarse, const fem::DofMap& cd, const fem::TriMesh& fine,
                                 const fem::DofMap& fd)
{
    const TriangleLocator loc(coarse);

    for (int t = 0; t < static_cast<int>(fine.triangles.size()); ++t) {
        const auto& tri = fine.triangles[static_cast<std::size_t>(t)];
        fem::Point c = fem::Point::Zero();
        for (int v : tri) {
            c += fine.nodes[static_cast<std::size_t>(v)] / 3.0;
        }
        const int host = loc.locate(c);
        bool inside = host >= 0;
        for (int v = 0; inside && v < 3; ++v) {
            inside = loc.barycentric(host, fine.nodes[static_cast<std::size_t>(tri[static_cast<std::size_t>(v)])])
                         .minCoeff() >= -kBaryTol;
        }
        if (!inside) {
            throw Error(ErrorCode::NotNested, "fine triangle " + std::to_string(t) + " is not inside a coarse triangle");
        }
    }

    std::vector<Triplet> trips;
    for (int i = 0; i < static_cast<int>(fine.nodes.size()); ++i) {
        const auto& fdof = fd.node_dofs[static_cast<std::size_t>(i)];
        if (fdof[0] < 0) {
            continue;
        }
        const fem::Point& p = fine.nodes[static_cast<std::size_t>(i)];
        const int t = loc.locate(p);
        if (t < 0) {
            throw Error(ErrorCode::NotNested, "fine node " + std::to_string(i) + " lies outside the coarse mesh");
        }
        const Eigen::Vector3d lam = loc.barycentric(t, p);
        const auto& tri = coarse.triangles[static_cast<std::size_t>(t)];
        for (int v = 0; v < 3; ++v) {
            if (std::abs(lam[v]) < 1e-14) {
                continue;
            }
            const auto& cdof = cd.node_dofs[static_cast<std::size_t>(tri[static_cast<std::size_t>(v)])];
            if (cdof[0] < 0) {
                continue;
            }
            trips.emplace_back(fdof[0], cdof[0], lam[v]);
            trips.emplace_back(fdof[1], cdof[1], lam[v]);
        }
    }
    Prolongation out;
    out.P_.resize(fd.free_count, cd.free_count);
    out.P_.setFromTriplets(trips.begin(), trips.end());

    double scale = 0.0;
    for (const auto& p : fine.nodes) {
        scale = std::max(scale, p.cwiseAbs().maxCoeff());
    }
    scale = std::max(scale, 1e-300);
    auto key = [scale](const fem::Point& p) {
        return std::make_pair(std::llround(p.x() / scale * 1e9), std::llround(p.y() / scale * 1e9));
    };
    std::map<std::pair<long long, long long>, int> fine_index;
    for (int i = 0; i < static_cast<int>(fine.nodes.size()); ++i) {
        fine_index.emplace(key(fine.nodes[static_cast<std::size_t>(i)]), i);
    }
    trips.clear();
    for (int v = 0; v < static_cast<int>(coarse.nodes.size()); ++v) {
        const auto& cdof = cd.node_dofs[static_cast<std::size_t>(v)];
        const fem::Point& p = coarse.nodes[static_cast<std::size_t>(v)];
        const auto it = fine_index.find(key(p));
        if (it == fine_index.end() || (fine.nodes[static_cast<std::size_t>(it->second)] - p).norm() > 1e-10 * scale) {
            throw Error(ErrorCode::NotNested, "coarse node " + std::to_string(v) + " is not a fine node");
        }
        if (cdof[0] < 0) {
            continue;
        }
        const auto& fdof = fd.node_dofs[static_cast<std::size_t>(it->second)];
        if (fdof[0] < 0) {
            throw Error(ErrorCode::NotNested, "free coarse node " + std::to_string(v) + " is clamped on the fine mesh");
        }
        trips.emplace_back(cdof[0], fdof[0], 1.0);
        trips.emplace_back(cdof[1], fdof[1], 1.0);
    }
    out.R_.resize(cd.free_count, fd.free_count);
    out.R_.setFromTriplets(trips.begin(), trips.end());
    return out;
}

Prolongation Prolongation::identity(Eigen::Index n)
{
    Prolongation out;
    out.P_ = sparse_identity(n);
    out.R_ = out.P_;
    return out;
}

// ----------------------------------------------------------------- errors

double v_norm_error(const Prolongation& P, const SpaceNorms& ref_norms, const DiscreteTrajectory& coarse,
                    const DiscreteTrajectory& ref)
{
    const int R = time_ratio(coarse, ref);
    if (P.matrix().cols() != coarse.state(0).size() || P.matrix().rows() != ref.state(0).size()) {
        throw Error(ErrorCode::DimensionMismatch, "prolongation does not match the trajectories");
    }
    double err = 0.0;
    for (int n = 1; n <= coarse.grid.N; ++n) {
        err = std::max(err, ref_norms.state_norm(ref.state(n * R) - P.prolong(coarse.state(n))));
    }
    return err;
}

double v_norm_error(const LevelSolution& coarse, const LevelSolution& ref)
{
    const auto P = Prolongation::build(coarse.instance.mesh, coarse.instance.dofs, ref.instance.mesh, ref.instance.dofs);
    return v_norm_error(P, ref.instance.problem.norms, coarse.trajectory, ref.trajectory);
}

// ------------------------------------------------------------- Céa terms

InterpolantSource nodal_interpolant_source(const Prolongation& P, const DiscreteTrajectory& level,
                                           const DiscreteTrajectory& ref)
{
    const int R = time_ratio(level, ref);
    return [&P, &ref, R](int n) { return P.restrict_nodal(ref.state(n * R)); };
}

CeaTerms cea_terms(const AbstractHVI& p, const DiscreteTrajectory& ref, const Prolongation& P,
                   const DiscreteTrajectory& level, const InterpolantSource& source)
{
    const int R = time_ratio(level, ref);
    const int Nr = ref.grid.N;
    const double k = level.grid.tau;
    const double tr = ref.grid.tau;
    const auto& norms = p.norms;

    auto u = [&](int n) -> const Vector& { return ref.state(n * R); };
    auto derivative = [&](int i) -> Vector {
        if (i < Nr) {
            return (ref.state(i + 1) - ref.state(i - 1)) / (2.0 * tr);
        }
        if (Nr >= 2) {
            return (3.0 * ref.state(i) - 4.0 * ref.state(i - 1) + ref.state(i - 2)) / (2.0 * tr);
        }
        return (ref.state(i) - ref.state(i - 1)) / tr;
    };

    CeaTerms c;
    Vector d_prev = u(0) - P.prolong(source(0));
    c.max_interp_sq = norm_sq(norms, d_prev);
    for (int l = 1; l <= level.grid.N; ++l) {
        const Vector v = P.prolong(source(l));
        const Vector d = u(l) - v;
        c.interp_sq += k * norm_sq(norms, Vector((d - d_prev) / k));
        c.max_interp_sq = std::max(c.max_interp_sq, norm_sq(norms, d));
        c.trace_sum += k * norms.constraint_norm(p.M * d);

        const int i = l * R;
        const Vector du = derivative(i);
        c.delta_sum += k * norm_sq(norms, Vector((u(l) - u(l - 1)) / k - du));

        const Vector w = v - u(l);
        const Vector y = p.A.matrix * du + p.B.matrix * u(l) + ref.history(i) - p.load(ref.grid.node(i));
        double S = y.dot(w);
        const Vector Mu = p.M * u(l);
        const Vector Mw = p.M * w;
        for (Eigen::Index r = 0; r < Mu.size(); ++r) {
            S += norms.weight(r) * p.potentials[static_cast<std::size_t>(r)].clarke_dd(Mu[r], Mw[r]);
        }
        c.residual_sum += k * std::abs(S);
        d_prev = d;
    }
    return c;
}

// -------------------------------------------------------------- fitting

FitResult fit_rate(const std::vector<double>& x, const std::vector<double>& error)
{
    if (x.size() != error.size()) {
        throw Error(ErrorCode::DimensionMismatch, "fit needs one error per abscissa");
    }
    if (x.size() < 3) {
        throw Error(ErrorCode::InvalidArgument, "fit needs at least three levels");
    }
    if (std::all_of(error.begin(), error.end(), [](double e) { return std::abs(e) < 1e-13; })) {
        throw Error(ErrorCode::DegenerateFit, "all errors are below 1e-13");
    }
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd A(n, 2);
    Vector b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double xi = x[static_cast<std::size_t>(i)];
        const double ei = error[static_cast<std::size_t>(i)];
        if (!(xi > 0.0) || !(ei > 0.0)) {
            throw Error(ErrorCode::DegenerateFit, "fit needs positive abscissae and errors");
        }
        A(i, 0) = 1.0;
        A(i, 1) = std::log(xi);
        b[i] = std::log(ei);
    }
    const Eigen::Vector2d coef = A.colPivHouseholderQr().solve(b);
    FitResult r;
    r.C = std::exp(coef[0]);
    r.p = coef[1];
    r.residual = std::sqrt((A * coef - b).squaredNorm() / static_cast<double>(n));
    return r;
}

FitResult fit_rate(const std::vector<StudyLevel>& levels)
{
    std::vector<double> x;
    std::vector<double> e;
    for (const auto& l : levels) {
        x.push_back(l.h + l.k);
        e.push_back(l.error);
    }
    return fit_rate(x, e);
}

// ---------------------------------------------------------------- studies

namespace {

void fill_rates(ConvergenceReport& report)
{
    auto& lv = report.levels;
    std::sort(lv.begin(), lv.end(), [](const StudyLevel& a, const StudyLevel& b) { return a.h + a.k > b.h + b.k; });
    for (std::size_t i = 0; i < lv.size(); ++i) {
        if (i == 0) {
            lv[i].rate = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        lv[i].rate = std::log(lv[i - 1].error / lv[i].error) /
                     std::log((lv[i - 1].h + lv[i - 1].k) / (lv[i].h + lv[i].k));
    }
    const auto fit = fit_rate(lv);
    report.fitted_rate = fit.p;
    report.constant = fit.C;
    report.fit_residual = fit.residual;
    if (!lv.empty() && lv.front().terms) {
        double cmax = 0.0;
        for (const auto& l : lv) {
            const double ratio = l.error * l.error / (l.terms->total() + l.k * l.k);
            report.cea_ratios.push_back(ratio);
            cmax = std::max(cmax, ratio);
        }
        report.cea_constant = cmax;
    }
}

void check_study_options(const StudyOptions& o)
{
    if (o.levels < 3) {
        throw Error(ErrorCode::InvalidArgument, "a study needs at least 3 levels");
    }
    if (o.ref_extra < 2) {
        throw Error(ErrorCode::InvalidArgument, "the reference must be at least 2 levels finer");
    }
    if (o.threads < 1) {
        throw Error(ErrorCode::InvalidArgument, "thread count must be at least 1");
    }
}

// Runs tasks 0..n-1 on up to `threads` workers; rethrows the first failure.
template <class F>
void parallel_for(int n, int threads, F&& task)
{
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) {
            task(i);
        }
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex m;
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(threads, n); ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(m);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

LevelSolution solve_level(const contact::ContactConfig& cc, int level, const StudyOptions& o)
{
    try {
        contact::ContactConfig c = cc;
        c.mesh = cc.mesh.refined(level);
        c.steps = cc.steps << level;
        LevelSolution out{contact::build_abstract(c, o.build), {}};
        RotheOptions ro;
        ro.solver = o.solver;
        ro.skip_validation = true;
        ro.tau0 = out.instance.report.tau0;
        out.trajectory = run_rothe(out.instance.problem, c.steps, ro);
        return out;
    } catch (const Error& e) {
        throw e.with_context("level " + std::to_string(level));
    }
}

} // namespace

ConvergenceReport run_study(const contact::ContactConfig& cc, const StudyOptions& o)
{
    check_study_options(o);
    if (!cc.mesh.file.empty()) {
        throw Error(ErrorCode::InvalidArgument, "joint studies need a generated (refinable) mesh");
    }
    const int ref_level = o.levels - 1 + o.ref_extra;

    std::vector<LevelSolution> sols(static_cast<std::size_t>(o.levels) + 1);
    std::vector<double> secs(sols.size(), 0.0);
    // Task 0 is the reference so that it starts first.
    parallel_for(static_cast<int>(sols.size()), o.threads, [&](int i) {
        const auto t0 = std::chrono::steady_clock::now();
        const int level = i == 0 ? ref_level : i - 1;
        sols[static_cast<std::size_t>(i)] = solve_level(cc, level, o);
        secs[static_cast<std::size_t>(i)] = seconds_since(t0);
    });

    const LevelSolution& ref = sols.front();
    ConvergenceReport report;
    report.kind = "joint";
    report.reference_h = ref.instance.mesh.h;
    report.reference_k = ref.trajectory.grid.tau;
    report.reference_steps = ref.trajectory.grid.N;
    report.levels.resize(static_cast<std::size_t>(o.levels));
    parallel_for(o.levels, o.threads, [&](int l) {
        const auto t0 = std::chrono::steady_clock::now();
        const LevelSolution& s = sols[static_cast<std::size_t>(l) + 1];
        const auto P = Prolongation::build(s.instance.mesh, s.instance.dofs, ref.instance.mesh, ref.instance.dofs);
        StudyLevel& out = report.levels[static_cast<std::size_t>(l)];
        out.level = l;
        out.h = s.instance.mesh.h;
        out.k = s.trajectory.grid.tau;
        out.steps = s.trajectory.grid.N;
        out.dofs = s.instance.dofs.free_count;
        out.error = v_norm_error(P, ref.instance.problem.norms, s.trajectory, ref.trajectory);
        if (o.cea) {
            out.terms = cea_terms(ref.instance.problem, ref.trajectory, P, s.trajectory,
                                  nodal_interpolant_source(P, s.trajectory, ref.trajectory));
        }
        out.seconds = secs[static_cast<std::size_t>(l) + 1] + seconds_since(t0);
    });
    fill_rates(report);
    return report;
}

ConvergenceReport run_time_study(const AbstractHVI& p, int N0, const StudyOptions& o)
{
    check_study_options(o);
    if (N0 < 1) {
        throw Error(ErrorCode::InvalidArgument, "need at least one time step");
    }
    const double tau0 = contact::smallness_report(p).tau0;
    auto solve = [&](int steps) {
        RotheOptions ro;
        ro.solver = o.solver;
        ro.skip_validation = true;
        ro.tau0 = tau0;
        try {
            return run_rothe(p, steps, ro);
        } catch (const Error& e) {
            throw e.with_context(std::to_string(steps) + " steps");
        }
    };
    std::vector<DiscreteTrajectory> trajs(static_cast<std::size_t>(o.levels) + 1);
    std::vector<double> secs(trajs.size(), 0.0);
    parallel_for(static_cast<int>(trajs.size()), o.threads, [&](int i) {
        const auto t0 = std::chrono::steady_clock::now();
        const int level = i == 0 ? o.levels - 1 + o.ref_extra : i - 1;
        trajs[static_cast<std::size_t>(i)] = solve(N0 << level);
        secs[static_cast<std::size_t>(i)] = seconds_since(t0);
    });
    const auto& ref = trajs.front();
    const auto I = Prolongation::identity(p.dim());

    ConvergenceReport report;
    report.kind = "time";
    report.reference_k = ref.grid.tau;
    report.reference_steps = ref.grid.N;
    for (int l = 0; l < o.levels; ++l) {
        const auto& t = trajs[static_cast<std::size_t>(l) + 1];
        StudyLevel s;
        s.level = l;
        s.k = t.grid.tau;
        s.steps = t.grid.N;
        s.dofs = p.dim();
        s.error = v_norm_error(I, p.norms, t, ref);
        s.seconds = secs[static_cast<std::size_t>(l) + 1];
        report.levels.push_back(s);
    }
    fill_rates(report);
    return report;
}

// ----------------------------------------------------------------- export

void write_report_csv(std::ostream& out, const ConvergenceReport& report)
{
    out << "level,h,k,steps,dofs,error,rate\n";
    char buf[256];
    for (const auto& l : report.levels) {
        std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%d,%ld,%.10g,", l.level, l.h, l.k, l.steps,
                      static_cast<long>(l.dofs), l.error);
        out << buf;
        if (std::isfinite(l.rate)) {
            std::snprintf(buf, sizeof buf, "%.6f", l.rate);
            out << buf;
        }
        out << '\n';
    }
}

void write_plot_script(const std::string& dir, const std::string& stem, const ConvergenceReport& report)
{
    const auto base = std::filesystem::path(dir);
    const auto dat = base / (stem + ".dat");
    const auto gp = base / (stem + ".gp");
    std::ofstream d(dat);
    std::ofstream g(gp);
    if (!d || !g) {
        throw Error(ErrorCode::IoError, "cannot write plot files in " + dir);
    }
    char buf[128];
    d << "# h+k error first-order-guide\n";
    const double anchor = report.levels.empty() ? 1.0 : report.levels.back().error / (report.levels.back().h + report.levels.back().k);
    for (const auto& l : report.levels) {
        const double x = l.h + l.k;
        std::snprintf(buf, sizeof buf, "%.10g %.10g %.10g\n", x, l.error, anchor * x);
        d << buf;
    }
    std::snprintf(buf, sizeof buf, "%.4f", report.fitted_rate);
    g << "set logscale xy\n"
      << "set xlabel 'h + k'\n"
      << "set ylabel 'max_n error'\n"
      << "set key left top\n"
      << "set title 'fitted rate " << buf << "'\n"
      << "plot '" << stem << ".dat' using 1:2 with linespoints title 'error', \\\n"
      << "     '" << stem << ".dat' using 1:3 with lines dashtype 2 title 'slope 1'\n";
}

} // namespace hvi::study
