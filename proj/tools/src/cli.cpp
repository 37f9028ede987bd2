#include "cli.hpp"

#include "hvi/contact_model.hpp"
#include "hvi/convergence_lab.hpp"
#include "hvi/oracle_suite.hpp"
#include "hvi/rothe.hpp"
#include "hvi/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace hvi::cli {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// JSON has no infinity; non-finite values are written as strings.
ordered_json num(double v)
{
    if (std::isfinite(v)) {
        return v;
    }
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

int exit_code_for(const Error& e)
{
    switch (e.code()) {
    case ErrorCode::ParseError:
    case ErrorCode::UnknownLaw:
    case ErrorCode::IoError:
    case ErrorCode::InvalidArgument:
        return UsageError;
    default:
        return DomainFailure;
    }
}

ordered_json manifest_json(const RunManifest& m)
{
    ordered_json j;
    j["command"] = m.command;
    j["scenario"] = m.scenario;
    j["out"] = m.out;
    j["seed"] = m.seed;
    j["threads"] = m.threads;
    j["steps"] = m.steps ? ordered_json(*m.steps) : ordered_json();
    j["levels"] = m.levels ? ordered_json(*m.levels) : ordered_json();
    ordered_json tol;
    tol["tol"] = m.tol ? ordered_json(*m.tol) : ordered_json();
    tol["max_iter"] = m.max_iter ? ordered_json(*m.max_iter) : ordered_json();
    j["tolerance_overrides"] = tol;
    if (m.command == "oracle") {
        j["count"] = m.count;
    }
    if (m.command == "converge") {
        j["cea"] = m.cea;
    }
    return j;
}

fs::path prepare_out(const RunManifest& m)
{
    const fs::path dir(m.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw Error(ErrorCode::IoError, "cannot create output directory " + m.out);
    }
    std::ofstream probe(dir / "manifest.json");
    if (!probe) {
        throw Error(ErrorCode::IoError, "output directory " + m.out + " is not writable");
    }
    probe << manifest_json(m).dump(2) << '\n';
    return dir;
}

void write_json(const fs::path& path, const ordered_json& j)
{
    std::ofstream f(path);
    if (!f) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
    f << j.dump(2) << '\n';
}

Scenario load_with_overrides(const RunManifest& m)
{
    if (m.scenario.empty()) {
        throw Error(ErrorCode::InvalidArgument, "--scenario is required");
    }
    Scenario sc = load_scenario(m.scenario);
    if (m.steps) {
        if (*m.steps < 1) {
            throw Error(ErrorCode::InvalidArgument, "--steps must be at least 1");
        }
        sc.config.steps = *m.steps;
    }
    if (m.tol) {
        sc.solver.tol = *m.tol;
    }
    if (m.max_iter) {
        sc.solver.max_iter = *m.max_iter;
    }
    sc.solver.check();
    return sc;
}

ordered_json report_json(const HypothesisReport& r)
{
    ordered_json j;
    j["all_hold"] = r.all_hold();
    j["h0_holds"] = r.h0_holds;
    j["tau0"] = num(r.tau0);
    j["m_J"] = num(r.m_J);
    j["coupling_norm"] = num(r.coupling_norm);
    ordered_json margins = ordered_json::array();
    for (const auto& mg : r.margins) {
        margins.push_back({{"name", mg.name},
                           {"value", num(mg.value)},
                           {"slack", num(mg.slack)},
                           {"holds", mg.holds},
                           {"detail", mg.detail}});
    }
    j["hypotheses"] = margins;
    return j;
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

template <class F>
int guarded(std::ostream& err, F&& body)
{
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return DomainFailure;
    }
}

} // namespace

int cmd_validate(const RunManifest& m, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Scenario sc = load_with_overrides(m);
        contact::BuildOptions bo;
        bo.check_smallness = false;
        bo.audit = true;
        bo.validation.seed = m.seed;
        const auto inst = contact::build_abstract(sc.config, bo);
        const auto& r = inst.report;
        out << "scenario " << sc.name << ": " << inst.dofs.free_count << " dofs, " << inst.trace.nodes.size()
            << " contact nodes\n";
        for (const auto& mg : r.margins) {
            out << (mg.holds ? "  ok    " : "  FAIL  ") << mg.name << "  value " << fmt(mg.value) << "  slack "
                << fmt(mg.slack) << "  (" << mg.detail << ")\n";
        }
        out << "tau0 = " << (std::isinf(r.tau0) ? std::string("inf") : fmt(r.tau0)) << '\n';
        if (!m.out.empty() && m.out != "-") {
            const auto dir = prepare_out(m);
            write_json(dir / "hypotheses.json", report_json(r));
        }
        if (r.all_hold()) {
            return static_cast<int>(Success);
        }
        for (const auto& mg : r.margins) {
            if (!mg.holds) {
                err << "violated: " << mg.name << '\n';
            }
        }
        return static_cast<int>(DomainFailure);
    });
}

int cmd_solve(const RunManifest& m, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Scenario sc = load_with_overrides(m);
        contact::BuildOptions bo;
        bo.check_smallness = sc.check_smallness;
        bo.audit = false;
        const auto inst = contact::build_abstract(sc.config, bo);
        RotheOptions ro;
        ro.solver = sc.solver;
        ro.skip_validation = true;
        ro.tau0 = inst.report.tau0;
        const auto traj = run_rothe(inst.problem, sc.config.steps, ro);

        const auto dir = prepare_out(m);
        write_trajectory_csv((dir / "trajectory.csv").string(), traj);

        const fs::path fields = dir / "fields";
        fs::create_directories(fields);
        ordered_json series;
        series["file-series-version"] = "1.0";
        series["files"] = ordered_json::array();
        for (int k = 0; k <= traj.grid.N; ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "step_%05d.vtk", k);
            std::ofstream f(fields / name);
            if (!f) {
                throw Error(ErrorCode::IoError, "cannot write " + (fields / name).string());
            }
            const auto stress = k == 0 ? std::vector<fem::Tensor2>{} : contact::recover_stress(inst, traj, k);
            fem::write_vtk(f, inst.mesh, inst.dofs, traj.state(k), stress, sc.name + " t=" + fmt(traj.grid.node(k)));
            series["files"].push_back({{"name", std::string("fields/") + name}, {"time", traj.grid.node(k)}});
        }
        write_json(dir / "fields.vtk.series", series);

        const auto est = apriori_audit(traj);
        ordered_json audit;
        audit["steps"] = traj.grid.N;
        audit["tau"] = traj.grid.tau;
        audit["dofs"] = inst.dofs.free_count;
        audit["max_state"] = est.max_state;
        audit["sum_sq_increments"] = est.sum_sq_increments;
        audit["max_selection"] = est.max_selection;
        audit["sum_sq_rates"] = est.sum_sq_rates;
        audit["interp_gap_sq"] = std::pow(interp_gap(traj), 2);
        audit["interp_gap_sq_bound"] = interp_gap_bound(traj);
        double max_res = 0.0;
        int max_it = 0;
        for (std::size_t i = 0; i < traj.residuals.size(); ++i) {
            max_res = std::max(max_res, traj.residuals[i]);
            max_it = std::max(max_it, traj.iterations[i]);
        }
        audit["max_step_residual"] = max_res;
        audit["max_step_iterations"] = max_it;
        audit["smallness"] = report_json(inst.report);
        write_json(dir / "audit.json", audit);

        out << "solved " << sc.name << ": " << traj.grid.N << " steps, " << inst.dofs.free_count << " dofs, max |u| "
            << fmt(est.max_state) << ", outputs in " << dir.string() << '\n';
        return static_cast<int>(Success);
    });
}

int cmd_converge(const RunManifest& m, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Scenario sc = load_with_overrides(m);
        study::StudyOptions so;
        so.levels = m.levels.value_or(sc.study.levels);
        so.ref_extra = sc.study.ref_extra;
        so.threads = m.threads;
        so.cea = m.cea;
        so.solver = sc.solver;
        so.build.check_smallness = sc.check_smallness;
        so.build.audit = false;
        if (so.levels < 3) {
            err << "error: a convergence study needs --levels >= 3\n";
            return static_cast<int>(UsageError);
        }
        const auto report = study::run_study(sc.config, so);

        const auto dir = prepare_out(m);
        {
            std::ofstream csv(dir / "report.csv");
            study::write_report_csv(csv, report);
        }
        study::write_plot_script(dir.string(), "convergence", report);
        ordered_json summary;
        summary["scenario"] = sc.name;
        summary["kind"] = report.kind;
        summary["fitted_rate"] = num(report.fitted_rate);
        summary["constant"] = num(report.constant);
        summary["fit_residual"] = num(report.fit_residual);
        summary["rate_threshold"] = sc.study.rate_threshold;
        summary["passed"] = !report.below(sc.study.rate_threshold);
        summary["reference"] = {{"h", report.reference_h}, {"k", report.reference_k}, {"steps", report.reference_steps}};
        ordered_json levels = ordered_json::array();
        for (const auto& l : report.levels) {
            ordered_json lj{{"level", l.level}, {"h", l.h},         {"k", l.k},
                            {"steps", l.steps}, {"dofs", l.dofs},   {"error", num(l.error)},
                            {"rate", num(l.rate)}};
            if (l.terms) {
                lj["cea"] = {{"interp_sq", l.terms->interp_sq},
                             {"max_interp_sq", l.terms->max_interp_sq},
                             {"trace_sum", l.terms->trace_sum},
                             {"residual_sum", l.terms->residual_sum},
                             {"delta_sum", l.terms->delta_sum}};
            }
            levels.push_back(lj);
        }
        summary["levels"] = levels;
        if (report.cea_constant) {
            summary["cea_constant"] = *report.cea_constant;
            summary["cea_ratios"] = report.cea_ratios;
        }
        write_json(dir / "summary.json", summary);

        for (const auto& l : report.levels) {
            out << "level " << l.level << "  h " << fmt(l.h) << "  k " << fmt(l.k) << "  error " << fmt(l.error)
                << "  rate " << (std::isfinite(l.rate) ? fmt(l.rate) : std::string("-")) << '\n';
        }
        out << "fitted rate p = " << fmt(report.fitted_rate) << " (threshold " << fmt(sc.study.rate_threshold)
            << ")\n";
        if (report.below(sc.study.rate_threshold)) {
            err << "sub-threshold rate: fitted p = " << fmt(report.fitted_rate) << '\n';
            return static_cast<int>(DomainFailure);
        }
        return static_cast<int>(Success);
    });
}

int cmd_oracle(const RunManifest& m, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        if (m.count < 1) {
            throw Error(ErrorCode::InvalidArgument, "--count must be at least 1");
        }
        const auto summary = oracle::run_oracle_suite(m.count, m.seed);
        for (const auto& r : summary.results) {
            if (!r.passed) {
                out << "case " << r.seed << " (" << r.kind << "): difference " << fmt(r.difference)
                    << (r.error.empty() ? "" : "  " + r.error) << '\n';
            }
        }
        out << summary.results.size() - static_cast<std::size_t>(summary.failures) << "/" << summary.results.size()
            << " step problems agree with brute force; max difference " << fmt(summary.max_difference) << '\n';
        return summary.failures == 0 ? static_cast<int>(Success) : static_cast<int>(DomainFailure);
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Rothe/P1 solver for history-dependent hemivariational inequalities"};
    app.require_subcommand(1);
    RunManifest m;

    auto common = [&](CLI::App* sub, bool needs_scenario) {
        auto* opt = sub->add_option("--scenario", m.scenario, "scenario YAML file");
        if (needs_scenario) {
            opt->required();
        }
        sub->add_option("--out", m.out, "output directory");
        sub->add_option("--seed", m.seed, "random seed");
        sub->add_option("--threads", m.threads, "worker threads")->check(CLI::PositiveNumber);
    };
    auto* validate = app.add_subcommand("validate", "audit the hypotheses of a scenario");
    common(validate, true);
    auto* solve = app.add_subcommand("solve", "run the time stepper and export fields");
    common(solve, true);
    solve->add_option("--steps", m.steps, "number of time steps");
    auto* converge = app.add_subcommand("converge", "joint (h, k) self-convergence study");
    common(converge, true);
    converge->add_option("--levels", m.levels, "number of study levels (>= 3)");
    converge->add_flag("--cea", m.cea, "also compute the best-approximation terms");
    auto* oracle_cmd = app.add_subcommand("oracle", "compare the step solver with brute force");
    common(oracle_cmd, false);
    oracle_cmd->add_option("--count", m.count, "number of random step problems");
    for (auto* sub : {validate, solve, converge}) {
        sub->add_option("--tol", m.tol, "step solver tolerance");
        sub->add_option("--max-iter", m.max_iter, "step solver iteration cap");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Success;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << app.help();
        return UsageError;
    }

    m.command = app.get_subcommands().front()->get_name();
    if (m.command == "validate") {
        if (validate->count("--out") == 0) {
            m.out.clear();
        }
        return cmd_validate(m, out, err);
    }
    if (m.command == "solve") {
        return cmd_solve(m, out, err);
    }
    if (m.command == "converge") {
        return cmd_converge(m, out, err);
    }
    return cmd_oracle(m, out, err);
}

} // namespace hvi::cli
