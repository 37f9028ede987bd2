#include "hvi/contact_model.hpp"
#include "hvi/nonsmooth_step.hpp"
#include "hvi/oracle_suite.hpp"
#include "hvi/rothe.hpp"

#include <benchmark/benchmark.h>

using namespace hvi;

namespace {

contact::ContactConfig benchmark_config(int n)
{
    contact::ContactConfig cc;
    cc.mesh.nx = n;
    cc.mesh.ny = n;
    cc.material.relaxation = contact::Relaxation::exponential({0.5, 0.0}, 0.5);
    contact::LawParameters lp;
    lp.stiffness = 10.0;
    cc.law = contact::law_catalog("quadratic", lp);
    cc.f0 = [](double x, double, double t) { return fem::Point(0.0, -2.0 * x * x * t); };
    cc.fN = [](double x, double, double t) { return fem::Point(0.5 * x * x * t, -x * x * t); };
    cc.steps = 8;
    return cc;
}

void BM_AssembleElastic(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    const auto mesh = fem::generate_rect_mesh(n, n, 1.0, 1.0, fem::SideTagging::clamped_left_contact_bottom());
    const auto dofs = fem::DofMap::build(mesh);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fem::assemble_elastic_matrix(mesh, dofs, {1.0, 0.5}));
    }
    state.counters["dofs"] = static_cast<double>(dofs.free_count);
}
BENCHMARK(BM_AssembleElastic)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Prox(benchmark::State& state)
{
    const auto j = LipschitzPotential::nonmonotone_drop(1.0, 0.05, 0.5);
    double b = -1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(prox_1d(j, 2.0, 0.1, b));
        b += 1e-6;
    }
}
BENCHMARK(BM_Prox);

void BM_OracleStep(benchmark::State& state)
{
    const auto c = oracle::random_step_case(static_cast<std::uint64_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_step(c.problem));
    }
}
BENCHMARK(BM_OracleStep)->Arg(0)->Arg(1);

void BM_ContactRothe(benchmark::State& state)
{
    contact::BuildOptions bo;
    bo.audit = false;
    const auto inst = contact::build_abstract(benchmark_config(static_cast<int>(state.range(0))), bo);
    RotheOptions ro;
    ro.solver.tol = 1e-10;
    ro.solver.max_iter = 20000;
    ro.solver.accelerate = true;
    ro.skip_validation = true;
    ro.tau0 = inst.report.tau0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_rothe(inst.problem, 8, ro));
    }
    state.counters["dofs"] = static_cast<double>(inst.dofs.free_count);
}
BENCHMARK(BM_ContactRothe)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
