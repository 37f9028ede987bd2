#include "hvi/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>

using namespace hvi;

namespace {

std::string scenario_path(const std::string& name)
{
    return std::string(HVI_SCENARIO_DIR) + "/" + name;
}

ErrorCode code_of(const std::string& text)
{
    try {
        parse_scenario(text);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error for:\n" << text;
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST(Scenario, FullDocument)
{
    const auto sc = parse_scenario(R"(name: demo
geometry: {lx: 2, ly: 1, nx: 3, ny: 2, level: 1,
           sides: {bottom: contact, right: traction, top: traction, left: clamped}}
material:
  viscosity: {shear: 1, bulk: 0.5}
  elasticity: {shear: 2, bulk: 1}
  relaxation: {kind: exponential, shear: 0.2, bulk: 0.1, time_scale: 0.5}
law: {name: quadratic, stiffness: 10}
loads:
  body_force: {x: [[1.5, 1, 0, 1]], y: [[-2, 0, 2, 0], [1, 0, 0, 0]]}
time: {T: 2, steps: 5}
solver: {tol: 1e-9, max_iter: 300}
study: {levels: 5, ref_extra: 3, rate_threshold: 0.7}
check_smallness: false
)");
    EXPECT_EQ(sc.name, "demo");
    EXPECT_EQ(sc.config.mesh.nx, 6);
    EXPECT_EQ(sc.config.mesh.ny, 4);
    EXPECT_DOUBLE_EQ(sc.config.mesh.lx, 2.0);
    EXPECT_DOUBLE_EQ(sc.config.material.viscosity.bulk, 0.5);
    EXPECT_DOUBLE_EQ(sc.config.material.elasticity.shear, 2.0);
    EXPECT_EQ(sc.config.material.relaxation.kind, contact::Relaxation::Kind::Exponential);
    EXPECT_DOUBLE_EQ(sc.config.material.relaxation.time_scale, 0.5);
    EXPECT_EQ(sc.config.law.name, "quadratic");
    EXPECT_DOUBLE_EQ(sc.config.law.c_nu, 10.0);
    EXPECT_DOUBLE_EQ(sc.config.T, 2.0);
    EXPECT_EQ(sc.config.steps, 5);
    EXPECT_DOUBLE_EQ(sc.solver.tol, 1e-9);
    EXPECT_EQ(sc.solver.max_iter, 300);
    EXPECT_EQ(sc.study.levels, 5);
    EXPECT_EQ(sc.study.ref_extra, 3);
    EXPECT_DOUBLE_EQ(sc.study.rate_threshold, 0.7);
    EXPECT_FALSE(sc.check_smallness);

    ASSERT_TRUE(sc.config.f0);
    const auto f = sc.config.f0(0.5, 2.0, 3.0);
    EXPECT_DOUBLE_EQ(f.x(), 1.5 * 0.5 * 3.0);
    EXPECT_DOUBLE_EQ(f.y(), -2.0 * 4.0 + 1.0);
    EXPECT_FALSE(sc.config.fN);
}

TEST(Scenario, DefaultsAreMinimal)
{
    const auto sc = parse_scenario("name: tiny\n");
    EXPECT_EQ(sc.config.law.name, "zero");
    EXPECT_FALSE(sc.config.f0);
    EXPECT_TRUE(sc.check_smallness);
    EXPECT_EQ(sc.study.levels, 4);
}

TEST(Scenario, ErrorsCarryLineNumbers)
{
    try {
        parse_scenario("name: x\ntime:\n  T: 1\n  steps: [1, 2\n");
        FAIL() << "expected ParseError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        EXPECT_NE(std::string(e.what()).find("line "), std::string::npos) << e.what();
    }
    try {
        parse_scenario("name: x\ntime: {T: 1, steps: 4}\nmaterial:\n  viscosity: {shear: one}\n");
        FAIL() << "expected ParseError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
}

TEST(Scenario, RejectsUnknownKeysAndLaws)
{
    EXPECT_EQ(code_of("name: x\ncolour: blue\n"), ErrorCode::ParseError);
    EXPECT_EQ(code_of("name: x\ntime: {T: 1, step: 4}\n"), ErrorCode::ParseError);
    EXPECT_EQ(code_of("name: x\nlaw: {name: coulomb}\n"), ErrorCode::UnknownLaw);
    EXPECT_EQ(code_of("name: x\nloads: {body_force: {x: [[1, 0, 0]]}}\n"), ErrorCode::ParseError);
    EXPECT_EQ(code_of("name: x\nloads: {body_force: {x: [[1, -1, 0, 0]]}}\n"), ErrorCode::ParseError);
    EXPECT_EQ(code_of("name: x\ngeometry: {sides: {bottom: sliding}}\n"), ErrorCode::ParseError);
}

TEST(Scenario, MissingFile)
{
    try {
        load_scenario(scenario_path("does_not_exist.yaml"));
        FAIL() << "expected IoError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
    }
}

TEST(Scenario, ShippedScenariosParse)
{
    for (const auto& entry : std::filesystem::directory_iterator(HVI_SCENARIO_DIR)) {
        if (entry.path().extension() == ".yaml") {
            EXPECT_NO_THROW(load_scenario(entry.path().string())) << entry.path();
        }
    }
}
