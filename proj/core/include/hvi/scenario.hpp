#pragma once

#include "hvi/contact_model.hpp"
#include "hvi/nonsmooth_step.hpp"

#include <string>
#include <vector>

namespace hvi {

/// Σ coef · x^px · y^py · t^pt.
struct Polynomial {
    struct Term {
        double coef = 0.0;
        int px = 0;
        int py = 0;
        int pt = 0;
    };
    std::vector<Term> terms;

    double operator()(double x, double y, double t) const;
    bool empty() const { return terms.empty(); }
};

struct PolynomialField {
    Polynomial x;
    Polynomial y;

    bool empty() const { return x.empty() && y.empty(); }
    /// Empty fields give an empty std::function.
    fem::VectorField as_field() const;
};

struct StudySettings {
    int levels = 4;
    int ref_extra = 2;
    double rate_threshold = 0.8;
};

struct Scenario {
    std::string name;
    std::string source;
    contact::ContactConfig config;
    PolynomialField body_force;
    PolynomialField traction;
    PolynomialField initial_displacement;
    StepSolverConfig solver;
    StudySettings study;
    bool check_smallness = true;
};

/// Parses a YAML scenario. Errors are ParseError ("line N: ...") for malformed
/// input, UnknownLaw for an unknown law name and IoError for unreadable files.
///
///   name: demo
///   geometry: {lx: 1, ly: 1, nx: 4, ny: 4, level: 0,
///              sides: {bottom: contact, right: traction, top: traction, left: clamped}}
///   material:
///     viscosity: {shear: 1, bulk: 0.5}
///     elasticity: {shear: 1, bulk: 1}
///     relaxation: {kind: exponential, shear: 0.2, bulk: 0.1, time_scale: 0.5}
///   law: {name: quadratic, stiffness: 10}
///   loads:
///     body_force: {x: [[coef, px, py, pt], ...], y: [...]}
///     traction: {...}
///   time: {T: 1, steps: 16}
///   solver: {tol: 1e-10, max_iter: 500}
///   study: {levels: 4, ref_extra: 2, rate_threshold: 0.8}
///   check_smallness: true
Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");
Scenario load_scenario(const std::string& path);

} // namespace hvi
