#pragma once

#include "hvi/nonsmooth_step.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hvi::oracle {

/// A small random step problem with a search box derived from the a-priori
/// bound |u| <= (|rhs| + τ|MᵀW ξ₀|) / (μ − τ m_J ‖M‖²_W), ξ₀ ∈ ∂j(0) of least norm.
struct OracleCase {
    StepProblem problem;
    std::vector<Interval> box;
    /// "convex" or "nonmonotone".
    std::string kind;
    std::uint64_t seed = 0;
};

/// Even seeds give convex potentials (zero, quadratic, abs), odd seeds at
/// least one nonmonotone_drop. State dimension 1 or 2, one or two
/// constraints, smallness margin at least 10%.
OracleCase random_step_case(std::uint64_t seed);

/// Radius of the a-priori ball around 0 that contains the step solution.
double apriori_radius(const StepProblem& sp);

struct OracleResult {
    std::uint64_t seed = 0;
    std::string kind;
    double difference = 0.0;
    bool passed = false;
    std::string error;
};

struct OracleSummary {
    std::vector<OracleResult> results;
    double max_difference = 0.0;
    int failures = 0;
};

/// solve_step against brute_force_step on `count` cases starting at `seed`.
OracleSummary run_oracle_suite(int count, std::uint64_t seed = 0, double tol = 1e-6);

} // namespace hvi::oracle
