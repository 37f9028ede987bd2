#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hvi {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class ErrorCode {
    NonCoercive,
    TimeOutOfRange,
    IndexOutOfRange,
    DimensionMismatch,
    NoConvergence,
    TauTooLarge,
    BracketFailure,
    BoundaryHit,
    InvalidTagging,
    InvalidMesh,
    DirichletMismatch,
    EmptyContactBoundary,
    SmallnessViolated,
    UnknownLaw,
    NotNested,
    DegenerateFit,
    InvalidArgument,
    ParseError,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Library exception. Carries a machine-readable code and, for failures inside
/// the time loop, the index of the step that failed.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::optional<int> step = std::nullopt);

    ErrorCode code() const noexcept { return code_; }
    std::optional<int> step() const noexcept { return step_; }

    /// Same error annotated with a step index (or an outer context string).
    Error at_step(int step) const;
    Error with_context(const std::string& context) const;

private:
    ErrorCode code_;
    std::optional<int> step_;
};

/// Closed interval [lo, hi] on the real line.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x, double slack = 0.0) const { return x >= lo - slack && x <= hi + slack; }
    double project(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
    double distance(double x) const { return x < lo ? lo - x : (x > hi ? x - hi : 0.0); }
    Interval hull(const Interval& other) const
    {
        return {lo < other.lo ? lo : other.lo, hi > other.hi ? hi : other.hi};
    }
};

} // namespace hvi
