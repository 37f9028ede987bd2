#pragma once

#include "hvi/types.hpp"

#include <memory>

namespace hvi {

struct LinearSolverConfig {
    /// Systems with at most this many unknowns are factorized directly.
    Eigen::Index direct_threshold = 200000;
    /// Relative residual tolerance for the iterative fallback.
    double iterative_tol = 1e-12;
    int iterative_max_iter = 20000;
};

/// Factorize-once, solve-many wrapper around Eigen's sparse solvers.
///
/// Symmetric matrices go through LDL^T (or IC-preconditioned CG above the
/// direct threshold); non-symmetric ones through sparse LU (or ILUT BiCGSTAB).
class LinearSolver {
public:
    enum class Method { SymmetricDirect, SymmetricIterative, GeneralDirect, GeneralIterative };

    LinearSolver();
    LinearSolver(const SparseMatrix& matrix, const LinearSolverConfig& config = {});
    ~LinearSolver();
    LinearSolver(LinearSolver&&) noexcept;
    LinearSolver& operator=(LinearSolver&&) noexcept;

    Vector solve(const Vector& rhs) const;
    DenseMatrix solve(const DenseMatrix& rhs) const;

    Eigen::Index size() const { return size_; }
    Method method() const { return method_; }
    /// Diagonal of D in the LDL^T factorization (empty for other methods).
    Vector ldlt_diagonal() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    Eigen::Index size_ = 0;
    Method method_ = Method::SymmetricDirect;
};

/// Relative asymmetry max|a_ij - a_ji| / max|a_ij|.
double relative_asymmetry(const SparseMatrix& matrix);

SparseMatrix sparse_identity(Eigen::Index n);

} // namespace hvi
