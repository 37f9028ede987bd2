#include "hvi/linear_solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <variant>

namespace hvi {

namespace {

using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
using Pcg = Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                                     Eigen::IncompleteCholesky<double>>;
using Lu = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;
using Bicg = Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>>;

constexpr double kSymmetryTolerance = 1e-12;

} // namespace

struct LinearSolver::Impl {
    SparseMatrix matrix;
    std::variant<std::monostate, Ldlt, Pcg, Lu, Bicg> solver;
};

LinearSolver::LinearSolver() = default;
LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

LinearSolver::LinearSolver(const SparseMatrix& matrix, const LinearSolverConfig& config)
    : impl_(std::make_unique<Impl>()), size_(matrix.rows())
{
    if (matrix.rows() != matrix.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "linear solver needs a square matrix");
    }
    impl_->matrix = matrix;
    impl_->matrix.makeCompressed();
    const bool symmetric = relative_asymmetry(matrix) <= kSymmetryTolerance;
    const bool direct = matrix.rows() <= config.direct_threshold;

    if (symmetric && direct) {
        method_ = Method::SymmetricDirect;
        auto& s = impl_->solver.emplace<Ldlt>();
        s.compute(impl_->matrix);
        if (s.info() != Eigen::Success) {
            throw Error(ErrorCode::NonCoercive, "LDL^T factorization failed");
        }
    } else if (symmetric) {
        method_ = Method::SymmetricIterative;
        auto& s = impl_->solver.emplace<Pcg>();
        s.setTolerance(config.iterative_tol);
        s.setMaxIterations(config.iterative_max_iter);
        s.compute(impl_->matrix);
        if (s.info() != Eigen::Success) {
            throw Error(ErrorCode::NonCoercive, "incomplete Cholesky preconditioner failed");
        }
    } else if (direct) {
        method_ = Method::GeneralDirect;
        auto& s = impl_->solver.emplace<Lu>();
        s.compute(impl_->matrix);
        if (s.info() != Eigen::Success) {
            throw Error(ErrorCode::NonCoercive, "sparse LU factorization failed: " + s.lastErrorMessage());
        }
    } else {
        method_ = Method::GeneralIterative;
        auto& s = impl_->solver.emplace<Bicg>();
        s.setTolerance(config.iterative_tol);
        s.setMaxIterations(config.iterative_max_iter);
        s.compute(impl_->matrix);
        if (s.info() != Eigen::Success) {
            throw Error(ErrorCode::NonCoercive, "ILUT preconditioner failed");
        }
    }
}

Vector LinearSolver::solve(const Vector& rhs) const
{
    if (!impl_) {
        throw Error(ErrorCode::InvalidArgument, "linear solver used before factorization");
    }
    if (rhs.size() != size_) {
        throw Error(ErrorCode::DimensionMismatch, "rhs size does not match the factorized matrix");
    }
    return std::visit(
        [&](const auto& s) -> Vector {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, std::monostate>) {
                return Vector();
            } else {
                Vector x = s.solve(rhs);
                if (s.info() != Eigen::Success) {
                    throw Error(ErrorCode::NoConvergence, "linear solve failed");
                }
                return x;
            }
        },
        impl_->solver);
}

DenseMatrix LinearSolver::solve(const DenseMatrix& rhs) const
{
    DenseMatrix out(rhs.rows(), rhs.cols());
    for (Eigen::Index j = 0; j < rhs.cols(); ++j) {
        out.col(j) = solve(Vector(rhs.col(j)));
    }
    return out;
}

Vector LinearSolver::ldlt_diagonal() const
{
    if (!impl_ || method_ != Method::SymmetricDirect) {
        return Vector();
    }
    return std::get<Ldlt>(impl_->solver).vectorD();
}

double relative_asymmetry(const SparseMatrix& matrix)
{
    if (matrix.rows() != matrix.cols()) {
        return std::numeric_limits<double>::infinity();
    }
    const SparseMatrix diff = SparseMatrix(matrix.transpose()) - matrix;
    double scale = 0.0;
    for (int k = 0; k < matrix.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(matrix, k); it; ++it) {
            scale = std::max(scale, std::abs(it.value()));
        }
    }
    if (scale == 0.0) {
        return 0.0;
    }
    double worst = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
            worst = std::max(worst, std::abs(it.value()));
        }
    }
    return worst / scale;
}

SparseMatrix sparse_identity(Eigen::Index n)
{
    SparseMatrix id(n, n);
    id.setIdentity();
    return id;
}

} // namespace hvi
