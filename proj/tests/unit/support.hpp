#pragma once

#include "hvi/abstract_hvi.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <random>

namespace hvi::testing {

/// Adaptive Simpson quadrature, independent of the library's Gauss rules.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-13,
                               int depth = 40)
{
    const std::function<double(double, double, double, double, double, double, double, int)> rec =
        [&](double l, double r, double fl, double fm, double fr, double whole, double eps, int d) {
            const double m = 0.5 * (l + r);
            const double lm = 0.5 * (l + m);
            const double rm = 0.5 * (m + r);
            const double flm = f(lm);
            const double frm = f(rm);
            const double left = (m - l) / 6.0 * (fl + 4.0 * flm + fm);
            const double right = (r - m) / 6.0 * (fm + 4.0 * frm + fr);
            if (d <= 0 || std::abs(left + right - whole) <= 15.0 * eps) {
                return left + right + (left + right - whole) / 15.0;
            }
            return rec(l, m, fl, flm, fm, left, 0.5 * eps, d - 1) + rec(m, r, fm, frm, fr, right, 0.5 * eps, d - 1);
        };
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, depth);
}

/// Smallest generalized eigenvalue of (A, G) by a dense solver (G empty = identity).
inline double dense_min_eigenvalue(const DenseMatrix& A, const DenseMatrix& G = {})
{
    if (G.size() == 0) {
        return Eigen::SelfAdjointEigenSolver<DenseMatrix>(A).eigenvalues().minCoeff();
    }
    return Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix>(A, G).eigenvalues().minCoeff();
}

inline double dense_max_eigenvalue(const DenseMatrix& A, const DenseMatrix& G = {})
{
    if (G.size() == 0) {
        return Eigen::SelfAdjointEigenSolver<DenseMatrix>(A).eigenvalues().maxCoeff();
    }
    return Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix>(A, G).eigenvalues().maxCoeff();
}

inline DenseMatrix random_spd(int n, std::mt19937_64& rng, double shift = 0.5)
{
    std::normal_distribution<double> g;
    DenseMatrix X(n, n);
    for (int i = 0; i < X.size(); ++i) {
        X.data()[i] = g(rng);
    }
    return X * X.transpose() + shift * DenseMatrix::Identity(n, n);
}

inline SparseMatrix sparse(const DenseMatrix& D)
{
    return D.sparseView();
}

inline SparseMatrix scalar_matrix(double v)
{
    DenseMatrix D(1, 1);
    D(0, 0) = v;
    return D.sparseView(0.0, 0.0);
}

/// One-dof abstract problem A u' + B u + E(∫ q u + α) + M*∂J(Mu) ∋ f.
inline AbstractHVI scalar_problem(double a, double b, double u0, std::function<double(double)> f, double T)
{
    AbstractHVI p;
    p.A = CoerciveOperator::declared(scalar_matrix(a), a, a);
    p.B = CoerciveOperator::declared(scalar_matrix(b), b, b);
    p.kernel = HistoryKernel::none(1, T);
    p.M = SparseMatrix(0, 1);
    p.load = [f = std::move(f)](double t) { return Vector::Constant(1, f(t)); };
    p.u0 = Vector::Constant(1, u0);
    p.T = T;
    return p;
}

} // namespace hvi::testing
