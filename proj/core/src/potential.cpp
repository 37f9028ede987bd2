#include "hvi/potential.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hvi {

namespace {

class ZeroModel final : public PotentialModel {
public:
    std::string name() const override { return "zero"; }
    double value(double) const override { return 0.0; }
    Interval subgradient(double) const override { return {0.0, 0.0}; }
    std::optional<AffinePiece> affine_derivative(double) const override { return AffinePiece{}; }
    double growth() const override { return 1.0; }
    double relaxed_monotonicity() const override { return 0.0; }
    bool is_zero() const override { return true; }
};

class QuadraticModel final : public PotentialModel {
public:
    explicit QuadraticModel(double c) : c_(c) {}
    std::string name() const override { return "quadratic"; }
    double value(double r) const override { return r > 0.0 ? 0.5 * c_ * r * r : 0.0; }
    Interval subgradient(double r) const override
    {
        const double d = r > 0.0 ? c_ * r : 0.0;
        return {d, d};
    }
    std::vector<double> breakpoints() const override { return {0.0}; }
    std::optional<AffinePiece> affine_derivative(double r) const override
    {
        return r > 0.0 ? AffinePiece{0.0, c_} : AffinePiece{0.0, 0.0};
    }
    double growth() const override { return c_; }
    double relaxed_monotonicity() const override { return 0.0; }

private:
    double c_;
};

class SmoothQuadraticModel final : public PotentialModel {
public:
    explicit SmoothQuadraticModel(double c) : c_(c) {}
    std::string name() const override { return "smooth_quadratic"; }
    double value(double r) const override { return 0.5 * c_ * r * r; }
    Interval subgradient(double r) const override { return {c_ * r, c_ * r}; }
    std::optional<AffinePiece> affine_derivative(double) const override { return AffinePiece{0.0, c_}; }
    double growth() const override { return c_; }
    double relaxed_monotonicity() const override { return 0.0; }

private:
    double c_;
};

class AbsModel final : public PotentialModel {
public:
    explicit AbsModel(double c) : c_(c) {}
    std::string name() const override { return "abs"; }
    double value(double r) const override { return c_ * std::abs(r); }
    Interval subgradient(double r) const override
    {
        if (r > 0.0) {
            return {c_, c_};
        }
        if (r < 0.0) {
            return {-c_, -c_};
        }
        return {-c_, c_};
    }
    std::vector<double> breakpoints() const override { return {0.0}; }
    std::optional<AffinePiece> affine_derivative(double r) const override
    {
        return AffinePiece{r > 0.0 ? c_ : -c_, 0.0};
    }
    double growth() const override { return c_; }
    double relaxed_monotonicity() const override { return 0.0; }

private:
    double c_;
};

class NonmonotoneDropModel final : public PotentialModel {
public:
    NonmonotoneDropModel(double c, double r0, double beta) : c_(c), r0_(r0), beta_(beta) {}

    std::string name() const override { return "nonmonotone_drop"; }

    double value(double r) const override
    {
        if (r <= 0.0) {
            return 0.0;
        }
        if (r <= r0_) {
            return 0.5 * c_ * r * r;
        }
        const double s = r - r0_;
        return 0.5 * c_ * r0_ * r0_ + c_ * r0_ * (beta_ * s + (1.0 - beta_) * r0_ * (1.0 - std::exp(-s / r0_)));
    }

    Interval subgradient(double r) const override
    {
        const double d = derivative(r);
        return {d, d};
    }

    std::vector<double> breakpoints() const override { return {0.0, r0_}; }

    std::optional<AffinePiece> affine_derivative(double r) const override
    {
        if (r < 0.0) {
            return AffinePiece{0.0, 0.0};
        }
        if (r < r0_) {
            return AffinePiece{0.0, c_};
        }
        return std::nullopt;
    }

    double growth() const override { return c_; }

    // The steepest descent of j' is right after r0, where -j'' = c (1 - beta).
    double relaxed_monotonicity() const override { return c_ * (1.0 - beta_); }

private:
    double derivative(double r) const
    {
        if (r <= 0.0) {
            return 0.0;
        }
        if (r <= r0_) {
            return c_ * r;
        }
        return c_ * r0_ * (beta_ + (1.0 - beta_) * std::exp(-(r - r0_) / r0_));
    }

    double c_;
    double r0_;
    double beta_;
};

} // namespace

LipschitzPotential::LipschitzPotential() : LipschitzPotential(std::make_shared<ZeroModel>()) {}

LipschitzPotential::LipschitzPotential(std::shared_ptr<const PotentialModel> model)
    : model_(std::move(model)), growth_(model_->growth()), relaxed_(model_->relaxed_monotonicity())
{
}

LipschitzPotential LipschitzPotential::zero()
{
    return LipschitzPotential(std::make_shared<ZeroModel>());
}

LipschitzPotential LipschitzPotential::quadratic(double stiffness)
{
    if (!(stiffness > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "quadratic potential needs a positive stiffness");
    }
    return LipschitzPotential(std::make_shared<QuadraticModel>(stiffness));
}

LipschitzPotential LipschitzPotential::smooth_quadratic(double stiffness)
{
    if (!(stiffness > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "quadratic potential needs a positive stiffness");
    }
    return LipschitzPotential(std::make_shared<SmoothQuadraticModel>(stiffness));
}

LipschitzPotential LipschitzPotential::abs(double stiffness)
{
    if (!(stiffness > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "abs potential needs a positive stiffness");
    }
    return LipschitzPotential(std::make_shared<AbsModel>(stiffness));
}

LipschitzPotential LipschitzPotential::nonmonotone_drop(double stiffness, double threshold, double residual_ratio)
{
    if (!(stiffness > 0.0) || !(threshold > 0.0) || !(residual_ratio > 0.0 && residual_ratio < 1.0)) {
        throw Error(ErrorCode::InvalidArgument,
                    "nonmonotone_drop needs stiffness > 0, threshold > 0 and residual ratio in (0,1)");
    }
    return LipschitzPotential(std::make_shared<NonmonotoneDropModel>(stiffness, threshold, residual_ratio));
}

LipschitzPotential LipschitzPotential::with_constants(std::optional<double> growth,
                                                      std::optional<double> relaxed) const
{
    LipschitzPotential out = *this;
    if (growth) {
        out.growth_ = *growth;
    }
    if (relaxed) {
        out.relaxed_ = *relaxed;
    }
    return out;
}

Interval LipschitzPotential::enlarged_subgradient(double r, double eps) const
{
    Interval iv = model_->subgradient(r);
    if (eps <= 0.0) {
        return iv;
    }
    iv = iv.hull(model_->subgradient(r - eps)).hull(model_->subgradient(r + eps));
    for (double bp : model_->breakpoints()) {
        if (bp >= r - eps && bp <= r + eps) {
            iv = iv.hull(model_->subgradient(bp));
        }
    }
    return iv;
}

double LipschitzPotential::clarke_dd(double u, double v) const
{
    if (v == 0.0) {
        return 0.0;
    }
    const Interval iv = model_->subgradient(u);
    return v > 0.0 ? v * iv.hi : v * iv.lo;
}

PotentialAudit audit_potential(const LipschitzPotential& j, int samples, double range, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-range, range);
    std::normal_distribution<double> near(0.0, 1e-2);

    std::vector<double> points;
    points.reserve(static_cast<std::size_t>(samples) + 64);
    for (int i = 0; i < samples; ++i) {
        points.push_back(uni(rng));
    }
    for (double bp : j.breakpoints()) {
        points.push_back(bp);
        for (double d : {1e-9, 1e-6, 1e-3, 1e-2, 1e-1}) {
            points.push_back(bp - d);
            points.push_back(bp + d);
        }
    }

    PotentialAudit audit;
    audit.growth_slack = std::numeric_limits<double>::infinity();
    audit.monotonicity_slack = std::numeric_limits<double>::infinity();
    const double c = j.growth_constant();
    const double m = j.relaxed_monotonicity_constant();

    for (double u : points) {
        const Interval iv = j.subgrad_interval(u);
        const double worst = std::max(std::abs(iv.lo), std::abs(iv.hi));
        audit.growth_slack = std::min(audit.growth_slack, c * (1.0 + std::abs(u)) - worst);
    }

    auto check_pair = [&](double u, double v) {
        const double lhs = j.clarke_dd(u, v - u) + j.clarke_dd(v, u - v);
        audit.monotonicity_slack = std::min(audit.monotonicity_slack, m * (u - v) * (u - v) - lhs);
    };
    for (int i = 0; i < samples; ++i) {
        const double u = uni(rng);
        check_pair(u, uni(rng));
        check_pair(u, u + near(rng));
    }
    for (double bp : j.breakpoints()) {
        for (int i = 0; i < 50; ++i) {
            const double u = bp + near(rng);
            check_pair(u, u + near(rng));
            check_pair(bp, bp + near(rng));
        }
    }
    audit.samples = static_cast<int>(points.size());
    return audit;
}

} // namespace hvi
