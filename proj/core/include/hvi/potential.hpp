#pragma once

#include "hvi/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hvi {

/// Affine description a(r) = offset + slope * r of a derivative on one smooth piece.
struct AffinePiece {
    double offset = 0.0;
    double slope = 0.0;
};

/// Model interface behind LipschitzPotential. Implementations describe a
/// locally Lipschitz function on the real line through its value and its
/// Clarke subdifferential, which in 1D is always a closed interval.
class PotentialModel {
public:
    virtual ~PotentialModel() = default;

    virtual std::string name() const = 0;
    virtual double value(double r) const = 0;
    virtual Interval subgradient(double r) const = 0;

    /// Points where the derivative may be discontinuous or change formula, sorted.
    virtual std::vector<double> breakpoints() const { return {}; }

    /// Derivative on the open piece containing r when it is affine there.
    virtual std::optional<AffinePiece> affine_derivative(double /*r*/) const { return std::nullopt; }

    /// Growth constant c with |z| <= c (1 + |r|) for all z in the subdifferential.
    virtual double growth() const = 0;
    /// Relaxed monotonicity constant m >= 0.
    virtual double relaxed_monotonicity() const = 0;

    virtual bool is_zero() const { return false; }
};

/// A locally Lipschitz scalar potential j together with its declared constants.
///
/// The constants (c_J, m_J) are declared, never inferred: the catalog factories
/// supply the analytic values, and `with_constants` lets a problem author
/// override them. `audit_potential` checks them by sampling.
class LipschitzPotential {
public:
    LipschitzPotential();
    explicit LipschitzPotential(std::shared_ptr<const PotentialModel> model);

    static LipschitzPotential zero();
    /// j(r) = c/2 * max(r,0)^2
    static LipschitzPotential quadratic(double stiffness);
    /// j(r) = c/2 * r^2
    static LipschitzPotential smooth_quadratic(double stiffness);
    /// j(r) = c |r|
    static LipschitzPotential abs(double stiffness);
    /// Nonmonotone normal compliance: j' = 0 for r < 0, c r on [0, r0],
    /// c r0 (beta + (1 - beta) exp(-(r - r0)/r0)) for r > r0.
    static LipschitzPotential nonmonotone_drop(double stiffness, double threshold, double residual_ratio);

    LipschitzPotential with_constants(std::optional<double> growth, std::optional<double> relaxed) const;

    std::string name() const { return model_->name(); }
    double value(double r) const { return model_->value(r); }
    Interval subgrad_interval(double r) const { return model_->subgradient(r); }

    /// Convex hull of the subdifferential over [r - eps, r + eps].
    Interval enlarged_subgradient(double r, double eps) const;

    /// Clarke generalized directional derivative j°(u; v).
    double clarke_dd(double u, double v) const;

    std::vector<double> breakpoints() const { return model_->breakpoints(); }
    std::optional<AffinePiece> affine_derivative(double r) const { return model_->affine_derivative(r); }

    double growth_constant() const { return growth_; }
    double relaxed_monotonicity_constant() const { return relaxed_; }
    bool is_zero() const { return model_->is_zero(); }
    /// Identity of the underlying model; copies of one potential share it.
    const PotentialModel* model_id() const { return model_.get(); }

private:
    std::shared_ptr<const PotentialModel> model_;
    double growth_ = 0.0;
    double relaxed_ = 0.0;
};

struct PotentialAudit {
    /// min over samples of c_J (1 + |u|) - max(|lo|, |hi|); >= 0 means the growth bound held.
    double growth_slack = 0.0;
    /// min over pairs of m_J (u - v)^2 - [j°(u; v - u) + j°(v; u - v)].
    double monotonicity_slack = 0.0;
    int samples = 0;

    bool passes(double tol = 1e-12) const { return growth_slack >= -tol && monotonicity_slack >= -tol; }
};

/// Samples the growth bound and the relaxed monotonicity inequality for a
/// potential with its declared constants. Points are drawn uniformly from
/// [-range, range] and densely around the breakpoints.
PotentialAudit audit_potential(const LipschitzPotential& j, int samples = 1000, double range = 10.0,
                               std::uint64_t seed = 0);

} // namespace hvi
