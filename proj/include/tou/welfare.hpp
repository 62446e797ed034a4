#pragma once

// Consumer utility changes from a flat-to-variable switch and the screening
// conditions that certify a loss (or a larger loss for one of two consumers)
// from prices, flat-price demand and flexibility alone.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tou/demand.hpp"
#include "tou/market.hpp"
#include "tou/numerics.hpp"

namespace tou {

enum class IntegrationMethod { ClosedFormLinear, ClosedFormIsoelastic, Quadrature, Mixed };

inline std::string_view to_string(IntegrationMethod m) {
    switch (m) {
        case IntegrationMethod::ClosedFormLinear: return "closed_form_linear";
        case IntegrationMethod::ClosedFormIsoelastic: return "closed_form_isoelastic";
        case IntegrationMethod::Quadrature: return "quadrature";
        case IntegrationMethod::Mixed: return "mixed";
    }
    return "unknown";
}

struct UtilityChange {
    std::string consumer_id;
    std::vector<double> per_period;  // Delta U_it, aligned with the equilibrium periods
    std::vector<IntegrationMethod> per_period_method;
    double total = 0.0;
    double surplus_change = 0.0;  // total / A, in currency
    IntegrationMethod method = IntegrationMethod::Quadrature;
};

namespace detail {

/// \int_a^b d*(p) dp for the clamped linear demand of a quadratic loss.
inline double linear_demand_integral(const QuadraticLoss& q, double A, double a, double b) {
    const double s = A / (2.0 * q.k);
    const double choke = q.d_bar / s;
    auto G = [&](double p) {
        p = std::clamp(p, 0.0, choke);
        return q.d_bar * p - 0.5 * s * p * p;
    };
    return G(b) - G(a);
}

inline double demand_integral(const LossSpec& spec, double A, double a, double b, double rel_tol,
                              IntegrationMethod& method) {
    if (const auto* q = spec.as_quadratic()) {
        method = IntegrationMethod::ClosedFormLinear;
        return linear_demand_integral(*q, A, a, b);
    }
    if (const auto* iso = spec.as_isoelastic()) {
        method = IntegrationMethod::ClosedFormIsoelastic;
        return iso->integral(a, b);
    }
    method = IntegrationMethod::Quadrature;
    return numeric::adaptive_simpson(
        [&](double p) { return optimal_demand(spec, A, p).quantity; }, a, b, rel_tol, 1e-15);
}

}  // namespace detail

/// Delta U_i = -A_i sum_t \int_{p_F}^{p_t^V} d*_it(p) dp. Positive is a gain.
inline UtilityChange utility_change(const Consumer& c, const Equilibrium& flat_eq,
                                    const Equilibrium& var_eq, double rel_tol = 1e-9) {
    UtilityChange out;
    out.consumer_id = c.id;
    const double pf = flat_eq.prices.front();
    for (std::size_t t = 0; t < var_eq.periods.size(); ++t) {
        IntegrationMethod m{};
        const double area =
            detail::demand_integral(c.loss_for(var_eq.periods[t]), c.A, pf, var_eq.prices[t],
                                    rel_tol, m);
        out.per_period.push_back(-c.A * area);
        out.per_period_method.push_back(m);
        out.total += out.per_period.back();
    }
    out.surplus_change = out.total / c.A;
    out.method = out.per_period_method.empty() ? IntegrationMethod::Quadrature
                                               : out.per_period_method.front();
    for (auto m : out.per_period_method)
        if (m != out.method) out.method = IntegrationMethod::Mixed;
    return out;
}

// ---------------------------------------------------------------------------
// Screening

enum class Condition {
    LinearBound,           // consumption-weighted price changes plus flexibility terms
    IsoelasticClosedForm,  // exact power-law utility change
    LinearComparison,      // two consumers, asymmetric bounds
    IsoelasticComparison,
    GeneralBound,  // linear bound applied to any convex demand
    MultiPeriodBound,
};

inline std::string_view to_string(Condition c) {
    switch (c) {
        case Condition::LinearBound: return "linear_bound";
        case Condition::IsoelasticClosedForm: return "isoelastic_closed_form";
        case Condition::LinearComparison: return "linear_comparison";
        case Condition::IsoelasticComparison: return "isoelastic_comparison";
        case Condition::GeneralBound: return "general_bound";
        case Condition::MultiPeriodBound: return "multi_period_bound";
    }
    return "unknown";
}

enum class Verdict { CertainLoss, CertainNoLoss, Inconclusive };

inline std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::CertainLoss: return "certain_loss";
        case Verdict::CertainNoLoss: return "certain_no_loss";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

struct ScreeningVerdict {
    Condition condition = Condition::LinearBound;
    double value = 0.0;                 // evaluated left-hand side
    std::optional<double> rhs;          // comparison conditions only
    Verdict verdict = Verdict::Inconclusive;
    bool exact = false;
    std::optional<double> point_estimate;  // Delta U estimate attached by some screens
    std::string note;
};

/// Which side of a consumer's utility change the linear bound brackets.
enum class BoundSide {
    Upper,  // tangent at the flat price for rising periods, at the variable price for falling
    Lower,  // the mirror image
};

/// First-order bound on Delta U_i / A_i across any number of periods. Rising
/// periods contribute (p_F - p_t^V) d_t^F + Delta^2/2 |d'|, where |d'| is taken
/// at the flat price for the upper bound and at the variable price for the
/// lower bound; falling periods swap the evaluation points.
inline double linear_bound(const Consumer& c, const Equilibrium& flat_eq,
                           const Equilibrium& var_eq, BoundSide side) {
    const double pf = flat_eq.prices.front();
    double value = 0.0;
    for (std::size_t t = 0; t < var_eq.periods.size(); ++t) {
        const auto& spec = c.loss_for(var_eq.periods[t]);
        const double pv = var_eq.prices[t];
        const double delta = pv - pf;
        const double d_flat = optimal_demand(spec, c.A, pf).quantity;
        value += (pf - pv) * d_flat;
        if (delta == 0.0) continue;
        const bool rising = delta > 0.0;
        const bool at_flat = (side == BoundSide::Upper) == rising;
        const double flex = flexibility(spec, c.A, at_flat ? pf : pv);
        value += 0.5 * delta * delta * flex;
    }
    return value;
}

namespace detail {

inline bool all_family(const Consumer& c, const std::vector<std::string>& periods,
                       LossFamily family) {
    for (const auto& p : periods)
        if (c.loss_for(p).family() != family) return false;
    return true;
}

/// Quadratic in every period and interior at the flat and every variable price.
inline bool linear_exact(const Consumer& c, const Equilibrium& flat_eq,
                         const Equilibrium& var_eq) {
    if (!all_family(c, var_eq.periods, LossFamily::Quadratic)) return false;
    const double pf = flat_eq.prices.front();
    for (std::size_t t = 0; t < var_eq.periods.size(); ++t) {
        const auto& spec = c.loss_for(var_eq.periods[t]);
        if (!optimal_demand(spec, c.A, pf).interior()) return false;
        if (!optimal_demand(spec, c.A, var_eq.prices[t]).interior()) return false;
    }
    return true;
}

/// Isoelastic in every period with the flat and variable prices inside the
/// constant-elasticity band.
inline bool isoelastic_in_core(const Consumer& c, const Equilibrium& flat_eq,
                               const Equilibrium& var_eq) {
    if (!all_family(c, var_eq.periods, LossFamily::IsoelasticDemand)) return false;
    const double pf = flat_eq.prices.front();
    for (std::size_t t = 0; t < var_eq.periods.size(); ++t) {
        const auto& iso = *c.loss_for(var_eq.periods[t]).as_isoelastic();
        if (!iso.in_core(pf) || !iso.in_core(var_eq.prices[t])) return false;
    }
    return true;
}

/// sum_t d_t^F / (1 + eps_t) [1 - (p_t^V / p_F)^(1 + eps_t)], with the log
/// limit when |1 + eps| < 1e-8.
inline double isoelastic_value(const Consumer& c, const Equilibrium& flat_eq,
                               const Equilibrium& var_eq) {
    const double pf = flat_eq.prices.front();
    double value = 0.0;
    for (std::size_t t = 0; t < var_eq.periods.size(); ++t) {
        const auto& iso = *c.loss_for(var_eq.periods[t]).as_isoelastic();
        const double d_flat = iso.demand(pf);
        const double log_ratio = std::log(var_eq.prices[t] / pf);
        const double delta = 1.0 + iso.epsilon;
        if (std::abs(delta) < 1e-8) {
            value += -d_flat * log_ratio;
        } else {
            value += -d_flat * std::expm1(delta * log_ratio) / delta;
        }
    }
    return value;
}

inline bool contaminated(const Equilibrium& a, const Equilibrium& b) {
    return a.boundary_contaminated() || b.boundary_contaminated();
}

inline constexpr const char* kContaminatedNote =
    "equilibrium has clamped consumers; exactness not claimed";

/// Shared verdict logic for the linear-type bounds.
inline ScreeningVerdict bound_verdict(Condition cond, double value, bool exact,
                                      bool contaminated_eq) {
    ScreeningVerdict v;
    v.condition = cond;
    v.value = value;
    if (contaminated_eq) {
        v.verdict = Verdict::Inconclusive;
        v.note = kContaminatedNote;
        return v;
    }
    v.exact = exact;
    if (value < 0.0) v.verdict = Verdict::CertainLoss;
    else v.verdict = exact ? Verdict::CertainNoLoss : Verdict::Inconclusive;
    return v;
}

}  // namespace detail

/// Linear-demand loss condition for a two-period scenario: exact for
/// quadratic losses, sufficient otherwise.
inline ScreeningVerdict screen_linear(const Consumer& c, const Equilibrium& flat_eq,
                                      const Equilibrium& var_eq) {
    if (var_eq.periods.size() != 2)
        throw PreconditionError("screen_linear: two-period scenario required");
    const double value = linear_bound(c, flat_eq, var_eq, BoundSide::Upper);
    return detail::bound_verdict(Condition::LinearBound, value,
                                 detail::linear_exact(c, flat_eq, var_eq),
                                 detail::contaminated(flat_eq, var_eq));
}

/// Isoelastic loss condition. Falls back to a quadrature verdict (never
/// exact) when a price leaves the constant-elasticity band.
inline ScreeningVerdict screen_isoelastic(const Consumer& c, const Equilibrium& flat_eq,
                                          const Equilibrium& var_eq, double rel_tol = 1e-9) {
    if (!detail::all_family(c, var_eq.periods, LossFamily::IsoelasticDemand))
        throw PreconditionError("screen_isoelastic: consumer must be isoelastic in every period");
    ScreeningVerdict v;
    v.condition = Condition::IsoelasticClosedForm;
    if (detail::isoelastic_in_core(c, flat_eq, var_eq)) {
        v.value = detail::isoelastic_value(c, flat_eq, var_eq);
        if (detail::contaminated(flat_eq, var_eq)) {
            v.note = detail::kContaminatedNote;
            return v;
        }
        v.exact = true;
        v.verdict = v.value < 0.0 ? Verdict::CertainLoss : Verdict::CertainNoLoss;
        return v;
    }
    const auto du = utility_change(c, flat_eq, var_eq, rel_tol);
    v.value = du.surplus_change / flat_eq.prices.front();
    v.point_estimate = du.total;
    v.note = "price outside the constant-elasticity band; verdict from integrated demand";
    const double margin = 1e-9 * (1.0 + std::abs(du.total));
    if (du.total < -margin) v.verdict = Verdict::CertainLoss;
    else if (du.total > margin) v.verdict = Verdict::CertainNoLoss;
    return v;
}

/// Does consumer_lo lose more utility than consumer_hi? CertainLoss means
/// Delta U_lo < Delta U_hi is guaranteed. Requires A_lo >= A_hi.
inline ScreeningVerdict compare_consumers(const Consumer& lo, const Consumer& hi,
                                          const Equilibrium& flat_eq,
                                          const Equilibrium& var_eq) {
    if (lo.A < hi.A)
        throw PreconditionError("compare_consumers: A of the first consumer must be >= the second");
    ScreeningVerdict v;
    const bool dirty = detail::contaminated(flat_eq, var_eq);
    if (detail::isoelastic_in_core(lo, flat_eq, var_eq) &&
        detail::isoelastic_in_core(hi, flat_eq, var_eq)) {
        v.condition = Condition::IsoelasticComparison;
        v.value = lo.A * detail::isoelastic_value(lo, flat_eq, var_eq);
        v.rhs = hi.A * detail::isoelastic_value(hi, flat_eq, var_eq);
        v.exact = !dirty;
    } else {
        v.condition = Condition::LinearComparison;
        v.value = lo.A * linear_bound(lo, flat_eq, var_eq, BoundSide::Upper);
        v.rhs = hi.A * linear_bound(hi, flat_eq, var_eq, BoundSide::Lower);
        v.exact = !dirty && detail::linear_exact(lo, flat_eq, var_eq) &&
                  detail::linear_exact(hi, flat_eq, var_eq);
    }
    if (dirty) {
        v.note = detail::kContaminatedNote;
        return v;
    }
    if (v.value < *v.rhs) v.verdict = Verdict::CertainLoss;
    else v.verdict = v.exact ? Verdict::CertainNoLoss : Verdict::Inconclusive;
    return v;
}

/// Linear bound as a sufficient test for any loss family. Never claims
/// CertainNoLoss; attaches the integrated Delta U as a point estimate.
inline ScreeningVerdict screen_general(const Consumer& c, const Equilibrium& flat_eq,
                                       const Equilibrium& var_eq, double rel_tol = 1e-9) {
    ScreeningVerdict v;
    v.condition = Condition::GeneralBound;
    v.value = linear_bound(c, flat_eq, var_eq, BoundSide::Upper);
    v.verdict = v.value < 0.0 ? Verdict::CertainLoss : Verdict::Inconclusive;
    v.point_estimate = utility_change(c, flat_eq, var_eq, rel_tol).total;
    return v;
}

}  // namespace tou
