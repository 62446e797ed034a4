#pragma once

// Profit-constrained (Ramsey) pricing and T-period generalizations.
//
// Multiplier convention: nu > 0 raises profit above the welfare optimum.
// Each period's price solves (C'(d) - p)(1 - nu) = nu p / eps, i.e. the
// Lerner index (p - C')/p equals kappa / |eps| with kappa = nu / (1 - nu).
// kappa = 1 (nu = 1/2) is the monopoly markup in every period, so the
// search over nu stops there.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tou/market.hpp"
#include "tou/welfare.hpp"

namespace tou {

struct ProfitReport {
    std::vector<double> per_period;
    double total = 0.0;
};

inline double period_profit(const Scenario& s, std::size_t t, double price) {
    const double d = aggregate_demand(s.view(t), price);
    return d * price - s.cost.value(d);
}

inline ProfitReport profit(const Scenario& s, const std::vector<double>& prices) {
    if (prices.size() != s.periods.size())
        throw PreconditionError("profit: one price per period required");
    ProfitReport r;
    for (std::size_t t = 0; t < prices.size(); ++t) {
        if (!(prices[t] >= 0.0)) throw DomainError("profit: prices must be >= 0");
        r.per_period.push_back(period_profit(s, t, prices[t]));
        r.total += r.per_period.back();
    }
    return r;
}

/// Largest profit of one period over all prices.
inline double monopoly_period_profit(const Scenario& s, std::size_t t) {
    const double hi = s.view(t).max_choke_price();
    if (!(hi > 0.0)) return period_profit(s, t, 0.0);
    constexpr int kGrid = 400;
    int best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kGrid; ++i) {
        const double v = period_profit(s, t, hi * i / kGrid);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    const double a = hi * std::max(0, best - 1) / kGrid;
    const double b = hi * std::min(kGrid, best + 1) / kGrid;
    const double p = numeric::golden_section_min([&](double x) { return -period_profit(s, t, x); },
                                                 a, b, 1e-13 * (1.0 + hi));
    return std::max(best_val, period_profit(s, t, p));
}

inline double monopoly_profit(const Scenario& s) {
    double total = 0.0;
    for (std::size_t t = 0; t < s.periods.size(); ++t) total += monopoly_period_profit(s, t);
    return total;
}

struct RamseySolution {
    double nu = 0.0;
    double markup_factor = 0.0;  // nu / (1 - nu)
    std::vector<std::string> periods;
    std::vector<double> prices;
    std::vector<double> demand;
    std::vector<double> marginal_cost;
    std::vector<double> profit;
    double total_profit = 0.0;
    double target = 0.0;
    std::vector<double> distortions;   // price - C'(d)
    std::vector<double> elasticities;  // (dd/dp) p / d
};

class DegenerateElasticity : public SolverError {
public:
    using SolverError::SolverError;
};

namespace detail {

/// Price of period t given the markup factor kappa, with p >= 0 enforced.
/// The first-order condition G(p) = 0 can have several roots once consumers
/// drop out at their choke prices; the root minimizing the per-period
/// Lagrangian (1 - kappa) W_t - kappa Pi_t is taken, which keeps total profit
/// monotone in kappa.
inline double ramsey_period_price(const Scenario& s, std::size_t t, double kappa,
                                  double variable_price) {
    if (kappa == 0.0) return variable_price;
    const auto view = s.view(t);
    // G(p) = p - C'(D(p)) - kappa D(p) / |D'(p)|
    auto G = [&](double p) {
        const double d = aggregate_demand(view, p);
        const double flex = aggregate_flexibility(view, p);
        double markup = 0.0;
        if (d > 0.0) {
            markup = flex > 0.0 ? kappa * d / flex
                                : std::copysign(std::numeric_limits<double>::infinity(), kappa);
        }
        return p - s.cost.first(d) - markup;
    };
    auto lagrangian = [&](double p) {
        return (1.0 - kappa) * period_social_loss(s, t, p) - kappa * period_profit(s, t, p);
    };
    double lo = variable_price, hi = view.max_choke_price();
    std::vector<double> candidates;
    if (kappa > 0.0) {
        if (!(hi > lo)) return variable_price;
    } else {
        hi = variable_price;
        lo = 1e-12 * (1.0 + variable_price);
        if (G(lo) >= 0.0) candidates.push_back(0.0);
    }
    const auto nodes = scan_nodes(s, {t}, lo, hi, 64);
    double x0 = lo, g0 = G(lo);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const double x1 = nodes[i];
        const double g1 = G(x1);
        if (g0 < 0.0 && g1 >= 0.0)
            candidates.push_back(numeric::bisect(G, x0, x1, 1e-15 * (1.0 + hi), 400).x);
        x0 = x1;
        g0 = g1;
    }
    if (candidates.empty()) return kappa > 0.0 ? hi : 0.0;
    double best = candidates.front(), best_val = lagrangian(best);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double v = lagrangian(candidates[i]);
        if (v < best_val) {
            best_val = v;
            best = candidates[i];
        }
    }
    return best;
}

inline std::vector<double> ramsey_prices(const Scenario& s, double nu,
                                         const std::vector<double>& variable_prices) {
    const double kappa = nu / (1.0 - nu);
    std::vector<double> prices(s.periods.size());
    for (std::size_t t = 0; t < prices.size(); ++t)
        prices[t] = ramsey_period_price(s, t, kappa, variable_prices[t]);
    return prices;
}

inline RamseySolution finish_ramsey(const Scenario& s, double nu, std::vector<double> prices,
                                    double target) {
    RamseySolution r;
    r.nu = nu;
    r.markup_factor = nu / (1.0 - nu);
    r.periods = s.periods;
    r.target = target;
    for (std::size_t t = 0; t < prices.size(); ++t) {
        const auto view = s.view(t);
        const double p = prices[t];
        const double d = aggregate_demand(view, p);
        const double flex = aggregate_flexibility(view, p);
        const double mc = s.cost.first(d);
        const double eps = d > 0.0 ? -flex * p / d : 0.0;
        if (nu != 0.0 && !(std::abs(eps) > 1e-12))
            throw DegenerateElasticity("ramsey_solve: elasticity vanishes in period '" +
                                       s.periods[t] + "'");
        r.demand.push_back(d);
        r.marginal_cost.push_back(mc);
        r.profit.push_back(d * p - s.cost.value(d));
        r.total_profit += r.profit.back();
        r.distortions.push_back(p - mc);
        r.elasticities.push_back(eps);
    }
    r.prices = std::move(prices);
    return r;
}

}  // namespace detail

inline constexpr double kMonopolyNu = 0.5;

/// Welfare-optimal prices subject to total profit == target.
inline RamseySolution ramsey_solve(const Scenario& s, double target) {
    const auto var = solve_variable(s);
    const double base = profit(s, var.prices).total;
    if (std::abs(target - base) <= 1e-12 * (1.0 + std::abs(base)))
        return detail::finish_ramsey(s, 0.0, var.prices, target);

    const double mono = monopoly_profit(s);
    if (target > mono + 1e-9 * (1.0 + std::abs(mono)))
        throw InfeasibleConstraint("ramsey_solve: target " + std::to_string(target) +
                                   " exceeds monopoly profit " + std::to_string(mono));

    auto total_profit = [&](double nu) {
        return profit(s, detail::ramsey_prices(s, nu, var.prices)).total;
    };
    double lo = 0.0, hi = 0.0;
    if (target > base) {
        hi = kMonopolyNu;
        const double top = total_profit(hi);
        if (top <= target) {
            if (target - top <= 1e-8 * (1.0 + std::abs(target)))
                return detail::finish_ramsey(s, hi, detail::ramsey_prices(s, hi, var.prices), target);
            throw SolverError("ramsey_solve: target " + std::to_string(target) +
                              " falls in a gap of the attainable profit between " +
                              std::to_string(top) + " and monopoly profit " + std::to_string(mono) +
                              "; the per-period maximizers do not reach the grid optimum");
        }
    } else {
        lo = -10.0;
        int widen = 0;
        while (total_profit(lo) > target) {
            if (++widen > 60)
                throw InfeasibleConstraint("ramsey_solve: target " + std::to_string(target) +
                                           " is below the lowest reachable profit");
            lo *= 2.0;
        }
    }
    auto f = [&](double nu) { return total_profit(nu) - target; };
    const auto root = numeric::bisect(f, lo, hi, 1e-15, 400);
    auto sol = detail::finish_ramsey(s, root.x, detail::ramsey_prices(s, root.x, var.prices),
                                     target);
    const double miss = sol.total_profit - target;
    if (std::abs(miss) > 1e-8 * (1.0 + std::abs(target))) {
        const double eps = 1e-9 * (1.0 + std::abs(root.x));
        throw SolverError("ramsey_solve: target " + std::to_string(target) +
                          " falls in a gap of the attainable profit between " +
                          std::to_string(total_profit(root.x - eps)) + " and " +
                          std::to_string(total_profit(root.x + eps)) + " at nu = " +
                          std::to_string(root.x) + "; no price vector meets the first-order "
                          "conditions there");
    }
    return sol;
}

enum class ProfitBound { Floor, Cap };

/// Inequality form: returns the unconstrained solution (nu = 0) when it
/// already satisfies the bound, otherwise the equality solution at the bound.
inline RamseySolution ramsey_solve(const Scenario& s, double bound, ProfitBound kind) {
    const auto var = solve_variable(s);
    const double base = profit(s, var.prices).total;
    const bool slack = kind == ProfitBound::Floor ? base >= bound : base <= bound;
    if (slack) return detail::finish_ramsey(s, 0.0, var.prices, bound);
    return ramsey_solve(s, bound);
}

struct FlatPriceIdentity {
    double price;
    double weighted_marginal_cost;  // sum_t C'(d_t) |d_t'| / sum_t |d_t'|
    double gap;
};

/// T-period flat price with the flexibility-weighted marginal-cost identity.
inline FlatPriceIdentity multi_period_flat_price(const Scenario& s) {
    if (s.periods.size() < 2)
        throw PreconditionError("multi_period_flat_price: at least two periods required");
    const auto flat = solve_flat(s);
    const double p = flat.prices.front();
    // At a kink the flexibilities are the convex combination of the one-sided
    // values that makes the gradient vanish.
    double theta = 0.5;
    const double eta = detail::kKinkProbe * (1.0 + p);
    if (flat.at_kink) {
        std::vector<AggregateView> views;
        for (std::size_t t = 0; t < s.periods.size(); ++t) views.push_back(s.view(t));
        theta = detail::kink_weight(s, views, p);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < s.periods.size(); ++t) {
        const auto view = s.view(t);
        const double flex = flat.at_kink ? theta * aggregate_flexibility(view, p - eta) +
                                               (1.0 - theta) * aggregate_flexibility(view, p + eta)
                                         : aggregate_flexibility(view, p);
        num += s.cost.first(flat.aggregate_demand[t]) * flex;
        den += flex;
    }
    const double avg = den > 0.0 ? num / den : p;
    return {p, avg, std::abs(p - avg)};
}

/// T-period screening: linear bound with rising/falling partition, or the
/// isoelastic closed form when every price sits in the constant-elasticity band.
inline ScreeningVerdict multi_period_screen(const Consumer& c, const Equilibrium& flat_eq,
                                            const Equilibrium& var_eq) {
    const bool dirty = detail::contaminated(flat_eq, var_eq);
    if (detail::isoelastic_in_core(c, flat_eq, var_eq)) {
        ScreeningVerdict v;
        v.condition = Condition::IsoelasticClosedForm;
        v.value = detail::isoelastic_value(c, flat_eq, var_eq);
        if (dirty) {
            v.note = detail::kContaminatedNote;
            return v;
        }
        v.exact = true;
        v.verdict = v.value < 0.0 ? Verdict::CertainLoss : Verdict::CertainNoLoss;
        return v;
    }
    return detail::bound_verdict(Condition::MultiPeriodBound,
                                 linear_bound(c, flat_eq, var_eq, BoundSide::Upper),
                                 detail::linear_exact(c, flat_eq, var_eq), dirty);
}

}  // namespace tou
