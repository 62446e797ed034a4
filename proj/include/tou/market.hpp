#pragma once

// Supply cost, scenarios, and the planner's flat and variable equilibria.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tou/aggregation.hpp"
#include "tou/demand.hpp"
#include "tou/numerics.hpp"

namespace tou {

/// Polynomial cost C(d) = sum_k c_k d^k shared by every period.
struct CostSpec {
    std::vector<double> coefficients;

    double value(double d) const {
        double acc = 0.0;
        for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * d + *it;
        return acc;
    }
    double first(double d) const {
        double acc = 0.0;
        for (std::size_t k = coefficients.size(); k-- > 1;) acc = acc * d + k * coefficients[k];
        return acc;
    }
    double second(double d) const {
        double acc = 0.0;
        for (std::size_t k = coefficients.size(); k-- > 2;)
            acc = acc * d + k * (k - 1) * coefficients[k];
        return acc;
    }
};

/// Checks C >= 0, C' >= 0, C'' >= 0 on a uniform grid over [0, max_demand].
/// Returns the first violating quantity, if any.
inline std::optional<double> check_cost(const CostSpec& cost, double max_demand,
                                        int grid_size = kDefaultValidationGrid) {
    const double slack = kValidationSlack;
    for (int i = 0; i < grid_size; ++i) {
        const double d = max_demand * static_cast<double>(i) / (grid_size - 1);
        if (cost.value(d) < -slack || cost.first(d) < -slack || cost.second(d) < -slack) return d;
    }
    return std::nullopt;
}

struct SolverOptions {
    double flat_tol = 1e-10;
    double var_tol = 1e-12;
    double quad_tol = 1e-9;
    int grid_points = kDefaultValidationGrid;
    std::uint64_t seed = 0;
};

struct Scenario {
    std::vector<std::string> periods;  // ordered most to least critical
    std::vector<Consumer> consumers;
    CostSpec cost;
    SolverOptions options;

    std::size_t period_index(std::string_view label) const {
        for (std::size_t t = 0; t < periods.size(); ++t)
            if (periods[t] == label) return t;
        throw InvalidScenario("unknown period '" + std::string(label) + "'");
    }
    AggregateView view(std::size_t t) const { return AggregateView(consumers, periods[t]); }

    /// Largest aggregate satiation level across periods.
    double max_total_demand() const {
        double m = 0.0;
        for (std::size_t t = 0; t < periods.size(); ++t) m = std::max(m, view(t).max_demand());
        return m;
    }
};

/// Structural and Assumption-2 checks. Throws InvalidScenario.
inline void check_scenario(const Scenario& s) {
    if (s.periods.empty()) throw InvalidScenario("scenario needs at least one period");
    if (s.consumers.empty()) throw InvalidScenario("scenario needs at least one consumer");
    for (std::size_t a = 0; a < s.periods.size(); ++a)
        for (std::size_t b = a + 1; b < s.periods.size(); ++b)
            if (s.periods[a] == s.periods[b])
                throw InvalidScenario("duplicate period label '" + s.periods[a] + "'");
    for (const auto& c : s.consumers) {
        if (!(c.A > 0.0) || !std::isfinite(c.A))
            throw InvalidScenario("consumer '" + c.id + "': A must be finite and > 0");
        for (const auto& p : s.periods) (void)c.loss_for(p);
        if (c.loss.size() != s.periods.size())
            throw InvalidScenario("consumer '" + c.id + "' has losses for unknown periods");
    }
    for (double v : s.cost.coefficients)
        if (!std::isfinite(v)) throw InvalidScenario("cost coefficients must be finite");
    if (auto bad = check_cost(s.cost, s.max_total_demand(), s.options.grid_points))
        throw InvalidScenario("cost violates non-negativity/monotonicity/convexity at d = " +
                              std::to_string(*bad));
}

enum class Regime { Flat, Variable, ProfitConstrained };

inline std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::Flat: return "flat";
        case Regime::Variable: return "variable";
        case Regime::ProfitConstrained: return "profit_constrained";
    }
    return "unknown";
}

struct BoundaryFlag {
    std::size_t consumer;
    std::size_t period;
    DemandRegime regime;
};

struct Equilibrium {
    Regime regime = Regime::Variable;
    std::vector<std::string> periods;
    std::vector<double> prices;
    std::vector<double> aggregate_demand;
    std::vector<std::vector<double>> individual_demand;  // [consumer][period]
    double social_loss = 0.0;
    std::vector<BoundaryFlag> boundary_flags;
    /// Variable: C'(d_t) - price_t. Flat: (C'(d_t) - price) * dd_t/dprice.
    std::vector<double> foc_residuals;
    /// Variable: max |residual|. Flat: |sum of the per-period terms|.
    double foc_residual = 0.0;
    /// Flat regime: the price sits on a consumer's choke price, where the
    /// gradient is discontinuous and foc_residual is the subgradient residual.
    bool at_kink = false;

    bool boundary_contaminated() const { return !boundary_flags.empty(); }
    double price(std::string_view period) const {
        for (std::size_t t = 0; t < periods.size(); ++t)
            if (periods[t] == period) return prices[t];
        throw InvalidScenario("unknown period '" + std::string(period) + "'");
    }
};

namespace detail {

inline Equilibrium evaluate_at(const Scenario& s, const std::vector<double>& prices,
                               Regime regime) {
    Equilibrium eq;
    eq.regime = regime;
    eq.periods = s.periods;
    eq.prices = prices;
    const std::size_t T = s.periods.size();
    eq.aggregate_demand.assign(T, 0.0);
    eq.individual_demand.assign(s.consumers.size(), std::vector<double>(T, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        double loss = 0.0;
        for (std::size_t i = 0; i < s.consumers.size(); ++i) {
            const auto& c = s.consumers[i];
            const auto& spec = c.loss_for(s.periods[t]);
            const auto pt = optimal_demand(spec, c.A, prices[t]);
            eq.individual_demand[i][t] = pt.quantity;
            eq.aggregate_demand[t] += pt.quantity;
            loss += normalized_loss(spec, c.A, pt.quantity).value;
            if (!pt.interior()) eq.boundary_flags.push_back({i, t, pt.regime});
        }
        eq.social_loss += s.cost.value(eq.aggregate_demand[t]) + loss;
    }
    return eq;
}

/// Variable price of one period: root of price - C'(D(price)), which is
/// increasing in price.
inline double variable_price(const Scenario& s, const AggregateView& view) {
    auto f = [&](double p) { return p - s.cost.first(aggregate_demand(view, p)); };
    const double hi = std::max(view.max_choke_price(), s.cost.first(0.0));
    if (f(0.0) >= 0.0) return 0.0;
    if (f(hi) <= 0.0) return hi;
    return numeric::bisect(f, 0.0, hi, s.options.var_tol * 1e-3 * (1.0 + hi), 400).x;
}

/// Derivative of total flat-price social loss: sum_t (C'(d_t) - p) dd_t/dp.
inline double flat_gradient(const Scenario& s, const std::vector<AggregateView>& views,
                            double p) {
    double g = 0.0;
    for (const auto& v : views) {
        g += (s.cost.first(aggregate_demand(v, p)) - p) * -aggregate_flexibility(v, p);
    }
    return g;
}

/// Prices in (a, b) where some consumer's demand slope is discontinuous.
inline constexpr double kKinkProbe = 1e-11;

/// Weight theta in [0, 1] with theta g(p-) + (1 - theta) g(p+) = 0 for the
/// flat-price gradient g at a kink p; 0.5 if the one-sided values do not
/// bracket zero.
inline double kink_weight(const Scenario& s, const std::vector<AggregateView>& views, double p) {
    const double eta = kKinkProbe * (1.0 + p);
    const double gm = flat_gradient(s, views, p - eta);
    const double gp = flat_gradient(s, views, p + eta);
    return gm < 0.0 && gp > 0.0 ? gp / (gp - gm) : 0.5;
}

inline std::vector<double> breakpoints(const Scenario& s, std::size_t t, double a, double b) {
    std::vector<double> out;
    for (const auto& c : s.consumers) {
        const auto& spec = c.loss_for(s.periods[t]);
        std::vector<double> k{choke_price(spec, c.A)};
        if (const auto* iso = spec.as_isoelastic()) {
            k.push_back(iso->pi_low);
            k.push_back(iso->pi_high);
        }
        for (double x : k)
            if (x > a && x < b) out.push_back(x);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Uniform scan of [lo, hi] in n cells, refined with nodes just either side of
/// every breakpoint of the listed periods so no cell straddles a jump.
inline std::vector<double> scan_nodes(const Scenario& s, const std::vector<std::size_t>& periods,
                                      double lo, double hi, int n) {
    std::vector<double> x;
    for (int i = 0; i <= n; ++i) x.push_back(i == n ? hi : lo + (hi - lo) * i / n);
    const double eta = kKinkProbe * (1.0 + std::abs(hi));
    for (std::size_t t : periods)
        for (double b : breakpoints(s, t, lo, hi)) {
            if (b - eta > lo) x.push_back(b - eta);
            if (b + eta < hi) x.push_back(b + eta);
        }
    std::sort(x.begin(), x.end());
    x.erase(std::unique(x.begin(), x.end()), x.end());
    return x;
}

}  // namespace detail

/// Social loss of period t alone at price p.
inline double period_social_loss(const Scenario& s, std::size_t t, double p) {
    double d = 0.0, loss = 0.0;
    for (const auto& c : s.consumers) {
        const auto& spec = c.loss_for(s.periods[t]);
        const auto pt = optimal_demand(spec, c.A, p);
        d += pt.quantity;
        loss += normalized_loss(spec, c.A, pt.quantity).value;
    }
    return s.cost.value(d) + loss;
}

/// Period-by-period marginal-cost prices.
inline Equilibrium solve_variable(const Scenario& s) {
    check_scenario(s);
    std::vector<double> prices(s.periods.size());
    for (std::size_t t = 0; t < s.periods.size(); ++t)
        prices[t] = detail::variable_price(s, s.view(t));
    auto eq = detail::evaluate_at(s, prices, Regime::Variable);
    eq.foc_residuals.resize(prices.size());
    for (std::size_t t = 0; t < prices.size(); ++t) {
        eq.foc_residuals[t] = s.cost.first(eq.aggregate_demand[t]) - prices[t];
        eq.foc_residual = std::max(eq.foc_residual, std::abs(eq.foc_residuals[t]));
    }
    return eq;
}

/// Single welfare-optimal price, bracketed by the variable prices. The
/// gradient can cross zero more than once when consumers drop out inside the
/// bracket; every upward crossing is refined and the lowest social loss wins.
inline Equilibrium solve_flat(const Scenario& s, const Equilibrium& var_eq) {
    const auto [lo_it, hi_it] = std::minmax_element(var_eq.prices.begin(), var_eq.prices.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<AggregateView> views;
    for (std::size_t t = 0; t < s.periods.size(); ++t) views.push_back(s.view(t));
    double price = lo;
    if (hi - lo > 1e-15 * (1.0 + hi)) {
        auto g = [&](double p) { return detail::flat_gradient(s, views, p); };
        auto W = [&](double p) {
            double w = 0.0;
            for (std::size_t t = 0; t < s.periods.size(); ++t) w += period_social_loss(s, t, p);
            return w;
        };
        std::vector<double> candidates;
        if (g(lo) >= 0.0) candidates.push_back(lo);
        std::vector<std::size_t> all(s.periods.size());
        for (std::size_t t = 0; t < all.size(); ++t) all[t] = t;
        const auto nodes = detail::scan_nodes(s, all, lo, hi, 64);
        double x0 = lo, g0 = g(lo);
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            const double x1 = nodes[i];
            const double g1 = g(x1);
            if (g0 < 0.0 && g1 >= 0.0)
                candidates.push_back(
                    numeric::bisect(g, x0, x1, s.options.flat_tol * 1e-5 * (1.0 + hi), 400).x);
            x0 = x1;
            g0 = g1;
        }
        if (g0 < 0.0) candidates.push_back(hi);
        price = candidates.front();
        double best = W(price);
        for (std::size_t i = 1; i < candidates.size(); ++i) {
            const double w = W(candidates[i]);
            if (w < best) {
                best = w;
                price = candidates[i];
            }
        }
    }
    const double eta = detail::kKinkProbe * (1.0 + price);
    bool at_kink = false;
    for (std::size_t t = 0; t < s.periods.size(); ++t) {
        const auto near = detail::breakpoints(s, t, price - eta, price + eta);
        if (near.empty()) continue;
        price = near.front();
        at_kink = true;
        break;
    }
    auto eq = detail::evaluate_at(s, std::vector<double>(s.periods.size(), price), Regime::Flat);
    eq.at_kink = at_kink;
    eq.foc_residuals.resize(s.periods.size());
    double total = 0.0;
    for (std::size_t t = 0; t < s.periods.size(); ++t) {
        eq.foc_residuals[t] = (s.cost.first(eq.aggregate_demand[t]) - price) *
                              -aggregate_flexibility(views[t], price);
        total += eq.foc_residuals[t];
    }
    eq.foc_residual = std::abs(total);
    // At a choke price the gradient jumps; optimality there means the
    // one-sided gradients bracket zero, so report the distance from zero to
    // that interval instead of the one-sided value.
    if (eq.at_kink) {
        const double gm = detail::flat_gradient(s, views, price - eta);
        const double gp = detail::flat_gradient(s, views, price + eta);
        eq.foc_residual = std::max({0.0, std::min(gm, gp), -std::max(gm, gp)});
    }
    return eq;
}

inline Equilibrium solve_flat(const Scenario& s) { return solve_flat(s, solve_variable(s)); }

/// Total social loss sum_t [C(d_t) + sum_i Jhat_it(d_it)] at the given prices.
inline double social_loss(const Scenario& s, const std::vector<double>& prices) {
    if (prices.size() != s.periods.size())
        throw PreconditionError("social_loss: one price per period required");
    for (double p : prices)
        if (!(p >= 0.0)) throw DomainError("social_loss: prices must be >= 0");
    return detail::evaluate_at(s, prices, Regime::Variable).social_loss;
}

struct WelfareCurvature {
    double demand_convexity_term;  // d''(p) [C'(d) + Jhat'(d)]
    double flexibility_term;       // d'(p)^2 [C''(d) + Jhat''(d)]
    double total() const { return demand_convexity_term + flexibility_term; }
};

/// Two-term decomposition of d2 W_t / d price2 for the aggregate consumer.
inline WelfareCurvature welfare_curvature(const Scenario& s, std::size_t t, double price) {
    const auto view = s.view(t);
    const double curv = aggregate_curvature(view, price);  // throws if all clamped
    const double d = aggregate_demand(view, price);
    const double slope = -aggregate_flexibility(view, price);
    const double convex = aggregate_demand_convexity(view, price);
    return {convex * (s.cost.first(d) - price), slope * slope * (s.cost.second(d) + curv)};
}

inline WelfareCurvature welfare_curvature(const Scenario& s, std::string_view period,
                                          double price) {
    return welfare_curvature(s, s.period_index(period), price);
}

struct PeriodPriceChange {
    std::string period;
    double delta;              // variable minus flat
    double average_curvature;  // mean of d2W/dp2 over the price interval
    double weighted_change;    // |delta| * average_curvature
};

struct PriceChangeReport {
    std::vector<PeriodPriceChange> periods;
    // Two-period diagnostics.
    std::optional<double> delta_ratio;      // |delta_0| / |delta_1|
    std::optional<double> curvature_ratio;  // avg_1 / avg_0
    bool balanced = true;                   // |delta_t| * avg_t equal across periods
};

namespace detail {

inline double curvature_or_zero(const Scenario& s, std::size_t t, double p) {
    if (interior_count(s.view(t), p) == 0) return 0.0;
    return welfare_curvature(s, t, p).total();
}

/// dW_t/dp = (C'(d) - p) dd/dp.
inline double welfare_slope(const Scenario& s, const AggregateView& view, double p) {
    return (s.cost.first(aggregate_demand(view, p)) - p) * -aggregate_flexibility(view, p);
}

/// \int_a^b d2W_t/dp2 dp, with the smooth part by adaptive Simpson between
/// breakpoints and the slope jumps at consumer choke prices added exactly.
inline double integrated_curvature(const Scenario& s, std::size_t t, double a, double b) {
    const auto view = s.view(t);
    auto knots = breakpoints(s, t, a, b);
    double area = 0.0;
    double left = a;
    knots.push_back(b);
    for (std::size_t i = 0; i < knots.size(); ++i) {
        const double right = knots[i];
        area += numeric::adaptive_simpson([&](double p) { return curvature_or_zero(s, t, p); },
                                          left, right, 1e-9, 1e-14);
        if (i + 1 < knots.size()) {
            const double eta = 1e-10 * (1.0 + right);
            area += welfare_slope(s, view, right + eta) - welfare_slope(s, view, right - eta);
        }
        left = right;
    }
    return area;
}

}  // namespace detail

inline PriceChangeReport price_change_report(const Scenario& s, const Equilibrium& flat_eq,
                                             const Equilibrium& var_eq) {
    PriceChangeReport rep;
    const double pf = flat_eq.prices.front();
    double theta = 0.5;
    if (flat_eq.at_kink) {
        std::vector<AggregateView> views;
        for (std::size_t t = 0; t < s.periods.size(); ++t) views.push_back(s.view(t));
        theta = detail::kink_weight(s, views, pf);
    }
    for (std::size_t t = 0; t < s.periods.size(); ++t) {
        const double pv = var_eq.prices[t];
        const double delta = pv - pf;
        double avg = 0.0;
        if (std::abs(delta) > 1e-14 * (1.0 + std::abs(pf))) {
            double area = detail::integrated_curvature(s, t, std::min(pf, pv), std::max(pf, pv));
            if (flat_eq.at_kink) {
                // Share of the slope jump at the flat price that belongs to
                // this side, consistent with the flat-price subgradient.
                const auto view = s.view(t);
                const double eta = detail::kKinkProbe * (1.0 + pf);
                const double wm = detail::welfare_slope(s, view, pf - eta);
                const double wp = detail::welfare_slope(s, view, pf + eta);
                const double w_theta = theta * wm + (1.0 - theta) * wp;
                area += delta > 0.0 ? wp - w_theta : w_theta - wm;
            }
            avg = area / std::abs(delta);
        } else {
            avg = detail::curvature_or_zero(s, t, pf);
        }
        rep.periods.push_back({s.periods[t], delta, avg, std::abs(delta) * avg});
    }
    if (rep.periods.size() == 2) {
        const auto& a = rep.periods[0];
        const auto& b = rep.periods[1];
        if (b.delta != 0.0) rep.delta_ratio = std::abs(a.delta) / std::abs(b.delta);
        if (a.average_curvature != 0.0) rep.curvature_ratio = b.average_curvature / a.average_curvature;
    }
    double lo = rep.periods.front().weighted_change, hi = lo;
    for (const auto& p : rep.periods) {
        lo = std::min(lo, p.weighted_change);
        hi = std::max(hi, p.weighted_change);
    }
    rep.balanced = rep.periods.size() != 2 || (hi - lo) <= 1e-6 * std::max(1.0, hi);
    return rep;
}

struct CurvatureSensitivity {
    double value;
    double third_derivative_term;  // 3 Jhat''' (d')^2 [C' - p]
    double cost_term;              // 2 d' C''
    bool at_variable_price;        // C'(d) == p, first term vanishes
    bool at_flat_price;
};

/// Partial derivative of d2W/dp2 with respect to the demand slope, holding
/// demand fixed.
inline CurvatureSensitivity curvature_flexibility_sensitivity(
    const Scenario& s, std::size_t t, double price, std::optional<double> flat_price = {}) {
    const auto view = s.view(t);
    if (interior_count(view, price) == 0)
        throw DomainError("curvature_flexibility_sensitivity: aggregate demand is clamped");
    const double d = aggregate_demand(view, price);
    const double slope = -aggregate_flexibility(view, price);
    const double j3 = aggregate_demand_convexity(view, price) / (slope * slope * slope);
    const double gap = s.cost.first(d) - price;
    CurvatureSensitivity out{};
    out.at_variable_price = std::abs(gap) <= 1e-9 * (1.0 + price);
    out.at_flat_price = flat_price && std::abs(*flat_price - price) <= 1e-12 * (1.0 + price);
    out.third_derivative_term = out.at_variable_price ? 0.0 : 3.0 * j3 * slope * slope * gap;
    out.cost_term = 2.0 * slope * s.cost.second(d);
    out.value = out.third_derivative_term + out.cost_term - 1.0;
    return out;
}

}  // namespace tou
