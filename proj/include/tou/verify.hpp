#pragma once

// Oracle cross-check battery. Every analytic quantity in kClosedForms is
// checked against an independent reference by check_all; tests assert that
// the battery covers the whole registry.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tou/extensions.hpp"
#include "tou/oracle.hpp"
#include "tou/welfare.hpp"

namespace tou::oracle {

inline constexpr std::array<std::string_view, 20> kClosedForms = {
    "demand.normalized_loss_first",
    "demand.normalized_loss_second",
    "demand.flexibility",
    "demand.convexity",
    "demand.marginal_utility",
    "demand.loss_sensitivity",
    "aggregation.flexibility",
    "aggregation.curvature",
    "aggregation.convexity",
    "market.variable_price",
    "market.flat_price",
    "market.welfare_curvature",
    "market.average_curvature",
    "market.curvature_sensitivity",
    "welfare.utility_change",
    "welfare.linear_exact",
    "welfare.isoelastic_closed_form",
    "extensions.monopoly_profit",
    "extensions.ramsey_tangency",
    "extensions.flat_price_identity",
};

struct BatteryOptions {
    double tol = 1e-6;
    int grid_points = 2000;
};

namespace detail {

inline double fd_step(double x) { return 1e-3 * (1.0 + std::abs(x)); }

inline std::vector<double> scenario_kinks(const Scenario& s, std::size_t t) {
    std::vector<double> all;
    for (const auto& c : s.consumers) {
        auto k = kinks(c.loss_for(s.periods[t]), c.A);
        all.insert(all.end(), k.begin(), k.end());
    }
    return all;
}

inline bool all_interior(const Scenario& s, std::size_t t, double p) {
    for (const auto& c : s.consumers)
        if (!optimal_demand(c, s.periods[t], p).interior()) return false;
    return true;
}

class Collector {
public:
    explicit Collector(double tol) : tol_(tol) {}

    void add(std::string_view name, double analytic, double oracle_value, std::string context) {
        reports_.push_back(compare(std::string(name), analytic, oracle_value, tol_, std::move(context)));
    }
    std::vector<OracleReport> take() { return std::move(reports_); }

private:
    double tol_;
    std::vector<OracleReport> reports_;
};

inline std::string where(const std::string& tag, const std::string& consumer,
                         const std::string& period) {
    std::string w = tag;
    if (!consumer.empty()) w += "/" + consumer;
    if (!period.empty()) w += "/" + period;
    return w;
}

inline void check_consumer_point(Collector& out, const std::string& tag, const Consumer& c,
                                 const std::string& period, double p) {
    const auto& spec = c.loss_for(period);
    const double h = fd_step(p);
    const auto kinked = kinks(spec, c.A);
    if (near_kink(kinked, p, 1.5 * h) || !optimal_demand(spec, c.A, p).interior()) return;
    const std::string ctx = where(tag, c.id, period);
    auto demand = [&](double x) { return optimal_demand(spec, c.A, x).quantity; };

    out.add("demand.flexibility", flexibility(spec, c.A, p), -finite_difference(demand, p, h), ctx);
    out.add("demand.convexity", demand_convexity(spec, c.A, p), second_difference(demand, p, h), ctx);

    // Realized utility -A (Jhat(d*) + p d*); its price derivative is -A d*.
    auto utility = [&](double x) {
        const double d = demand(x);
        return -c.A * (normalized_loss(spec, c.A, d).value + x * d);
    };
    out.add("demand.marginal_utility", marginal_utility_wrt_price(spec, c.A, p),
            finite_difference(utility, p, h), ctx);
    auto realized_loss = [&](double x) { return c.A * normalized_loss(spec, c.A, demand(x)).value; };
    out.add("demand.loss_sensitivity", loss_sensitivity_to_price(spec, c.A, p),
            finite_difference(realized_loss, p, h), ctx);

    const double d = demand(p);
    const double hd = 1e-3 * (1.0 + d);
    if (d - 1.5 * hd > 0.0 && d + 1.5 * hd < spec.d_bar()) {
        auto J = [&](double x) { return normalized_loss(spec, c.A, x).value; };
        const auto an = normalized_loss(spec, c.A, d);
        out.add("demand.normalized_loss_first", an.first, finite_difference(J, d, hd), ctx);
        out.add("demand.normalized_loss_second", an.second, second_difference(J, d, hd), ctx);
    }
}

inline void check_period_point(Collector& out, const std::string& tag, const Scenario& s,
                               std::size_t t, double p) {
    const double h = fd_step(p);
    if (near_kink(scenario_kinks(s, t), p, 1.5 * h) || !all_interior(s, t, p)) return;
    const auto view = s.view(t);
    const std::string ctx = where(tag, "", s.periods[t]);
    auto D = [&](double x) { return aggregate_demand(view, x); };
    const double slope = finite_difference(D, p, h);
    out.add("aggregation.flexibility", aggregate_flexibility(view, p), -slope, ctx);
    out.add("aggregation.curvature", aggregate_curvature(view, p), -1.0 / slope, ctx);
    out.add("aggregation.convexity", aggregate_demand_convexity(view, p), second_difference(D, p, h),
            ctx);
    auto W = [&](double x) { return period_social_loss(s, t, x); };
    out.add("market.welfare_curvature", welfare_curvature(s, t, p).total(),
            second_difference(W, p, h), ctx);

    // d2W/dp2 = j3 s^3 gap + s^2 C'' - s as a function of the slope s.
    const double d = D(p);
    const double s0 = -aggregate_flexibility(view, p);
    const double j3 = aggregate_demand_convexity(view, p) / (s0 * s0 * s0);
    const double gap = s.cost.first(d) - p;
    const double c2 = s.cost.second(d);
    auto curvature_of_slope = [&](double sl) { return j3 * sl * sl * sl * gap + sl * sl * c2 - sl; };
    out.add("market.curvature_sensitivity", curvature_flexibility_sensitivity(s, t, p).value,
            finite_difference(curvature_of_slope, s0, 1e-3 * (1.0 + std::abs(s0))), ctx);
}

}  // namespace detail

/// Runs every oracle check that applies to the scenario. Checks whose
/// preconditions are not met at a point (clamped demand, kinks, prices
/// outside the constant-elasticity band) are skipped rather than reported.
inline std::vector<OracleReport> check_all(const Scenario& s, const std::string& tag,
                                           BatteryOptions opt = {}) {
    detail::Collector out(opt.tol);
    const auto var = solve_variable(s);
    const auto flat = solve_flat(s, var);
    const double pf = flat.prices.front();
    const std::size_t T = s.periods.size();

    for (std::size_t t = 0; t < T; ++t) {
        double hi = s.view(t).max_choke_price();
        const double pv = grid_minimize([&](double p) { return period_social_loss(s, t, p); }, 0.0, hi,
                                        opt.grid_points);
        out.add("market.variable_price", var.prices[t], pv, detail::where(tag, "", s.periods[t]));
    }
    out.add("market.flat_price", pf, grid_flat_price(s, opt.grid_points), tag);

    for (std::size_t t = 0; t < T; ++t) {
        const double pv = var.prices[t];
        for (double p : {pv, pf, 0.5 * (pv + pf)}) {
            detail::check_period_point(out, tag, s, t, p);
            for (const auto& c : s.consumers) detail::check_consumer_point(out, tag, c, s.periods[t], p);
        }
    }

    // Average curvature over [p_F, p_V] is the secant of dW/dp.
    const auto report = price_change_report(s, flat, var);
    for (std::size_t t = 0; t < T; ++t) {
        const double pv = var.prices[t];
        const double delta = pv - pf;
        if (std::abs(delta) < 1e-3 * (1.0 + pf)) continue;
        const auto kinked = detail::scenario_kinks(s, t);
        const double h = detail::fd_step(std::max(pv, pf));
        if (near_kink(kinked, pv, 1.5 * h) || near_kink(kinked, pf, 1.5 * h)) continue;
        auto W = [&](double x) { return period_social_loss(s, t, x); };
        const double secant = (finite_difference(W, pv, h) - finite_difference(W, pf, h)) / delta;
        out.add("market.average_curvature", report.periods[t].average_curvature, secant,
                detail::where(tag, "", s.periods[t]));
    }

    for (const auto& c : s.consumers) {
        const double q = quadrature_delta_u(c, flat, var, 1e-12);
        out.add("welfare.utility_change", utility_change(c, flat, var, s.options.quad_tol * 1e-3).total,
                q, detail::where(tag, c.id, ""));
        if (tou::detail::linear_exact(c, flat, var))
            out.add("welfare.linear_exact", c.A * linear_bound(c, flat, var, BoundSide::Upper), q,
                    detail::where(tag, c.id, ""));
        if (tou::detail::isoelastic_in_core(c, flat, var))
            out.add("welfare.isoelastic_closed_form",
                    c.A * pf * tou::detail::isoelastic_value(c, flat, var), q,
                    detail::where(tag, c.id, ""));
    }

    double mono_oracle = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double hi = s.view(t).max_choke_price();
        const double p = grid_minimize([&](double x) { return -period_profit(s, t, x); }, 0.0, hi,
                                       opt.grid_points);
        mono_oracle += period_profit(s, t, p);
    }
    out.add("extensions.monopoly_profit", monopoly_profit(s), mono_oracle, tag);

    // Profit-constrained prices are tangent points: dW/dp_t / dPi/dp_t equals
    // nu / (1 - 2 nu) in every period, with both gradients by finite differences.
    for (double nu : {-0.2, 0.05, 0.2}) {
        const auto prices = tou::detail::ramsey_prices(s, nu, var.prices);
        const double expected = nu / (1.0 - 2.0 * nu);
        for (std::size_t t = 0; t < T; ++t) {
            const double p = prices[t];
            const double h = detail::fd_step(p);
            if (near_kink(detail::scenario_kinks(s, t), p, 1.5 * h) || !detail::all_interior(s, t, p) ||
                aggregate_demand(s.view(t), p) <= 0.0)
                continue;
            const double dW = finite_difference([&](double x) { return period_social_loss(s, t, x); }, p, h);
            const double dPi = finite_difference([&](double x) { return period_profit(s, t, x); }, p, h);
            if (std::abs(dPi) < 1e-6) continue;
            out.add("extensions.ramsey_tangency", expected, dW / dPi,
                    detail::where(tag + "/nu=" + std::to_string(nu), "", s.periods[t]));
        }
    }

    if (T >= 2) {
        // A flat price satisfies p = sum_t C'(d_t) |d_t'| / sum_t |d_t'|.
        double num = 0.0, den = 0.0;
        bool smooth = true;
        for (std::size_t t = 0; t < T; ++t) {
            const double h = detail::fd_step(pf);
            if (near_kink(detail::scenario_kinks(s, t), pf, 1.5 * h)) smooth = false;
            const double flex =
                -finite_difference([&](double x) { return aggregate_demand(s.view(t), x); }, pf, h);
            num += s.cost.first(aggregate_demand(s.view(t), pf)) * flex;
            den += flex;
        }
        if (smooth && den > 0.0)
            out.add("extensions.flat_price_identity", multi_period_flat_price(s).weighted_marginal_cost,
                    num / den, tag);
    }
    return out.take();
}

struct SuiteResult {
    std::vector<OracleReport> reports;
    std::size_t scenarios = 0;
    std::size_t failures = 0;
    bool passed() const { return failures == 0; }
};

/// Battery on the given scenario plus count random mixed-family scenarios
/// drawn from seed, seed + 1, ....
inline SuiteResult run_verify_suite(const Scenario* base, std::uint64_t seed, int count,
                                    BatteryOptions opt = {}) {
    SuiteResult res;
    auto absorb = [&](const Scenario& s, const std::string& tag) {
        auto reports = check_all(s, tag, opt);
        for (auto& r : reports) {
            if (!r.passed) ++res.failures;
            res.reports.push_back(std::move(r));
        }
        ++res.scenarios;
    };
    if (base) absorb(*base, "scenario");
    for (int i = 0; i < count; ++i) {
        const std::uint64_t sd = seed + static_cast<std::uint64_t>(i);
        std::mt19937_64 shape(sd ^ 0x9e3779b97f4a7c15ULL);
        const int T = 2 + static_cast<int>(shape() % 2);
        const int N = 1 + static_cast<int>(shape() % 4);
        absorb(random_scenario(sd, T, N, FamilyMix::mixed()), "random#" + std::to_string(sd));
    }
    return res;
}

/// Registry entries that no report in the list covers.
inline std::vector<std::string> uncovered(const std::vector<OracleReport>& reports) {
    std::set<std::string> seen;
    for (const auto& r : reports) seen.insert(r.quantity);
    std::vector<std::string> missing;
    for (auto name : kClosedForms)
        if (!seen.count(std::string(name))) missing.emplace_back(name);
    return missing;
}

}  // namespace tou::oracle
