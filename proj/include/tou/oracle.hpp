#pragma once

// Brute-force references for the analytic paths: grid-search flat price,
// quadrature utility change, Richardson finite differences, and a seeded
// generator of assumption-satisfying scenarios. None of these routines call
// the analytic solvers' root finders or integrators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "tou/demand.hpp"
#include "tou/market.hpp"

namespace tou::oracle {

struct OracleReport {
    std::string quantity;
    std::string context;  // where the check ran: scenario, consumer, period
    double analytic = 0.0;
    double oracle = 0.0;
    double abs_error = 0.0;
    double rel_error = 0.0;  // abs_error / max(1, |oracle|)
    double tolerance = 0.0;
    bool passed = false;
};

inline OracleReport compare(std::string quantity, double analytic, double oracle_value,
                            double tolerance, std::string context = {}) {
    OracleReport r;
    r.quantity = std::move(quantity);
    r.context = std::move(context);
    r.analytic = analytic;
    r.oracle = oracle_value;
    r.abs_error = std::abs(analytic - oracle_value);
    r.rel_error = r.abs_error / std::max(1.0, std::abs(oracle_value));
    r.tolerance = tolerance;
    r.passed = r.rel_error <= tolerance;
    return r;
}

// ---------------------------------------------------------------------------
// Finite differences

/// Central difference with one Richardson step (h and h/2).
inline double finite_difference(const std::function<double(double)>& fn, double x, double h) {
    auto central = [&](double step) { return (fn(x + step) - fn(x - step)) / (2.0 * step); };
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

/// Second derivative by central difference with one Richardson step.
inline double second_difference(const std::function<double(double)>& fn, double x, double h) {
    const double f0 = fn(x);
    auto central = [&](double step) {
        return (fn(x + step) - 2.0 * f0 + fn(x - step)) / (step * step);
    };
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

/// Prices where a consumer's demand curve is not smooth.
inline std::vector<double> kinks(const LossSpec& spec, double A) {
    std::vector<double> k{0.0, choke_price(spec, A)};
    if (const auto* iso = spec.as_isoelastic()) {
        k.push_back(iso->pi_low);
        k.push_back(iso->pi_high);
    }
    return k;
}

inline bool near_kink(const std::vector<double>& points, double x, double radius) {
    return std::any_of(points.begin(), points.end(),
                       [&](double k) { return std::abs(k - x) <= radius; });
}

// ---------------------------------------------------------------------------
// Quadrature

/// Iterative adaptive Simpson with an explicit work stack.
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol) {
    if (a == b) return 0.0;
    const double sign = a < b ? 1.0 : -1.0;
    if (a > b) std::swap(a, b);
    struct Panel {
        double a, b, fa, fm, fb, whole, tol;
        int depth;
    };
    auto rule = [](double a, double b, double fa, double fm, double fb) {
        return (b - a) * (fa + 4.0 * fm + fb) / 6.0;
    };
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double scale = std::max(1e-300, std::abs(rule(a, b, fa, fm, fb)));
    std::vector<Panel> stack{{a, b, fa, fm, fb, rule(a, b, fa, fm, fb), tol * scale, 0}};
    double total = 0.0;
    while (!stack.empty()) {
        const Panel p = stack.back();
        stack.pop_back();
        const double m = 0.5 * (p.a + p.b);
        const double flm = f(0.5 * (p.a + m));
        const double frm = f(0.5 * (m + p.b));
        const double left = rule(p.a, m, p.fa, flm, p.fm);
        const double right = rule(m, p.b, p.fm, frm, p.fb);
        const double err = left + right - p.whole;
        // Force a few levels of refinement so kinks are not skipped.
        const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                             (std::abs(left) + std::abs(right));
        const bool settled = std::abs(err) <= 15.0 * p.tol || std::abs(err) <= noise;
        if ((p.depth >= 4 && settled) || p.depth >= 30) {
            total += left + right + err / 15.0;
        } else {
            stack.push_back({p.a, m, p.fa, flm, p.fm, left, 0.5 * p.tol, p.depth + 1});
            stack.push_back({m, p.b, p.fm, frm, p.fb, right, 0.5 * p.tol, p.depth + 1});
        }
    }
    return sign * total;
}

/// Delta U by integrating -A d*(p) from the flat price to each variable price.
inline double quadrature_delta_u(const Consumer& c, const Equilibrium& flat_eq,
                                 const Equilibrium& var_eq, double tol = 1e-11) {
    if (!(tol >= 1e-12)) throw PreconditionError("quadrature_delta_u: tol must be >= 1e-12");
    const double pf = flat_eq.prices.front();
    double total = 0.0;
    for (std::size_t t = 0; t < var_eq.periods.size(); ++t) {
        const auto& spec = c.loss_for(var_eq.periods[t]);
        total += simpson([&](double p) { return -c.A * optimal_demand(spec, c.A, p).quantity; },
                         pf, var_eq.prices[t], tol);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Grid search

/// Minimizer of fn over a uniform grid on [lo, hi], refined by golden section
/// around the best grid cell. Written out here so it shares nothing with the
/// solvers.
inline double grid_minimize(const std::function<double(double)>& fn, double lo, double hi,
                            int grid_points) {
    int best = 0;
    double best_val = fn(lo);
    for (int i = 1; i <= grid_points; ++i) {
        const double v = fn(lo + (hi - lo) * i / grid_points);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    double a = lo + (hi - lo) * std::max(0, best - 1) / grid_points;
    double b = lo + (hi - lo) * std::min(grid_points, best + 1) / grid_points;
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - r * (b - a), x2 = a + r * (b - a);
    double f1 = fn(x1), f2 = fn(x2);
    const double xtol = 1e-13 * (1.0 + std::abs(hi));
    while (b - a > xtol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = fn(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = fn(x2);
        }
    }
    const double mid = 0.5 * (a + b);
    return fn(mid) <= best_val ? mid : lo + (hi - lo) * best / grid_points;
}

/// Brute-force minimizer of flat-price social loss on [0, max choke price].
inline double grid_flat_price(const Scenario& s, int grid_points = 2000) {
    if (grid_points < 1000) throw PreconditionError("grid_flat_price: grid_points must be >= 1000");
    double hi = 0.0;
    for (std::size_t t = 0; t < s.periods.size(); ++t)
        hi = std::max(hi, s.view(t).max_choke_price());
    return grid_minimize(
        [&](double p) {
            double w = 0.0;
            for (std::size_t t = 0; t < s.periods.size(); ++t) w += period_social_loss(s, t, p);
            return w;
        },
        0.0, hi, grid_points);
}

// ---------------------------------------------------------------------------
// Random scenarios

/// Relative weights of the loss families drawn per consumer.
struct FamilyMix {
    double quadratic = 1.0;
    double isoelastic = 0.0;
    double cubic = 0.0;  // custom J = k(d_bar-d)^3/3 + m(d_bar-d)^2

    static FamilyMix all_quadratic() { return {1.0, 0.0, 0.0}; }
    static FamilyMix all_isoelastic() { return {0.0, 1.0, 0.0}; }
    static FamilyMix mixed() { return {1.0, 1.0, 1.0}; }
};

inline std::string period_label(int t, int T) {
    if (T == 2) return t == 0 ? "PE" : "OP";
    return "P" + std::to_string(t + 1);
}

/// Deterministic given the seed. Periods are ordered most critical first and
/// every consumer passes validate_assumptions.
inline Scenario random_scenario(std::uint64_t seed, int T, int N, FamilyMix mix = {}) {
    if (T < 2 || N < 1) throw PreconditionError("random_scenario: need T >= 2 and N >= 1");
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    Scenario s;
    for (int t = 0; t < T; ++t) s.periods.push_back(period_label(t, T));
    s.cost.coefficients = {0.0, uniform(0.0, 1.0), uniform(0.1, 2.0)};
    const double total_weight = mix.quadratic + mix.isoelastic + mix.cubic;
    if (!(total_weight > 0.0)) throw PreconditionError("random_scenario: empty family mix");

    for (int i = 0; i < N; ++i) {
        bool accepted = false;
        std::string last_failure;
        for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
            Consumer c;
            c.id = "c" + std::to_string(i + 1);
            c.A = uniform(0.5, 2.0);
            const double pick = uniform(0.0, total_weight);
            // Parameters grow from the least to the most critical period.
            if (pick < mix.quadratic) {
                double k = uniform(0.5, 3.0), d_bar = uniform(1.0, 5.0);
                for (int t = T - 1; t >= 0; --t) {
                    c.loss.emplace(s.periods[t], LossSpec::quadratic(k, d_bar));
                    k *= uniform(1.0, 2.0);
                    d_bar *= uniform(1.0, 2.0);
                }
            } else if (pick < mix.quadratic + mix.isoelastic) {
                // Scaling the price axis scales inverse demand, and with it
                // J, J' and J'', uniformly; scaling quantity would not.
                const double eps = uniform(-1.5, -0.2);
                const double d_ref = uniform(0.5, 3.0);
                double pi_ref = uniform(1.0, 5.0);
                for (int t = T - 1; t >= 0; --t) {
                    c.loss.emplace(s.periods[t], LossSpec::isoelastic(d_ref, pi_ref, eps));
                    pi_ref *= uniform(1.0, 2.0);
                }
            } else {
                double k = uniform(0.1, 1.0), m = uniform(0.25, 1.5), d_bar = uniform(1.0, 5.0);
                for (int t = T - 1; t >= 0; --t) {
                    c.loss.emplace(s.periods[t], cubic_loss(k, m, d_bar));
                    k *= uniform(1.0, 2.0);
                    m *= uniform(1.0, 2.0);
                    d_bar *= uniform(1.0, 2.0);
                }
            }
            const auto report = validate_assumptions(c, s.periods, s.options.grid_points);
            if (report.all_passed()) {
                s.consumers.push_back(std::move(c));
                accepted = true;
            } else {
                for (const auto& chk : report.checks)
                    if (!chk.passed) last_failure = chk.name + " (" + chk.period + "): " + chk.detail;
            }
        }
        if (!accepted)
            throw GenerationError("random_scenario(seed=" + std::to_string(seed) + "): consumer " +
                                  std::to_string(i + 1) +
                                  " failed validation 100 times; last: " + last_failure);
    }
    check_scenario(s);
    return s;
}

}  // namespace tou::oracle
