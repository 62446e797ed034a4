#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "tou/errors.hpp"

namespace tou::numeric {

struct RootResult {
    double x;
    int iterations;
    bool converged;
};

/// Bisection on a bracket [lo, hi] where f(lo) and f(hi) have opposite signs
/// (or one of them is zero). Stops when the bracket is narrower than xtol or
/// f hits zero exactly.
template <class F>
RootResult bisect(F&& f, double lo, double hi, double xtol = 1e-12, int max_iter = 200) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return {lo, 0, true};
    if (fhi == 0.0) return {hi, 0, true};
    if (std::signbit(flo) == std::signbit(fhi)) {
        throw SolverError("bisect: interval does not bracket a root");
    }
    for (int it = 1; it <= max_iter; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) return {mid, it, true};
        double fm = f(mid);
        if (fm == 0.0) return {mid, it, true};
        if (std::signbit(fm) == std::signbit(flo)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo <= xtol) return {0.5 * (lo + hi), it, true};
    }
    return {0.5 * (lo + hi), max_iter, false};
}

namespace detail {

template <class F>
double simpson_step(F& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    // Stop once the estimate is at rounding level; a tighter tol cannot be met.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                         (std::abs(left) + std::abs(right));
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol || std::abs(delta) <= noise) {
        return left + right + delta / 15.0;
    }
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b]. Orientation is respected:
/// integrating from a > b returns the negated integral.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double rel_tol = 1e-9,
                        double abs_tol = 1e-13, int max_depth = 30) {
    if (a == b) return 0.0;
    if (a > b) return -adaptive_simpson(f, b, a, rel_tol, abs_tol, max_depth);
    // A coarse pass fixes the scale for the relative tolerance.
    constexpr int kPanels = 8;
    const double h = (b - a) / kPanels;
    double coarse = 0.0;
    for (int i = 0; i < kPanels; ++i) {
        const double x0 = a + i * h;
        const double x1 = (i + 1 == kPanels) ? b : x0 + h;
        coarse += (x1 - x0) / 6.0 * (f(x0) + 4.0 * f(0.5 * (x0 + x1)) + f(x1));
    }
    const double tol = std::max(abs_tol, rel_tol * std::abs(coarse)) / kPanels;
    double total = 0.0;
    for (int i = 0; i < kPanels; ++i) {
        const double x0 = a + i * h;
        const double x1 = (i + 1 == kPanels) ? b : x0 + h;
        const double m = 0.5 * (x0 + x1);
        const double f0 = f(x0), f1 = f(x1), fm = f(m);
        const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        total += detail::simpson_step(f, x0, f0, x1, f1, m, fm, whole, tol, max_depth);
    }
    return total;
}

/// Golden-section minimization of a unimodal f on [a, b].
template <class F>
double golden_section_min(F&& f, double a, double b, double xtol = 1e-12, int max_iter = 300) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < max_iter && (b - a) > xtol; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

inline bool is_finite(double x) { return std::isfinite(x); }

}  // namespace tou::numeric
