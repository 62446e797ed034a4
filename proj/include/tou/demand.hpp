#pragma once

// Consumer-side primitives: loss-function families, the normalized loss
// J/A, optimal demand d*(price), flexibility, demand convexity and the
// assumption validator.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "tou/errors.hpp"
#include "tou/numerics.hpp"

namespace tou {

/// J(d) = k (d_bar - d)^2, linear demand.
struct QuadraticLoss {
    double k;
    double d_bar;
};

/// Demand-first family: constant elasticity between pi_low and pi_high,
/// continued by tangent lines outside that band so the curve stays C1.
struct IsoelasticDemand {
    double d_ref;
    double pi_ref;
    double epsilon;
    double pi_low;
    double pi_high;

    double level_at(double price) const { return d_ref * std::pow(price / pi_ref, epsilon); }
    double level_low() const { return level_at(pi_low); }
    double level_high() const { return level_at(pi_high); }
    // Signed tangent slopes at the band edges (negative).
    double slope_low() const { return epsilon * level_low() / pi_low; }
    double slope_high() const { return epsilon * level_high() / pi_high; }
    /// Price where the upper tangent reaches zero demand.
    double choke() const { return pi_high - level_high() / slope_high(); }
    /// Demand at zero price.
    double satiation() const { return level_low() - slope_low() * pi_low; }

    double demand(double price) const {
        if (price <= 0.0) return satiation();
        if (price < pi_low) return level_low() + slope_low() * (price - pi_low);
        if (price <= pi_high) return level_at(price);
        return std::max(0.0, level_high() + slope_high() * (price - pi_high));
    }
    /// dD/dprice on the open piece containing price (<= 0).
    double slope(double price) const {
        if (price < pi_low) return slope_low();
        if (price <= pi_high) return epsilon * level_at(price) / price;
        if (price < choke()) return slope_high();
        return 0.0;
    }
    /// d2D/dprice2: zero on the linear tails.
    double curvature(double price) const {
        if (price < pi_low || price > pi_high) return 0.0;
        return epsilon * (epsilon - 1.0) * level_at(price) / (price * price);
    }
    bool in_core(double price) const { return price >= pi_low && price <= pi_high; }

    /// Inverse demand on [0, satiation()].
    double inverse(double quantity) const {
        if (quantity >= satiation()) return 0.0;
        if (quantity <= 0.0) return choke();
        if (quantity >= level_low()) return pi_low + (quantity - level_low()) / slope_low();
        if (quantity >= level_high()) return pi_ref * std::pow(quantity / d_ref, 1.0 / epsilon);
        return pi_high + (quantity - level_high()) / slope_high();
    }

    /// Closed-form \int_a^b D(p) dp for a, b >= 0 in either order.
    double integral(double a, double b) const { return antiderivative(b) - antiderivative(a); }

    /// \int_0^p D(y) dy.
    double antiderivative(double p) const {
        p = std::max(p, 0.0);
        const double low_part = [&] {
            const double q = std::min(p, pi_low);
            return level_low() * q + slope_low() * (0.5 * q * q - pi_low * q);
        }();
        if (p <= pi_low) return low_part;
        const double core_end = std::min(p, pi_high);
        const double core = power_integral(pi_low, core_end);
        if (p <= pi_high) return low_part + core;
        const double q = std::min(p, choke()) - pi_high;
        return low_part + core + level_high() * q + 0.5 * slope_high() * q * q;
    }

    /// \int_a^b d_ref (p / pi_ref)^epsilon dp, stable near epsilon = -1.
    double power_integral(double a, double b) const {
        const double ua = a / pi_ref;
        const double log_ratio = std::log(b / a);
        const double delta = 1.0 + epsilon;
        if (std::abs(delta) < 1e-8) return d_ref * pi_ref * log_ratio;
        return d_ref * pi_ref * std::pow(ua, delta) * std::expm1(delta * log_ratio) / delta;
    }
};

/// Loss given by user-supplied evaluators of J and its first three
/// derivatives on [0, d_bar].
struct CustomLoss {
    std::function<double(double)> value;
    std::function<double(double)> first;
    std::function<double(double)> second;
    std::function<double(double)> third;
    double d_bar;
    // Optional named form, kept so the loss can be written back out.
    std::string name;
    std::vector<std::pair<std::string, double>> params;
};

enum class LossFamily { Quadratic, IsoelasticDemand, Custom };

inline std::string_view to_string(LossFamily f) {
    switch (f) {
        case LossFamily::Quadratic: return "quadratic";
        case LossFamily::IsoelasticDemand: return "isoelastic";
        case LossFamily::Custom: return "custom";
    }
    return "unknown";
}

class LossSpec {
public:
    static LossSpec quadratic(double k, double d_bar) {
        if (!(k > 0.0) || !std::isfinite(k)) throw InvalidScenario("quadratic loss: k must be > 0");
        if (!(d_bar > 0.0) || !std::isfinite(d_bar))
            throw InvalidScenario("quadratic loss: d_bar must be > 0");
        return LossSpec(QuadraticLoss{k, d_bar});
    }

    static LossSpec isoelastic(double d_ref, double pi_ref, double epsilon, double pi_low,
                               double pi_high) {
        if (!(d_ref > 0.0) || !std::isfinite(d_ref))
            throw InvalidScenario("isoelastic demand: d_ref must be > 0");
        if (!(pi_ref > 0.0) || !std::isfinite(pi_ref))
            throw InvalidScenario("isoelastic demand: pi_ref must be > 0");
        if (!(epsilon < 0.0) || !std::isfinite(epsilon))
            throw InvalidScenario("isoelastic demand: epsilon must be < 0");
        if (!(pi_low > 0.0 && pi_low < pi_ref && pi_ref < pi_high) || !std::isfinite(pi_high))
            throw InvalidScenario("isoelastic demand: need 0 < pi_low < pi_ref < pi_high");
        return LossSpec(IsoelasticDemand{d_ref, pi_ref, epsilon, pi_low, pi_high});
    }

    /// Isoelastic spec with tails placed at 1% and 100x of the reference price.
    static LossSpec isoelastic(double d_ref, double pi_ref, double epsilon) {
        return isoelastic(d_ref, pi_ref, epsilon, 0.01 * pi_ref, 100.0 * pi_ref);
    }

    static LossSpec custom(CustomLoss loss) {
        if (!(loss.d_bar > 0.0)) throw InvalidScenario("custom loss: d_bar must be > 0");
        if (!loss.value || !loss.first || !loss.second || !loss.third)
            throw InvalidScenario("custom loss: all four evaluators are required");
        return LossSpec(std::move(loss));
    }

    LossFamily family() const { return static_cast<LossFamily>(spec_.index()); }
    const QuadraticLoss* as_quadratic() const { return std::get_if<QuadraticLoss>(&spec_); }
    const IsoelasticDemand* as_isoelastic() const { return std::get_if<IsoelasticDemand>(&spec_); }
    const CustomLoss* as_custom() const { return std::get_if<CustomLoss>(&spec_); }

    double d_bar() const {
        return std::visit(
            [](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, IsoelasticDemand>) return s.satiation();
                else return s.d_bar;
            },
            spec_);
    }

private:
    using Variant = std::variant<QuadraticLoss, IsoelasticDemand, CustomLoss>;
    explicit LossSpec(Variant v) : spec_(std::move(v)) {}
    Variant spec_;
};

/// J(d) = k (d_bar - d)^3 / 3 + m (d_bar - d)^2 on [0, d_bar], k >= 0, m > 0.
inline LossSpec cubic_loss(double k, double m, double d_bar) {
    if (!(k >= 0.0) || !std::isfinite(k)) throw InvalidScenario("cubic loss: k must be >= 0");
    if (!(m > 0.0) || !std::isfinite(m)) throw InvalidScenario("cubic loss: m must be > 0");
    if (!(d_bar > 0.0) || !std::isfinite(d_bar))
        throw InvalidScenario("cubic loss: d_bar must be > 0");
    CustomLoss c;
    c.value = [=](double d) {
        const double g = d_bar - d;
        return k * g * g * g / 3.0 + m * g * g;
    };
    c.first = [=](double d) {
        const double g = d_bar - d;
        return -(k * g * g + 2.0 * m * g);
    };
    c.second = [=](double d) { return 2.0 * k * (d_bar - d) + 2.0 * m; };
    c.third = [=](double) { return -2.0 * k; };
    c.d_bar = d_bar;
    c.name = "cubic";
    c.params = {{"k", k}, {"m", m}, {"d_bar", d_bar}};
    return LossSpec::custom(std::move(c));
}

struct Consumer {
    std::string id;
    double A = 1.0;  // marginal disutility of expenditure
    std::map<std::string, LossSpec, std::less<>> loss;

    const LossSpec& loss_for(std::string_view period) const {
        auto it = loss.find(period);
        if (it == loss.end())
            throw InvalidScenario("consumer '" + id + "' has no loss for period '" +
                                  std::string(period) + "'");
        return it->second;
    }
};

enum class DemandRegime { Interior, ClampedZero, ClampedMax };

inline std::string_view to_string(DemandRegime r) {
    switch (r) {
        case DemandRegime::Interior: return "interior";
        case DemandRegime::ClampedZero: return "clamped_zero";
        case DemandRegime::ClampedMax: return "clamped_max";
    }
    return "unknown";
}

struct DemandPoint {
    double price;
    double quantity;
    DemandRegime regime;

    bool interior() const { return regime == DemandRegime::Interior; }
};

/// Normalized loss J/A and its first three derivatives at one quantity.
struct LossDerivatives {
    double value;
    double first;
    double second;
    double third;
};

// ---------------------------------------------------------------------------
// Normalized loss

inline LossDerivatives normalized_loss(const LossSpec& spec, double A, double d) {
    const double d_bar = spec.d_bar();
    if (!(d >= 0.0 && d <= d_bar))
        throw DomainError("normalized_loss: quantity outside [0, d_bar]");
    if (const auto* q = spec.as_quadratic()) {
        const double gap = q->d_bar - d;
        return {q->k * gap * gap / A, -2.0 * q->k * gap / A, 2.0 * q->k / A, 0.0};
    }
    if (const auto* c = spec.as_custom()) {
        return {c->value(d) / A, c->first(d) / A, c->second(d) / A, c->third(d) / A};
    }
    const auto& iso = *spec.as_isoelastic();
    // Jhat(d) = \int_d^{d_bar} P(x) dx = \int_0^{P(d)} D(y) dy - P(d) d.
    const double p = iso.inverse(d);
    const double value = std::max(0.0, iso.antiderivative(p) - p * d);
    // Right-hand slope at the satiation point, left-hand at the choke point.
    const double probe = d >= d_bar ? 0.0 : (d <= 0.0 ? iso.choke() * (1.0 - 1e-15) : p);
    const double slope = iso.slope(probe);
    const double second = -1.0 / slope;
    const double third = iso.curvature(probe) / (slope * slope * slope);
    return {value, -p, second, third};
}

inline LossDerivatives normalized_loss(const Consumer& c, std::string_view period, double d) {
    return normalized_loss(c.loss_for(period), c.A, d);
}

/// -Jhat'(0): the price at which demand reaches zero.
inline double choke_price(const LossSpec& spec, double A) {
    if (const auto* q = spec.as_quadratic()) return 2.0 * q->k * q->d_bar / A;
    if (const auto* iso = spec.as_isoelastic()) return iso->choke();
    return -spec.as_custom()->first(0.0) / A;
}

// ---------------------------------------------------------------------------
// Optimal demand

inline DemandPoint optimal_demand(const LossSpec& spec, double A, double price) {
    if (!(price >= 0.0)) throw DomainError("optimal_demand: price must be >= 0");
    if (const auto* q = spec.as_quadratic()) {
        const double raw = q->d_bar - A * price / (2.0 * q->k);
        if (raw >= q->d_bar) return {price, q->d_bar, DemandRegime::ClampedMax};
        if (raw <= 0.0) return {price, 0.0, DemandRegime::ClampedZero};
        return {price, raw, DemandRegime::Interior};
    }
    if (const auto* iso = spec.as_isoelastic()) {
        if (price <= 0.0) return {price, iso->satiation(), DemandRegime::ClampedMax};
        if (price >= iso->choke()) return {price, 0.0, DemandRegime::ClampedZero};
        return {price, iso->demand(price), DemandRegime::Interior};
    }
    const auto& c = *spec.as_custom();
    // Jhat' is increasing on [0, d_bar]; solve Jhat'(d) = -price.
    auto residual = [&](double d) { return c.first(d) / A + price; };
    const double at_zero = residual(0.0);
    const double at_max = residual(c.d_bar);
    if (at_zero >= 0.0) return {price, 0.0, DemandRegime::ClampedZero};
    if (at_max <= 0.0) return {price, c.d_bar, DemandRegime::ClampedMax};
    const auto root = numeric::bisect(residual, 0.0, c.d_bar, 1e-12, 200);
    // Newton polish to rounding level so integrals of demand are smooth.
    double d = root.x;
    for (int i = 0; i < 3; ++i) {
        const double slope = c.second(d) / A;
        if (!(slope > 0.0)) break;
        const double next = d - residual(d) / slope;
        if (!(next > 0.0 && next < c.d_bar) || std::abs(residual(next)) >= std::abs(residual(d)))
            break;
        d = next;
    }
    return {price, d, DemandRegime::Interior};
}

inline DemandPoint optimal_demand(const Consumer& c, std::string_view period, double price) {
    return optimal_demand(c.loss_for(period), c.A, price);
}

/// |d d*/d price|; zero at clamped points.
inline double flexibility(const LossSpec& spec, double A, double price) {
    const auto pt = optimal_demand(spec, A, price);
    if (!pt.interior()) return 0.0;
    if (const auto* q = spec.as_quadratic()) return A / (2.0 * q->k);
    if (const auto* iso = spec.as_isoelastic()) return -iso->slope(price);
    return A / spec.as_custom()->second(pt.quantity);
}

inline double flexibility(const Consumer& c, std::string_view period, double price) {
    return flexibility(c.loss_for(period), c.A, price);
}

/// d2 d*/d price2 = -A^2 J'''/(J'')^3; zero at clamped points.
inline double demand_convexity(const LossSpec& spec, double A, double price) {
    const auto pt = optimal_demand(spec, A, price);
    if (!pt.interior()) return 0.0;
    if (spec.as_quadratic()) return 0.0;
    if (const auto* iso = spec.as_isoelastic()) return iso->curvature(price);
    const auto& c = *spec.as_custom();
    const double j2 = c.second(pt.quantity);
    return -A * A * c.third(pt.quantity) / (j2 * j2 * j2);
}

inline double demand_convexity(const Consumer& c, std::string_view period, double price) {
    return demand_convexity(c.loss_for(period), c.A, price);
}

/// dU/dprice: -A d* at interior points, zero at either clamp.
inline double marginal_utility_wrt_price(const LossSpec& spec, double A, double price) {
    const auto pt = optimal_demand(spec, A, price);
    return pt.interior() ? -A * pt.quantity : 0.0;
}

inline double marginal_utility_wrt_price(const Consumer& c, std::string_view period,
                                         double price) {
    return marginal_utility_wrt_price(c.loss_for(period), c.A, price);
}

/// dJ(d*)/dprice = A^2 price / J''(d*); zero at clamped points.
inline double loss_sensitivity_to_price(const LossSpec& spec, double A, double price) {
    return A * price * flexibility(spec, A, price);
}

inline double loss_sensitivity_to_price(const Consumer& c, std::string_view period,
                                        double price) {
    return loss_sensitivity_to_price(c.loss_for(period), c.A, price);
}

// ---------------------------------------------------------------------------
// Assumption validation

struct AssumptionCheck {
    std::string name;    // regularity, loss_ordering, marginal_loss_ordering, curvature_ordering
    std::string period;  // "PE" or "PE>OP" for cross-period checks
    bool passed = true;
    std::optional<double> first_violation;  // quantity where the check first failed
    std::string detail;
};

struct ValidationReport {
    std::string consumer_id;
    std::vector<AssumptionCheck> checks;
    /// J''' < 0 strictly on every grid point (false for the quadratic family).
    bool third_derivative_strict = true;

    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(),
                           [](const AssumptionCheck& c) { return c.passed; });
    }
};

inline constexpr double kValidationSlack = 1e-10;
inline constexpr int kDefaultValidationGrid = 256;

/// Checks regularity of every period's loss and, for each consecutive pair
/// (periods are ordered from most to least critical), the loss, marginal-loss
/// and curvature orderings on the shared range [0, min d_bar].
inline ValidationReport validate_assumptions(const Consumer& consumer,
                                             const std::vector<std::string>& periods,
                                             int grid_size = kDefaultValidationGrid) {
    if (grid_size < 16) throw PreconditionError("validate_assumptions: grid_size must be >= 16");
    ValidationReport report;
    report.consumer_id = consumer.id;
    const double A = consumer.A;
    auto J = [&](const LossSpec& s, double d) {
        auto r = normalized_loss(s, A, d);
        return LossDerivatives{A * r.value, A * r.first, A * r.second, A * r.third};
    };
    auto fail = [](AssumptionCheck& chk, double d, std::string why) {
        if (chk.passed) {
            chk.passed = false;
            chk.first_violation = d;
            chk.detail = std::move(why);
        }
    };
    const double slack = kValidationSlack;

    for (const auto& p : periods) {
        const LossSpec& spec = consumer.loss_for(p);
        AssumptionCheck chk{"regularity", p, true, std::nullopt, {}};
        const double d_bar = spec.d_bar();
        for (int i = 0; i < grid_size; ++i) {
            const double d = d_bar * (static_cast<double>(i) / (grid_size - 1));
            const auto v = J(spec, d);
            if (v.value < -slack) fail(chk, d, "J < 0");
            if (i + 1 < grid_size && !(v.first < 0.0)) fail(chk, d, "J' >= 0 below satiation");
            if (!(v.second > slack)) fail(chk, d, "J'' <= 0");
            if (v.third > slack) fail(chk, d, "J''' > 0");
            if (!(v.third < 0.0)) report.third_derivative_strict = false;
        }
        report.checks.push_back(std::move(chk));
    }

    for (std::size_t t = 0; t + 1 < periods.size(); ++t) {
        const LossSpec& hi = consumer.loss_for(periods[t]);
        const LossSpec& lo = consumer.loss_for(periods[t + 1]);
        const std::string pair = periods[t] + ">" + periods[t + 1];
        AssumptionCheck level{"loss_ordering", pair, true, std::nullopt, {}};
        AssumptionCheck marginal{"marginal_loss_ordering", pair, true, std::nullopt, {}};
        AssumptionCheck curvature{"curvature_ordering", pair, true, std::nullopt, {}};
        const double range = std::min(hi.d_bar(), lo.d_bar());
        for (int i = 0; i < grid_size; ++i) {
            const double d = range * (static_cast<double>(i) / (grid_size - 1));
            const auto a = J(hi, d);
            const auto b = J(lo, d);
            const double scale = 1.0 + std::max(std::abs(a.value), std::abs(b.value));
            if (b.value > a.value + slack * scale) fail(level, d, "J_offpeak > J_peak");
            if (std::abs(a.first) + slack * (1.0 + std::abs(b.first)) < std::abs(b.first))
                fail(marginal, d, "|J'_peak| < |J'_offpeak|");
            if (a.second + slack * (1.0 + std::abs(b.second)) < b.second)
                fail(curvature, d, "J''_peak < J''_offpeak");
        }
        report.checks.push_back(std::move(level));
        report.checks.push_back(std::move(marginal));
        report.checks.push_back(std::move(curvature));
    }
    return report;
}

}  // namespace tou
