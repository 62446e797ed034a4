#pragma once

// The aggregate consumer of one period: summed demand, summed flexibility
// and the harmonic-mean curvature of the individual normalized losses.

#include <span>
#include <string>
#include <vector>

#include "tou/demand.hpp"

namespace tou {

class AggregateView {
public:
    AggregateView(std::span<const Consumer> consumers, std::string period)
        : consumers_(consumers), period_(std::move(period)) {
        members_.reserve(consumers.size());
        for (const auto& c : consumers) members_.push_back({&c.loss_for(period_), c.A});
    }

    struct Member {
        const LossSpec* spec;
        double A;
    };

    std::span<const Consumer> consumers() const { return consumers_; }
    const std::string& period() const { return period_; }
    const std::vector<Member>& members() const { return members_; }
    bool empty() const { return members_.empty(); }

    /// Sum of individual satiation levels.
    double max_demand() const {
        double s = 0.0;
        for (const auto& m : members_) s += m.spec->d_bar();
        return s;
    }

    /// Highest individual choke price; aggregate demand is zero above it.
    double max_choke_price() const {
        double p = 0.0;
        for (const auto& m : members_) p = std::max(p, choke_price(*m.spec, m.A));
        return p;
    }

private:
    std::span<const Consumer> consumers_;
    std::string period_;
    std::vector<Member> members_;
};

inline double aggregate_demand(const AggregateView& view, double price) {
    double total = 0.0;
    for (const auto& m : view.members()) total += optimal_demand(*m.spec, m.A, price).quantity;
    return total;
}

inline double aggregate_flexibility(const AggregateView& view, double price) {
    double total = 0.0;
    for (const auto& m : view.members()) total += flexibility(*m.spec, m.A, price);
    return total;
}

/// Second derivative of aggregate demand in price.
inline double aggregate_demand_convexity(const AggregateView& view, double price) {
    double total = 0.0;
    for (const auto& m : view.members()) total += demand_convexity(*m.spec, m.A, price);
    return total;
}

/// Number of consumers at an interior point at this price.
inline int interior_count(const AggregateView& view, double price) {
    int n = 0;
    for (const auto& m : view.members()) n += optimal_demand(*m.spec, m.A, price).interior();
    return n;
}

/// Harmonic-mean aggregate curvature 1 / sum_i (1 / Jhat_i''), taken over
/// the consumers interior at this price. Clamped consumers are excluded.
inline double aggregate_curvature(const AggregateView& view, double price) {
    double inverse_sum = 0.0;
    int interior = 0;
    for (const auto& m : view.members()) {
        const auto pt = optimal_demand(*m.spec, m.A, price);
        if (!pt.interior()) continue;
        ++interior;
        inverse_sum += 1.0 / normalized_loss(*m.spec, m.A, pt.quantity).second;
    }
    if (interior == 0)
        throw DomainError("aggregate_curvature: every consumer is clamped at this price");
    return 1.0 / inverse_sum;
}

/// Price at which aggregate demand equals target_demand.
inline double invert_aggregate_demand(const AggregateView& view, double target_demand) {
    const double cap = view.max_demand();
    if (!(target_demand >= 0.0 && target_demand <= cap))
        throw DomainError("invert_aggregate_demand: target outside [0, sum d_bar]");
    if (target_demand == cap) return 0.0;
    const double hi = view.max_choke_price();
    if (target_demand == 0.0) {
        // Smallest price with zero demand: the lowest individual choke that
        // still leaves everyone at zero is the max choke.
        return hi;
    }
    auto residual = [&](double p) { return aggregate_demand(view, p) - target_demand; };
    const auto root = numeric::bisect(residual, 0.0, hi, 1e-15 * (1.0 + hi), 400);
    // One Newton step removes the price-resolution error where demand is steep.
    const double flex = aggregate_flexibility(view, root.x);
    if (flex > 0.0) {
        const double p = root.x + residual(root.x) / flex;
        if (p >= 0.0 && p <= hi && std::abs(residual(p)) < std::abs(residual(root.x))) return p;
    }
    return root.x;
}

}  // namespace tou
