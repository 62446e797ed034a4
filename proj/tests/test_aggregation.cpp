#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace tou;

TEST(AggregateDemand, SumsIndividualDemand) {
    const auto s = fixtures::s1();
    EXPECT_NEAR(aggregate_demand(s.view(0), 16.0 / 3), 22.0 / 3, 1e-14);
    EXPECT_EQ(aggregate_demand(s.view(0), 100.0), 0.0);
}

TEST(AggregateDemand, SingletonEqualsIndividual) {
    std::vector<Consumer> one{fixtures::quadratic_consumer("a", 1.3, {{0.7, 4}, {0.5, 3}})};
    AggregateView view(one, "OP");
    for (double p : {0.0, 1.0, 2.0, 9.0})
        EXPECT_EQ(aggregate_demand(view, p), optimal_demand(one[0], "OP", p).quantity);
}

TEST(AggregateFlexibility, AdditiveWithClampedMembersIgnored) {
    const auto s = fixtures::s1();
    EXPECT_DOUBLE_EQ(aggregate_flexibility(s.view(0), 3.0), 0.5);
    std::vector<Consumer> mixed{fixtures::quadratic_consumer("a", 1, {{2, 10}}, {"PE"}),
                                fixtures::quadratic_consumer("b", 1, {{2, 1}}, {"PE"})};
    // b chokes at price 4.
    EXPECT_DOUBLE_EQ(aggregate_flexibility(AggregateView(mixed, "PE"), 5.0), 0.25);
}

TEST(AggregateCurvature, HarmonicMean) {
    std::vector<Consumer> two{fixtures::quadratic_consumer("a", 1, {{2, 10}}, {"PE"}),
                              fixtures::quadratic_consumer("b", 1, {{2, 10}}, {"PE"})};
    EXPECT_DOUBLE_EQ(aggregate_curvature(AggregateView(two, "PE"), 1.0), 2.0);
    std::vector<Consumer> one{two[0]};
    EXPECT_DOUBLE_EQ(aggregate_curvature(AggregateView(one, "PE"), 1.0), 4.0);
    EXPECT_THROW(aggregate_curvature(AggregateView(two, "PE"), 1000.0), DomainError);
}

TEST(InvertAggregateDemand, S1AndEndpoints) {
    const auto s = fixtures::s1();
    const auto v = s.view(0);
    EXPECT_NEAR(invert_aggregate_demand(v, 22.0 / 3), 16.0 / 3, 1e-10);
    EXPECT_EQ(invert_aggregate_demand(v, 10.0), 0.0);
    EXPECT_THROW(invert_aggregate_demand(v, 10.5), DomainError);
    EXPECT_THROW(invert_aggregate_demand(v, -1.0), DomainError);
}

namespace {

/// Interior price of period t of a random scenario, away from kinks.
std::optional<double> interior_price(const Scenario& s, std::size_t t, double u) {
    const auto view = s.view(t);
    const double p = view.max_choke_price() * (0.02 + 0.96 * u);
    const double h = oracle::detail::fd_step(p);
    for (const auto& c : s.consumers)
        for (double k : oracle::kinks(c.loss_for(s.periods[t]), c.A))
            if (std::abs(k - p) < 2.5 * h) return std::nullopt;
    if (interior_count(view, p) == 0) return std::nullopt;
    return p;
}

}  // namespace

TEST(AggregationProperties, CurvatureTimesFlexibilityIsOne) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto s = oracle::random_scenario(seed, 2, 3, oracle::FamilyMix::mixed());
        for (std::size_t t = 0; t < 2; ++t) {
            const auto p = interior_price(s, t, u(rng));
            if (!p) continue;
            const auto v = s.view(t);
            EXPECT_NEAR(aggregate_curvature(v, *p) * aggregate_flexibility(v, *p), 1.0, 1e-10);
        }
    }
}

TEST(AggregationProperties, BelowSmallestInteriorCurvature) {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(0, 1);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto s = oracle::random_scenario(seed, 2, 4, oracle::FamilyMix::mixed());
        const auto p = interior_price(s, 0, u(rng));
        if (!p) continue;
        double min_curv = std::numeric_limits<double>::infinity();
        for (const auto& c : s.consumers) {
            const auto pt = optimal_demand(c, "PE", *p);
            if (pt.interior()) min_curv = std::min(min_curv, normalized_loss(c, "PE", pt.quantity).second);
        }
        EXPECT_LE(aggregate_curvature(s.view(0), *p), min_curv * (1 + 1e-12));
    }
}

TEST(AggregationProperties, MonotoneInIndividualCurvature) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> k{0.5 + u(rng), 0.5 + u(rng), 0.5 + u(rng)};
        auto build = [&] {
            std::vector<Consumer> cs;
            for (int j = 0; j < 3; ++j)
                cs.push_back(fixtures::quadratic_consumer("q" + std::to_string(j), 1.0, {{k[j], 20}}, {"PE"}));
            return cs;
        };
        const double p = 1.0 + u(rng);
        const auto before = build();
        k[rng() % 3] *= 1.0 + u(rng);
        const auto after = build();
        EXPECT_GT(aggregate_curvature(AggregateView(after, "PE"), p),
                  aggregate_curvature(AggregateView(before, "PE"), p));
    }
}

TEST(AggregationProperties, OrderingsSurviveAggregation) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = oracle::random_scenario(seed, 2, 3, oracle::FamilyMix::mixed());
        // Aggregate willingness to pay at every quantity is higher at peak:
        // equivalently, peak demand dominates off-peak demand at every price.
        const double hi = std::max(s.view(0).max_choke_price(), s.view(1).max_choke_price());
        for (int i = 0; i <= 50; ++i) {
            const double p = hi * i / 50.0;
            EXPECT_GE(aggregate_demand(s.view(0), p), aggregate_demand(s.view(1), p) - 1e-9);
        }
    }
}

TEST(AggregationProperties, InvertRoundTrip) {
    std::mt19937_64 rng(24);
    std::uniform_real_distribution<double> u(0, 1);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto s = oracle::random_scenario(seed, 2, 3, oracle::FamilyMix::mixed());
        const auto view = s.view(seed % 2);
        const double target = view.max_demand() * (0.01 + 0.98 * u(rng));
        const double p = invert_aggregate_demand(view, target);
        EXPECT_NEAR(aggregate_demand(view, p), target, 1e-9);
    }
}
