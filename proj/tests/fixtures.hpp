#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tou/tou.hpp"

namespace fixtures {

inline tou::Consumer quadratic_consumer(std::string id, double A, std::vector<std::pair<double, double>> kd,
                                        std::vector<std::string> periods = {"PE", "OP"}) {
    tou::Consumer c;
    c.id = std::move(id);
    c.A = A;
    for (std::size_t t = 0; t < periods.size(); ++t)
        c.loss.emplace(periods[t], tou::LossSpec::quadratic(kd[t].first, kd[t].second));
    return c;
}

/// Two identical consumers, C(d) = d^2/2: aggregate marginal losses
/// -2(10 - d) at peak and -2(6 - d) off peak.
inline tou::Scenario s1() {
    tou::Scenario s;
    s.periods = {"PE", "OP"};
    s.cost.coefficients = {0.0, 0.0, 0.5};
    for (int i = 0; i < 2; ++i) s.consumers.push_back(quadratic_consumer("c" + std::to_string(i + 1), 1.0, {{2, 5}, {2, 3}}));
    return s;
}

/// As s1 with off-peak aggregate marginal loss -(6 - d).
inline tou::Scenario s2() {
    tou::Scenario s = s1();
    for (auto& c : s.consumers) c.loss.insert_or_assign("OP", tou::LossSpec::quadratic(1, 3));
    return s;
}

/// The s1 market with a consumer whose A is doubled while its normalized
/// loss is unchanged.
inline tou::Scenario s1_pair() {
    tou::Scenario s = s1();
    s.consumers[0] = quadratic_consumer("lo", 2.0, {{4, 5}, {4, 3}});
    s.consumers[1].id = "hi";
    return s;
}

inline tou::Scenario identical_periods() {
    tou::Scenario s;
    s.periods = {"PE", "OP"};
    s.cost.coefficients = {0.0, 0.3, 0.5};
    s.consumers.push_back(quadratic_consumer("a", 1.0, {{1, 4}, {1, 4}}));
    s.consumers.push_back(quadratic_consumer("b", 1.5, {{2, 3}, {2, 3}}));
    return s;
}

/// Scenario shape for property loops: T in {2, 3, 4}, N in [1, 4].
struct Shape {
    int T;
    int N;
};

inline Shape shape_for(std::uint64_t seed, int max_T = 4) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 17);
    return {2 + static_cast<int>(rng() % static_cast<unsigned>(max_T - 1)), 1 + static_cast<int>(rng() % 4)};
}

inline tou::Scenario random_two_period(std::uint64_t seed, tou::oracle::FamilyMix mix) {
    return tou::oracle::random_scenario(seed, 2, shape_for(seed).N, mix);
}

}  // namespace fixtures
