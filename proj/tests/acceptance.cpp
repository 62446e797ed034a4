// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "fixtures.hpp"

using namespace tou;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

int g_failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++g_failures;
    std::printf("%s %2d %s (%.2fs)%s%s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), seconds_since(t0),
                o.detail.empty() ? "" : ": ", o.detail.c_str());
    std::fflush(stdout);
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

struct Solved {
    Scenario s;
    Equilibrium var;
    Equilibrium flat;
};

Solved solve(Scenario s) {
    auto var = solve_variable(s);
    auto flat = solve_flat(s, var);
    return {std::move(s), std::move(var), std::move(flat)};
}

// Criterion 1 -----------------------------------------------------------------
Outcome s1_closed_forms() {
    Outcome o;
    const auto s = fixtures::s1();
    const auto t0 = Clock::now();
    const auto var = solve_variable(s);
    const auto flat = solve_flat(s, var);
    const double ms = 1e3 * seconds_since(t0);
    o.require(near(var.prices[0], 20.0 / 3, 1e-8), "variable PE price " + fmt(var.prices[0]));
    o.require(near(var.prices[1], 4.0, 1e-8), "variable OP price " + fmt(var.prices[1]));
    o.require(near(flat.prices[0], 16.0 / 3, 1e-8), "flat price " + fmt(flat.prices[0]));
    o.require(near(flat.aggregate_demand[0], 22.0 / 3, 1e-8), "flat PE demand");
    o.require(near(flat.aggregate_demand[1], 10.0 / 3, 1e-8), "flat OP demand");
    o.require(ms < 10.0, "solve took " + fmt(ms) + " ms");
    o.detail = o.pass ? "solve " + fmt(ms) + " ms" : o.detail;
    return o;
}

// Criterion 2 -----------------------------------------------------------------
Outcome s2_closed_forms() {
    Outcome o;
    const auto r = solve(fixtures::s2());
    o.require(near(r.flat.prices[0], 4.0, 1e-8), "flat price " + fmt(r.flat.prices[0]));
    o.require(near(r.var.prices[0], 20.0 / 3, 1e-8), "variable PE price");
    o.require(near(r.var.prices[1], 3.0, 1e-8), "variable OP price");
    const auto id = multi_period_flat_price(r.s);
    o.require(near(id.weighted_marginal_cost, 1.0 / 3 * 8 + 2.0 / 3 * 2, 1e-8), "weighted marginal cost " +
                                                                                  fmt(id.weighted_marginal_cost));
    o.require(near(id.weighted_marginal_cost, id.price, 1e-8), "identity gap " + fmt(id.gap));
    // Weights are the flexibility shares 1/3 and 2/3 at the flat price.
    const double f0 = aggregate_flexibility(r.s.view(0), id.price);
    const double f1 = aggregate_flexibility(r.s.view(1), id.price);
    o.require(near(f0 / (f0 + f1), 1.0 / 3, 1e-12), "peak flexibility share");
    o.require(near(r.s.cost.first(r.flat.aggregate_demand[0]), 8.0, 1e-8), "peak marginal cost");
    o.require(near(r.s.cost.first(r.flat.aggregate_demand[1]), 2.0, 1e-8), "off-peak marginal cost");
    return o;
}

// Criterion 3 -----------------------------------------------------------------
Outcome s2_delta_ratio() {
    Outcome o;
    const auto r = solve(fixtures::s2());
    const auto rep = price_change_report(r.s, r.flat, r.var);
    o.require(rep.delta_ratio && rep.curvature_ratio, "ratios missing");
    if (!o.pass) return o;
    o.require(near(*rep.delta_ratio, 8.0 / 3, 1e-6), "price-change ratio " + fmt(*rep.delta_ratio));
    o.require(near(*rep.curvature_ratio, 8.0 / 3, 1e-6), "curvature ratio " + fmt(*rep.curvature_ratio));
    o.require(near(*rep.delta_ratio, *rep.curvature_ratio, 1e-6), "ratios differ");
    o.require(near(rep.periods[0].average_curvature, 0.75, 1e-6), "peak average curvature");
    o.require(near(rep.periods[1].average_curvature, 2.0, 1e-6), "off-peak average curvature");
    return o;
}

// Criterion 4 -----------------------------------------------------------------
Outcome ordering_suite() {
    Outcome o;
    const auto t0 = Clock::now();
    int failures = 0;
    std::string first;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const int N = fixtures::shape_for(seed).N;
        const auto r = solve(oracle::random_scenario(seed, 2, N, oracle::FamilyMix::mixed()));
        const double pf = r.flat.prices[0];
        const auto& v = r.var;
        const auto& f = r.flat;
        const bool ok = v.prices[1] - 1e-8 <= pf && pf <= v.prices[0] + 1e-8 &&
                        f.aggregate_demand[1] <= v.aggregate_demand[1] + 1e-8 &&
                        v.aggregate_demand[1] <= v.aggregate_demand[0] + 1e-8 &&
                        v.aggregate_demand[0] <= f.aggregate_demand[0] + 1e-8 &&
                        v.social_loss <= f.social_loss + 1e-8;
        if (!ok && failures++ == 0) first = "seed " + std::to_string(seed);
    }
    const double sec = seconds_since(t0);
    o.require(failures == 0, std::to_string(failures) + " violations, first " + first);
    o.require(sec < 30.0, "took " + fmt(sec) + " s");
    return o;
}

// Criterion 5 -----------------------------------------------------------------
Outcome quadratic_exactness() {
    Outcome o;
    int accepted = 0, consumers = 0, failures = 0;
    std::string first;
    for (std::uint64_t seed = 0; accepted < 10000 && seed < 100000; ++seed) {
        const auto r = solve(fixtures::random_two_period(seed, oracle::FamilyMix::all_quadratic()));
        if (r.var.boundary_contaminated() || r.flat.boundary_contaminated()) continue;
        ++accepted;
        for (const auto& c : r.s.consumers) {
            const auto v = screen_linear(c, r.flat, r.var);
            const double q = oracle::quadrature_delta_u(c, r.flat, r.var);
            ++consumers;
            const bool ok = v.exact && std::signbit(v.value) == std::signbit(q) &&
                            std::abs(c.A * v.value - q) <= 1e-8;
            if (!ok && failures++ == 0)
                first = "seed " + std::to_string(seed) + " value*A " + fmt(c.A * v.value) + " vs " + fmt(q);
        }
    }
    o.require(accepted == 10000, "only " + std::to_string(accepted) + " interior scenarios");
    o.require(failures == 0, std::to_string(failures) + " mismatches, first " + first);
    if (o.pass) o.detail = std::to_string(consumers) + " consumers";
    return o;
}

// Criterion 6 -----------------------------------------------------------------
Outcome sufficiency() {
    Outcome o;
    int certain = 0, failures = 0;
    std::string first;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const auto r = solve(fixtures::random_two_period(seed, oracle::FamilyMix::mixed()));
        for (const auto& c : r.s.consumers) {
            std::vector<ScreeningVerdict> verdicts{screen_linear(c, r.flat, r.var),
                                                   screen_general(c, r.flat, r.var)};
            if (detail::all_family(c, r.s.periods, LossFamily::IsoelasticDemand))
                verdicts.push_back(screen_isoelastic(c, r.flat, r.var));
            bool claims = false;
            for (const auto& v : verdicts) claims = claims || v.verdict == Verdict::CertainLoss;
            if (!claims) continue;
            ++certain;
            const double q = oracle::quadrature_delta_u(c, r.flat, r.var);
            if (!(q < 0.0) && failures++ == 0) first = "seed " + std::to_string(seed) + " dU " + fmt(q);
        }
    }
    o.require(certain > 0, "no certain-loss verdicts drawn");
    o.require(failures == 0, std::to_string(failures) + " false verdicts, first " + first);
    if (o.pass) o.detail = std::to_string(certain) + " certain-loss verdicts";
    return o;
}

// Criterion 7 -----------------------------------------------------------------
Scenario with_epsilon(const Scenario& base, double eps) {
    Scenario s = base;
    for (auto& c : s.consumers)
        for (const auto& p : s.periods) {
            const auto& iso = *c.loss_for(p).as_isoelastic();
            c.loss.insert_or_assign(p, LossSpec::isoelastic(iso.d_ref, iso.pi_ref, eps));
        }
    return s;
}

Outcome isoelastic_closed_form() {
    Outcome o;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int draws = 0, near_unit = 0, failures = 0, skipped = 0;
    double worst = 0.0;
    std::string first;
    for (std::uint64_t seed = 0; draws < 1000 && seed < 20000; ++seed) {
        Scenario s = fixtures::random_two_period(seed, oracle::FamilyMix::all_isoelastic());
        const bool unit = seed % 4 == 0;
        if (unit) {
            // Every fourth draw sits within 1e-6 of unit elasticity, some exactly on it.
            s = with_epsilon(s, seed % 8 == 0 ? -1.0 : -1.0 + 1e-6 * u(rng));
            bool valid = true;
            for (const auto& c : s.consumers)
                valid = valid && validate_assumptions(c, s.periods, s.options.grid_points).all_passed();
            if (!valid) continue;
        }
        const auto r = solve(std::move(s));
        bool in_core = true;
        for (const auto& c : r.s.consumers) in_core = in_core && detail::isoelastic_in_core(c, r.flat, r.var);
        if (!in_core) {
            ++skipped;
            continue;
        }
        ++draws;
        near_unit += unit;
        for (const auto& c : r.s.consumers) {
            const auto v = screen_isoelastic(c, r.flat, r.var);
            const double closed = c.A * r.flat.prices[0] * v.value;
            const double q = oracle::quadrature_delta_u(c, r.flat, r.var);
            const double rel = std::abs(closed - q) / std::max(std::abs(q), 1e-300);
            const bool ok = rel <= 1e-6 || std::abs(closed - q) <= 1e-12;
            worst = std::max(worst, std::abs(closed - q) <= 1e-12 ? 0.0 : rel);
            if (!ok && failures++ == 0) first = "seed " + std::to_string(seed) + " rel " + fmt(rel);
        }
    }
    o.require(draws == 1000, "only " + std::to_string(draws) + " draws in the constant-elasticity band");
    o.require(near_unit >= 100, "only " + std::to_string(near_unit) + " near-unit draws");
    o.require(failures == 0, std::to_string(failures) + " mismatches, first " + first);
    if (o.pass)
        o.detail = std::to_string(near_unit) + " near unit elasticity, worst rel " + fmt(worst) + ", " +
                   std::to_string(skipped) + " off-band draws replaced";
    return o;
}

// Criterion 8 -----------------------------------------------------------------
Outcome comparison() {
    Outcome o;
    const auto r = solve(fixtures::s1_pair());
    const auto& lo = r.s.consumers[0];
    const auto& hi = r.s.consumers[1];
    const double du_lo = utility_change(lo, r.flat, r.var).total;
    const double du_hi = utility_change(hi, r.flat, r.var).total;
    o.require(near(du_lo, -40.0 / 9, 1e-9), "dU_lo " + fmt(du_lo));
    o.require(near(du_hi, -20.0 / 9, 1e-9), "dU_hi " + fmt(du_hi));
    o.require(compare_consumers(lo, hi, r.flat, r.var).verdict == Verdict::CertainLoss,
              "reference pair not certain");

    int certain = 0, failures = 0;
    std::string first;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto d = solve(oracle::random_scenario(seed, 2, 2 + seed % 3, oracle::FamilyMix::mixed()));
        for (const auto& a : d.s.consumers)
            for (const auto& b : d.s.consumers) {
                if (!(a.A > b.A)) continue;
                if (compare_consumers(a, b, d.flat, d.var).verdict != Verdict::CertainLoss) continue;
                ++certain;
                const double qa = oracle::quadrature_delta_u(a, d.flat, d.var);
                const double qb = oracle::quadrature_delta_u(b, d.flat, d.var);
                if (!(qa < qb) && failures++ == 0) first = "seed " + std::to_string(seed);
            }
    }
    o.require(certain > 0, "no certain comparison verdicts drawn");
    o.require(failures == 0, std::to_string(failures) + " false comparisons, first " + first);
    if (o.pass) o.detail = std::to_string(certain) + " certain comparisons";
    return o;
}

// Criterion 9 -----------------------------------------------------------------
Outcome ramsey() {
    Outcome o;
    for (const auto& s : {fixtures::s1(), fixtures::s2()}) {
        const auto var = solve_variable(s);
        const auto zero = detail::ramsey_prices(s, 0.0, var.prices);
        const auto slack = ramsey_solve(s, profit(s, var.prices).total);
        for (std::size_t t = 0; t < 2; ++t) {
            o.require(near(zero[t], var.prices[t], 1e-9), "nu = 0 price");
            o.require(near(slack.prices[t], var.prices[t], 1e-9), "slack target price");
        }
    }
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto shape = fixtures::shape_for(seed);
        const auto s = oracle::random_scenario(seed, shape.T, shape.N, oracle::FamilyMix::mixed());
        const auto var = solve_variable(s);
        const auto zero = detail::ramsey_prices(s, 0.0, var.prices);
        for (std::size_t t = 0; t < zero.size(); ++t)
            o.require(near(zero[t], var.prices[t], 1e-9), "nu = 0 on seed " + std::to_string(seed));
    }

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int solved = 0;
    for (int i = 0; i < 100; ++i) {
        const auto s = i % 2 ? fixtures::s2() : fixtures::s1();
        const auto var = solve_variable(s);
        const double base = profit(s, var.prices).total;
        const double mono = monopoly_profit(s);
        const double target = u(rng) < 0.7 ? base + (mono - base) * u(rng) : base * (0.2 + 0.8 * u(rng));
        const auto sol = ramsey_solve(s, target);
        o.require(near(sol.total_profit, target, 1e-8 * (1 + std::abs(target))), "target missed");
        for (std::size_t a = 0; a < sol.prices.size(); ++a)
            for (std::size_t b = a + 1; b < sol.prices.size(); ++b) {
                const double lhs = sol.distortions[a] / sol.distortions[b];
                const double rhs = (sol.prices[a] / sol.elasticities[a]) / (sol.prices[b] / sol.elasticities[b]);
                const bool ok = std::isfinite(lhs) ? std::abs(lhs - rhs) <= 1e-6 * std::abs(rhs)
                                                   : std::abs(sol.distortions[a] * sol.prices[b] /
                                                                  sol.elasticities[b] -
                                                              sol.distortions[b] * sol.prices[a] /
                                                                  sol.elasticities[a]) <= 1e-6;
                o.require(ok, "distortion ratio at target " + fmt(target) + ": " + fmt(lhs) + " vs " + fmt(rhs));
            }
        ++solved;
    }
    bool rejected = false;
    try {
        const auto s = fixtures::s1();
        ramsey_solve(s, monopoly_profit(s) * 1.01 + 1.0);
    } catch (const InfeasibleConstraint&) {
        rejected = true;
    }
    o.require(rejected, "target above monopoly profit accepted");
    if (o.pass) o.detail = std::to_string(solved) + " targets";
    return o;
}

// Criterion 10 ----------------------------------------------------------------
Outcome derivative_checks() {
    Outcome o;
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int points = 0, failures = 0;
    double worst = 0.0;
    std::string first;
    auto check = [&](const char* what, double analytic, double fd, std::uint64_t seed) {
        const auto r = oracle::compare(what, analytic, fd, 1e-6);
        worst = std::max(worst, r.rel_error);
        if (!r.passed && failures++ == 0)
            first = std::string(what) + " seed " + std::to_string(seed) + " rel " + fmt(r.rel_error);
    };
    for (std::uint64_t seed = 0; points < 1000 && seed < 100000; ++seed) {
        const auto shape = fixtures::shape_for(seed, 3);
        const auto s = oracle::random_scenario(seed, shape.T, shape.N, oracle::FamilyMix::mixed());
        const std::size_t t = rng() % s.periods.size();
        const auto& c = s.consumers[rng() % s.consumers.size()];
        const auto& spec = c.loss_for(s.periods[t]);
        const double p = s.view(t).max_choke_price() * (0.02 + 0.96 * u(rng));
        const double h = oracle::detail::fd_step(p);
        if (oracle::near_kink(oracle::detail::scenario_kinks(s, t), p, 2.5 * h)) continue;
        if (!optimal_demand(spec, c.A, p).interior()) continue;
        auto demand = [&](double x) { return optimal_demand(spec, c.A, x).quantity; };
        auto W = [&](double x) { return period_social_loss(s, t, x); };
        check("flexibility", flexibility(spec, c.A, p), -oracle::finite_difference(demand, p, h), seed);
        check("demand convexity", demand_convexity(spec, c.A, p), oracle::second_difference(demand, p, h), seed);
        check("welfare curvature", welfare_curvature(s, t, p).total(), oracle::second_difference(W, p, h), seed);
        ++points;
    }
    o.require(points == 1000, "only " + std::to_string(points) + " interior points");
    o.require(failures == 0, std::to_string(failures) + " mismatches, first " + first);
    if (o.pass) o.detail = "worst rel " + fmt(worst);
    return o;
}

// Criterion 11 ----------------------------------------------------------------
Outcome aggregation() {
    Outcome o;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int points = 0, failures = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; points < 1000 && seed < 100000; ++seed) {
        const auto s = oracle::random_scenario(seed, 2, 1 + seed % 4, oracle::FamilyMix::mixed());
        const std::size_t t = seed % 2;
        const auto view = s.view(t);
        const double p = view.max_choke_price() * (0.02 + 0.96 * u(rng));
        const double h = oracle::detail::fd_step(p);
        if (oracle::near_kink(oracle::detail::scenario_kinks(s, t), p, 2.5 * h)) continue;
        if (interior_count(view, p) == 0) continue;
        const double slope = oracle::finite_difference([&](double x) { return aggregate_demand(view, x); }, p, h);
        const auto r = oracle::compare("curvature", aggregate_curvature(view, p), -1.0 / slope, 1e-6);
        worst = std::max(worst, r.rel_error);
        failures += !r.passed;
        ++points;
    }
    o.require(failures == 0, std::to_string(failures) + " curvature mismatches");

    int perturbations = 0, wrong = 0;
    for (std::uint64_t seed = 0; perturbations < 100; ++seed) {
        const auto s = oracle::random_scenario(seed, 2, 2 + seed % 3, oracle::FamilyMix::all_quadratic());
        const auto view = s.view(0);
        const double p = view.max_choke_price() * (0.05 + 0.5 * u(rng));
        const std::size_t i = rng() % s.consumers.size();
        if (!optimal_demand(s.consumers[i], "PE", p).interior()) continue;
        Scenario stiffer = s;
        const auto& q = *s.consumers[i].loss_for("PE").as_quadratic();
        stiffer.consumers[i].loss.insert_or_assign("PE", LossSpec::quadratic(q.k * (1.0 + 0.5 * u(rng)), q.d_bar));
        // Demand stays interior at p when the loss gets steeper.
        wrong += !(aggregate_curvature(stiffer.view(0), p) > aggregate_curvature(view, p));
        ++perturbations;
    }
    o.require(wrong == 0, std::to_string(wrong) + " non-monotone perturbations");
    if (o.pass) o.detail = std::to_string(points) + " points, worst rel " + fmt(worst);
    return o;
}

// Criterion 12 ----------------------------------------------------------------
Outcome verify_suite() {
    Outcome o;
    const std::string scenario = std::string(TOU_TEST_DATA) + "/s1.json";
    const char* argv[] = {"tou", "verify", "--scenario", scenario.c_str(), "--count", "100"};
    std::ostringstream out, err;
    const auto t0 = Clock::now();
    const int code = cli::run(6, argv, out, err);
    const double sec = seconds_since(t0);
    o.require(code == 0, "exit code " + std::to_string(code) + " " + err.str());
    o.require(sec < 60.0, "took " + fmt(sec) + " s");
    if (o.pass) o.detail = fmt(sec) + " s";
    return o;
}

}  // namespace

int main() {
    report(1, "S1 closed forms", s1_closed_forms);
    report(2, "S2 closed forms and weighted-average identity", s2_closed_forms);
    report(3, "S2 price-change ratio equals curvature ratio", s2_delta_ratio);
    report(4, "orderings over 1000 random scenarios", ordering_suite);
    report(5, "linear condition exact for quadratic losses", quadratic_exactness);
    report(6, "certain-loss verdicts are losses", sufficiency);
    report(7, "isoelastic closed form against quadrature", isoelastic_closed_form);
    report(8, "consumer comparison", comparison);
    report(9, "Ramsey pricing", ramsey);
    report(10, "derivatives against finite differences", derivative_checks);
    report(11, "harmonic-mean aggregation", aggregation);
    report(12, "verify suite", verify_suite);
    std::printf("%d of 12 criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
