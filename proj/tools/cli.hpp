#pragma once

// Command implementations for the `tou` tool. run() is the whole CLI; the
// executable only forwards argv and the process streams.

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tou/tou.hpp"

namespace tou::cli {

enum ExitCode : int {
    kOk = 0,
    kAssumptionViolation = 2,
    kUsage = 3,
    kSolverFailure = 4,
    kInfeasible = 5,
    kOracleFailure = 6,
};

using json = nlohmann::ordered_json;

/// Raised inside a command to stop with a specific exit code.
struct Exit {
    int code;
    std::string message;
};

// ---------------------------------------------------------------------------
// Output helpers

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Delimiter-separated table with a fixed header row.
class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

    Table& row(std::vector<std::string> cells) {
        rows_.push_back(std::move(cells));
        return *this;
    }

    void write(std::ostream& os) const {
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_field(cells[i]);
            os << '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline void write_tables(std::ostream& os, const std::vector<Table>& tables) {
    for (std::size_t i = 0; i < tables.size(); ++i) {
        if (i) os << '\n';
        tables[i].write(os);
    }
}

inline json number_or_null(std::optional<double> v) {
    return v ? json(*v) : json(nullptr);
}

// ---------------------------------------------------------------------------
// Shared options

struct Common {
    std::string scenario;
    std::string out;
    std::string format = "table";
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;

    bool structured() const { return format == "structured"; }
};

inline void add_common(CLI::App* sub, Common& c, bool scenario_required = true) {
    auto* opt = sub->add_option("--scenario", c.scenario, "Scenario document (JSON)");
    if (scenario_required) opt->required();
    sub->add_option("--out", c.out, "Write the report here instead of standard output");
    sub->add_option("--format", c.format, "table (CSV) or structured (JSON)")
        ->check(CLI::IsMember({"table", "structured"}));
    sub->add_option("--seed", c.seed, "Random seed");
    sub->add_option("--tol", c.tol, "Tolerance override");
}

inline Scenario load_scenario(const Common& c) {
    try {
        auto s = io::load(c.scenario);
        if (c.tol) {
            if (!(*c.tol > 0.0)) throw Exit{kUsage, "--tol must be > 0"};
            s.options.flat_tol = *c.tol;
            s.options.var_tol = *c.tol;
        }
        return s;
    } catch (const io::ParseError& e) {
        throw Exit{kUsage, std::string("parse error: ") + e.what()};
    }
}

/// Assumption and cost checks; the scenario must pass before solving.
inline void require_valid(const Scenario& s) {
    try {
        check_scenario(s);
    } catch (const InvalidScenario& e) {
        throw Exit{kAssumptionViolation, std::string("invalid scenario: ") + e.what()};
    }
    for (const auto& c : s.consumers) {
        const auto rep = validate_assumptions(c, s.periods, s.options.grid_points);
        for (const auto& chk : rep.checks)
            if (!chk.passed)
                throw Exit{kAssumptionViolation, "consumer '" + c.id + "' violates " + chk.name +
                                                     " (" + chk.period + "): " + chk.detail};
    }
}

// ---------------------------------------------------------------------------
// validate

inline json check_json(const AssumptionCheck& chk) {
    return {{"name", chk.name},
            {"period", chk.period},
            {"passed", chk.passed},
            {"first_violation", number_or_null(chk.first_violation)},
            {"detail", chk.detail}};
}

inline int cmd_validate(const Common& c, std::ostream& out) {
    const auto s = load_scenario(c);
    bool ok = true;
    std::optional<double> cost_violation;
    std::string structural;
    try {
        check_scenario(s);
    } catch (const InvalidScenario& e) {
        structural = e.what();
        ok = false;
    }
    cost_violation = check_cost(s.cost, s.max_total_demand(), s.options.grid_points);
    if (cost_violation) ok = false;
    std::vector<ValidationReport> reports;
    for (const auto& cons : s.consumers) {
        reports.push_back(validate_assumptions(cons, s.periods, s.options.grid_points));
        ok = ok && reports.back().all_passed();
    }

    if (c.structured()) {
        json doc;
        doc["passed"] = ok;
        doc["scenario"] = io::to_json(s);
        doc["cost"] = {{"passed", !cost_violation}, {"first_violation", number_or_null(cost_violation)}};
        if (!structural.empty()) doc["scenario_error"] = structural;
        json consumers = json::array();
        for (const auto& r : reports) {
            json checks = json::array();
            for (const auto& chk : r.checks) checks.push_back(check_json(chk));
            consumers.push_back({{"id", r.consumer_id},
                                 {"passed", r.all_passed()},
                                 {"third_derivative_strict", r.third_derivative_strict},
                                 {"checks", checks}});
        }
        doc["consumers"] = consumers;
        out << doc.dump(2) << '\n';
    } else {
        Table t({"subject", "check", "period", "passed", "first_violation", "detail"});
        t.row({"cost", "cost_regularity", "", cost_violation ? "false" : "true",
               cost_violation ? num(*cost_violation) : "", cost_violation ? "C, C' or C'' negative" : ""});
        if (!structural.empty()) t.row({"scenario", "structure", "", "false", "", structural});
        for (const auto& r : reports) {
            for (const auto& chk : r.checks)
                t.row({r.consumer_id, chk.name, chk.period, chk.passed ? "true" : "false",
                       chk.first_violation ? num(*chk.first_violation) : "", chk.detail});
            t.row({r.consumer_id, "third_derivative_strict", "", r.third_derivative_strict ? "true" : "false",
                   "", "informational"});
        }
        t.write(out);
    }
    return ok ? kOk : kAssumptionViolation;
}

// ---------------------------------------------------------------------------
// solve

struct Solved {
    Equilibrium variable;
    Equilibrium flat;
};

inline Solved solve_both(const Scenario& s) {
    try {
        Solved r{solve_variable(s), {}};
        r.flat = solve_flat(s, r.variable);
        for (double p : r.flat.prices)
            if (!std::isfinite(p)) throw SolverError("non-finite flat price");
        return r;
    } catch (const SolverError& e) {
        throw Exit{kSolverFailure, std::string("solver failure: ") + e.what()};
    }
}

inline json equilibrium_json(const Scenario& s, const Equilibrium& eq) {
    json periods = json::array();
    for (std::size_t t = 0; t < eq.periods.size(); ++t)
        periods.push_back({{"period", eq.periods[t]},
                           {"price", eq.prices[t]},
                           {"aggregate_demand", eq.aggregate_demand[t]},
                           {"marginal_cost", s.cost.first(eq.aggregate_demand[t])},
                           {"foc_residual", eq.foc_residuals[t]}});
    json consumers = json::array();
    for (std::size_t i = 0; i < s.consumers.size(); ++i) {
        json d = json::object();
        for (std::size_t t = 0; t < eq.periods.size(); ++t) d[eq.periods[t]] = eq.individual_demand[i][t];
        consumers.push_back({{"id", s.consumers[i].id}, {"demand", d}});
    }
    json flags = json::array();
    for (const auto& f : eq.boundary_flags)
        flags.push_back({{"consumer", s.consumers[f.consumer].id},
                         {"period", eq.periods[f.period]},
                         {"regime", std::string(to_string(f.regime))}});
    return {{"regime", std::string(to_string(eq.regime))},
            {"social_loss", eq.social_loss},
            {"foc_residual", eq.foc_residual},
            {"periods", periods},
            {"consumers", consumers},
            {"boundary_flags", flags}};
}

inline void equilibrium_rows(const Scenario& s, const Equilibrium& eq, Table& periods, Table& demand) {
    const std::string regime(to_string(eq.regime));
    for (std::size_t t = 0; t < eq.periods.size(); ++t)
        periods.row({regime, eq.periods[t], num(eq.prices[t]), num(eq.aggregate_demand[t]),
                     num(s.cost.first(eq.aggregate_demand[t])), num(eq.foc_residuals[t])});
    for (std::size_t i = 0; i < s.consumers.size(); ++i)
        for (std::size_t t = 0; t < eq.periods.size(); ++t) {
            const auto& c = s.consumers[i];
            const auto pt = optimal_demand(c, eq.periods[t], eq.prices[t]);
            demand.row({regime, c.id, eq.periods[t], num(pt.quantity), std::string(to_string(pt.regime))});
        }
}

inline int cmd_solve(const Common& c, const std::string& regime, std::ostream& out) {
    const auto s = load_scenario(c);
    require_valid(s);
    const auto eq = solve_both(s);
    const bool want_var = regime != "flat";
    const bool want_flat = regime != "variable";

    std::optional<PriceChangeReport> pcr;
    if (want_var && want_flat) pcr = price_change_report(s, eq.flat, eq.variable);

    if (c.structured()) {
        json doc;
        if (want_var) doc["variable"] = equilibrium_json(s, eq.variable);
        if (want_flat) doc["flat"] = equilibrium_json(s, eq.flat);
        if (pcr) {
            json rows = json::array();
            for (const auto& p : pcr->periods)
                rows.push_back({{"period", p.period},
                                {"delta", p.delta},
                                {"average_curvature", p.average_curvature},
                                {"weighted_change", p.weighted_change}});
            doc["price_change"] = {{"periods", rows},
                                   {"delta_ratio", number_or_null(pcr->delta_ratio)},
                                   {"curvature_ratio", number_or_null(pcr->curvature_ratio)},
                                   {"balanced", pcr->balanced},
                                   {"social_loss_gap", eq.flat.social_loss - eq.variable.social_loss}};
        }
        out << doc.dump(2) << '\n';
        return kOk;
    }
    Table periods({"regime", "period", "price", "aggregate_demand", "marginal_cost", "foc_residual"});
    Table demand({"regime", "consumer", "period", "demand", "demand_regime"});
    if (want_var) equilibrium_rows(s, eq.variable, periods, demand);
    if (want_flat) equilibrium_rows(s, eq.flat, periods, demand);
    std::vector<Table> tables{periods, demand};
    if (pcr) {
        Table deltas({"period", "delta", "average_curvature", "weighted_change"});
        for (const auto& p : pcr->periods)
            deltas.row({p.period, num(p.delta), num(p.average_curvature), num(p.weighted_change)});
        Table diag({"quantity", "value"});
        diag.row({"delta_ratio", pcr->delta_ratio ? num(*pcr->delta_ratio) : ""});
        diag.row({"curvature_ratio", pcr->curvature_ratio ? num(*pcr->curvature_ratio) : ""});
        diag.row({"balanced", pcr->balanced ? "true" : "false"});
        diag.row({"social_loss_variable", num(eq.variable.social_loss)});
        diag.row({"social_loss_flat", num(eq.flat.social_loss)});
        tables.push_back(deltas);
        tables.push_back(diag);
    }
    write_tables(out, tables);
    return kOk;
}

// ---------------------------------------------------------------------------
// screen

struct ConsumerScreen {
    const Consumer* consumer;
    UtilityChange change;
    std::vector<ScreeningVerdict> verdicts;
};

struct PairScreen {
    const Consumer* lo;
    const Consumer* hi;
    ScreeningVerdict verdict;
    double delta_u_lo;
    double delta_u_hi;
};

struct ScreenResult {
    std::vector<ConsumerScreen> consumers;
    std::vector<PairScreen> pairs;
};

/// All screens that apply to each consumer, with `reference` standing in for
/// the variable-price equilibrium.
inline ScreenResult screen_all(const Scenario& s, const Equilibrium& flat, const Equilibrium& reference) {
    ScreenResult r;
    const double rel = s.options.quad_tol;
    for (const auto& c : s.consumers) {
        ConsumerScreen cs{&c, utility_change(c, flat, reference, rel), {}};
        if (s.periods.size() == 2) cs.verdicts.push_back(screen_linear(c, flat, reference));
        else cs.verdicts.push_back(multi_period_screen(c, flat, reference));
        if (tou::detail::all_family(c, s.periods, LossFamily::IsoelasticDemand))
            cs.verdicts.push_back(screen_isoelastic(c, flat, reference, rel));
        cs.verdicts.push_back(screen_general(c, flat, reference, rel));
        r.consumers.push_back(std::move(cs));
    }
    for (const auto& a : r.consumers)
        for (const auto& b : r.consumers)
            if (a.consumer->A > b.consumer->A)
                r.pairs.push_back({a.consumer, b.consumer,
                                   compare_consumers(*a.consumer, *b.consumer, flat, reference),
                                   a.change.total, b.change.total});
    return r;
}

inline json verdict_json(const ScreeningVerdict& v) {
    return {{"condition", std::string(to_string(v.condition))},
            {"value", v.value},
            {"rhs", number_or_null(v.rhs)},
            {"verdict", std::string(to_string(v.verdict))},
            {"exact", v.exact},
            {"point_estimate", number_or_null(v.point_estimate)},
            {"note", v.note}};
}

inline json screen_json(const ScreenResult& r) {
    json consumers = json::array();
    for (const auto& cs : r.consumers) {
        json verdicts = json::array();
        for (const auto& v : cs.verdicts) verdicts.push_back(verdict_json(v));
        consumers.push_back({{"id", cs.consumer->id},
                             {"A", cs.consumer->A},
                             {"delta_u", cs.change.total},
                             {"delta_u_per_A", cs.change.surplus_change},
                             {"per_period", cs.change.per_period},
                             {"method", std::string(to_string(cs.change.method))},
                             {"conditions", verdicts}});
    }
    json pairs = json::array();
    for (const auto& p : r.pairs) {
        auto v = verdict_json(p.verdict);
        v["lo"] = p.lo->id;
        v["hi"] = p.hi->id;
        v["delta_u_lo"] = p.delta_u_lo;
        v["delta_u_hi"] = p.delta_u_hi;
        pairs.push_back(v);
    }
    return {{"consumers", consumers}, {"comparisons", pairs}};
}

inline Table screen_table(const ScreenResult& r) {
    Table t({"row", "consumer", "A", "delta_u", "delta_u_per_A", "condition", "value", "rhs", "verdict",
             "exact", "point_estimate", "note"});
    for (const auto& cs : r.consumers)
        for (const auto& v : cs.verdicts)
            t.row({"consumer", cs.consumer->id, num(cs.consumer->A), num(cs.change.total),
                   num(cs.change.surplus_change), std::string(to_string(v.condition)), num(v.value),
                   v.rhs ? num(*v.rhs) : "", std::string(to_string(v.verdict)), v.exact ? "true" : "false",
                   v.point_estimate ? num(*v.point_estimate) : "", v.note});
    for (const auto& p : r.pairs) {
        const auto& v = p.verdict;
        t.row({"comparison", p.lo->id + ">" + p.hi->id, "", num(p.delta_u_lo), num(p.delta_u_hi),
               std::string(to_string(v.condition)), num(v.value), v.rhs ? num(*v.rhs) : "",
               std::string(to_string(v.verdict)), v.exact ? "true" : "false", "", v.note});
    }
    return t;
}

inline int cmd_screen(const Common& c, std::ostream& out) {
    const auto s = load_scenario(c);
    require_valid(s);
    const auto eq = solve_both(s);
    const auto r = screen_all(s, eq.flat, eq.variable);
    if (c.structured()) out << screen_json(r).dump(2) << '\n';
    else screen_table(r).write(out);
    return kOk;
}

// ---------------------------------------------------------------------------
// ramsey

inline int cmd_ramsey(const Common& c, std::optional<double> target, std::optional<double> change,
                      std::ostream& out) {
    const auto s = load_scenario(c);
    require_valid(s);
    if (target.has_value() == change.has_value())
        throw Exit{kUsage, "exactly one of --target and --target-change is required"};
    const auto eq = solve_both(s);
    const double base = profit(s, eq.variable.prices).total;
    const double goal = target ? *target : base * (1.0 + *change);
    RamseySolution sol;
    try {
        sol = ramsey_solve(s, goal);
    } catch (const InfeasibleConstraint& e) {
        throw Exit{kInfeasible, std::string("infeasible: ") + e.what()};
    } catch (const SolverError& e) {
        throw Exit{kSolverFailure, std::string("solver failure: ") + e.what()};
    }
    const auto constrained = tou::detail::evaluate_at(s, sol.prices, Regime::ProfitConstrained);
    const auto screens = screen_all(s, eq.flat, constrained);

    if (c.structured()) {
        json periods = json::array();
        for (std::size_t t = 0; t < sol.periods.size(); ++t)
            periods.push_back({{"period", sol.periods[t]},
                               {"price", sol.prices[t]},
                               {"variable_price", eq.variable.prices[t]},
                               {"demand", sol.demand[t]},
                               {"marginal_cost", sol.marginal_cost[t]},
                               {"distortion", sol.distortions[t]},
                               {"elasticity", sol.elasticities[t]},
                               {"profit", sol.profit[t]}});
        json doc{{"nu", sol.nu},
                 {"markup_factor", sol.markup_factor},
                 {"target", sol.target},
                 {"unconstrained_profit", base},
                 {"total_profit", sol.total_profit},
                 {"periods", periods},
                 {"screen", screen_json(screens)}};
        out << doc.dump(2) << '\n';
        return kOk;
    }
    Table summary({"quantity", "value"});
    summary.row({"nu", num(sol.nu)})
        .row({"markup_factor", num(sol.markup_factor)})
        .row({"target", num(sol.target)})
        .row({"unconstrained_profit", num(base)})
        .row({"total_profit", num(sol.total_profit)});
    Table periods({"period", "price", "variable_price", "demand", "marginal_cost", "distortion", "elasticity",
                   "profit"});
    for (std::size_t t = 0; t < sol.periods.size(); ++t)
        periods.row({sol.periods[t], num(sol.prices[t]), num(eq.variable.prices[t]), num(sol.demand[t]),
                     num(sol.marginal_cost[t]), num(sol.distortions[t]), num(sol.elasticities[t]),
                     num(sol.profit[t])});
    write_tables(out, {summary, periods, screen_table(screens)});
    return kOk;
}

// ---------------------------------------------------------------------------
// sweep

/// Resolves a dotted parameter path such as `consumers[0].loss.OP.k`,
/// `consumers.c1.A` (by id) or `cost[2]` to the number it names.
inline json* resolve_path(json& doc, const std::string& path) {
    json* node = &doc;
    std::size_t i = 0;
    auto fail = [&]() -> json* { throw Exit{kUsage, "unknown parameter path '" + path + "'"}; };
    while (i < path.size()) {
        if (path[i] == '.') {
            ++i;
            continue;
        }
        if (path[i] == '[') {
            const auto close = path.find(']', i);
            if (close == std::string::npos || !node->is_array()) return fail();
            std::size_t idx = 0;
            const auto key = path.substr(i + 1, close - i - 1);
            auto [p, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
            i = close + 1;
            if (ec == std::errc() && p == key.data() + key.size()) {
                if (idx >= node->size()) return fail();
                node = &(*node)[idx];
                continue;
            }
            json* match = nullptr;
            for (auto& item : *node)
                if (item.is_object() && item.value("id", std::string()) == key) match = &item;
            if (!match) return fail();
            node = match;
            continue;
        }
        const auto end = path.find_first_of(".[", i);
        const auto key = path.substr(i, end == std::string::npos ? std::string::npos : end - i);
        i = end == std::string::npos ? path.size() : end;
        if (node->is_object()) {
            if (!node->contains(key)) return fail();
            node = &(*node)[key];
        } else if (node->is_array()) {
            json* match = nullptr;
            for (auto& item : *node)
                if (item.is_object() && item.value("id", std::string()) == key) match = &item;
            if (!match) return fail();
            node = match;
        } else {
            return fail();
        }
    }
    if (!node->is_number()) return fail();
    return node;
}

inline int cmd_sweep(const Common& c, const std::string& param, double from, double to, int steps,
                     std::ostream& out) {
    const auto base = load_scenario(c);
    if (steps < 1) throw Exit{kUsage, "--steps must be >= 1"};
    json doc = io::to_json(base);
    resolve_path(doc, param);  // validates the path before any solve

    std::vector<std::string> header{"step", "value", "assumptions_ok", "flat_price"};
    for (const auto& p : base.periods) header.push_back("price_" + p);
    for (const auto& cons : base.consumers) {
        header.push_back("delta_u_" + cons.id);
        header.push_back("bound_" + cons.id);
        header.push_back("verdict_" + cons.id);
    }
    Table t(header);
    json rows = json::array();
    for (int k = 0; k < steps; ++k) {
        const double value = steps == 1 ? from : from + (to - from) * k / (steps - 1);
        json d = doc;
        *resolve_path(d, param) = value;
        Scenario s;
        try {
            s = io::from_json(d);
        } catch (const io::ParseError& e) {
            throw Exit{kUsage, "step " + std::to_string(k) + ": " + e.what()};
        }
        bool ok = true;
        try {
            require_valid(s);
        } catch (const Exit& e) {
            if (e.code != kAssumptionViolation) throw;
            ok = false;
        }
        const auto eq = solve_both(s);
        const auto screens = screen_all(s, eq.flat, eq.variable);
        std::vector<std::string> cells{std::to_string(k), num(value), ok ? "true" : "false",
                                       num(eq.flat.prices.front())};
        json row{{"step", k}, {"value", value}, {"assumptions_ok", ok}, {"flat_price", eq.flat.prices.front()}};
        json prices = json::object();
        for (std::size_t p = 0; p < s.periods.size(); ++p) {
            cells.push_back(num(eq.variable.prices[p]));
            prices[s.periods[p]] = eq.variable.prices[p];
        }
        row["variable_prices"] = prices;
        json consumers = json::array();
        for (const auto& cs : screens.consumers) {
            const auto& v = cs.verdicts.front();
            cells.push_back(num(cs.change.total));
            cells.push_back(num(v.value));
            cells.push_back(std::string(to_string(v.verdict)));
            consumers.push_back({{"id", cs.consumer->id},
                                 {"delta_u", cs.change.total},
                                 {"condition", std::string(to_string(v.condition))},
                                 {"value", v.value},
                                 {"verdict", std::string(to_string(v.verdict))}});
        }
        row["consumers"] = consumers;
        t.row(cells);
        rows.push_back(row);
    }
    if (c.structured()) out << json{{"parameter", param}, {"rows", rows}}.dump(2) << '\n';
    else t.write(out);
    return kOk;
}

// ---------------------------------------------------------------------------
// verify

inline int cmd_verify(const Common& c, int count, std::ostream& out, std::ostream& err) {
    std::optional<Scenario> s;
    if (!c.scenario.empty()) {
        Common no_tol = c;
        no_tol.tol.reset();
        s = load_scenario(no_tol);
        require_valid(*s);
    }
    if (count < 0) throw Exit{kUsage, "--count must be >= 0"};
    oracle::BatteryOptions opt;
    if (c.tol) opt.tol = *c.tol;
    const std::uint64_t seed = c.seed ? *c.seed : (s ? s->options.seed : 0);
    oracle::SuiteResult res;
    try {
        res = oracle::run_verify_suite(s ? &*s : nullptr, seed, count, opt);
    } catch (const SolverError& e) {
        throw Exit{kSolverFailure, std::string("solver failure during verification: ") + e.what()};
    } catch (const GenerationError& e) {
        throw Exit{kSolverFailure, std::string("scenario generation failed: ") + e.what()};
    }

    struct Summary {
        std::size_t checks = 0, failures = 0;
        double max_rel = 0.0;
    };
    std::map<std::string, Summary> by_quantity;
    for (const auto& r : res.reports) {
        auto& q = by_quantity[r.quantity];
        ++q.checks;
        if (!r.passed) ++q.failures;
        q.max_rel = std::max(q.max_rel, r.rel_error);
    }
    const auto missing = oracle::uncovered(res.reports);

    if (c.structured()) {
        json quantities = json::array();
        for (const auto& [name, q] : by_quantity)
            quantities.push_back(
                {{"quantity", name}, {"checks", q.checks}, {"failures", q.failures}, {"max_rel_error", q.max_rel}});
        json failures = json::array();
        for (const auto& r : res.reports)
            if (!r.passed)
                failures.push_back({{"quantity", r.quantity},
                                    {"context", r.context},
                                    {"analytic", r.analytic},
                                    {"oracle", r.oracle},
                                    {"abs_error", r.abs_error},
                                    {"rel_error", r.rel_error},
                                    {"tolerance", r.tolerance}});
        out << json{{"seed", seed},
                    {"scenarios", res.scenarios},
                    {"checks", res.reports.size()},
                    {"failures", res.failures},
                    {"tolerance", opt.tol},
                    {"quantities", quantities},
                    {"uncovered", missing},
                    {"failing_reports", failures}}
                   .dump(2)
            << '\n';
    } else {
        Table summary({"quantity", "checks", "failures", "max_rel_error"});
        for (const auto& [name, q] : by_quantity)
            summary.row({name, std::to_string(q.checks), std::to_string(q.failures), num(q.max_rel)});
        Table totals({"quantity", "value"});
        totals.row({"seed", std::to_string(seed)})
            .row({"scenarios", std::to_string(res.scenarios)})
            .row({"checks", std::to_string(res.reports.size())})
            .row({"failures", std::to_string(res.failures)})
            .row({"tolerance", num(opt.tol)});
        Table failures({"quantity", "context", "analytic", "oracle", "abs_error", "rel_error", "tolerance"});
        for (const auto& r : res.reports)
            if (!r.passed)
                failures.row({r.quantity, r.context, num(r.analytic), num(r.oracle), num(r.abs_error),
                              num(r.rel_error), num(r.tolerance)});
        write_tables(out, {totals, summary, failures});
    }
    if (res.failures > 0) {
        for (const auto& r : res.reports)
            if (!r.passed) {
                err << "oracle failure: " << r.quantity << " at " << r.context << ": analytic " << num(r.analytic)
                    << ", oracle " << num(r.oracle) << ", rel error " << num(r.rel_error) << " > "
                    << num(r.tolerance) << '\n';
                break;
            }
        return kOracleFailure;
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Flat versus time-varying electricity tariffs: equilibria, welfare screens, Ramsey prices"};
    app.require_subcommand(1);
    Common common;

    auto* validate = app.add_subcommand("validate", "Check loss and cost assumptions");
    add_common(validate, common);

    std::string regime = "both";
    auto* solve = app.add_subcommand("solve", "Solve flat and/or variable equilibria");
    add_common(solve, common);
    solve->add_option("--regime", regime, "flat, variable or both")->check(CLI::IsMember({"flat", "variable", "both"}));

    auto* screen = app.add_subcommand("screen", "Utility changes and screening verdicts per consumer");
    add_common(screen, common);

    std::optional<double> target, change;
    auto* ramsey = app.add_subcommand("ramsey", "Welfare-optimal prices under a profit target");
    add_common(ramsey, common);
    ramsey->add_option("--target", target, "Total profit target");
    ramsey->add_option("--target-change", change, "Target as a fraction above unconstrained profit (0.1 = +10%)");

    std::string param;
    double from = 0.0, to = 0.0;
    int steps = 1;
    auto* sweep = app.add_subcommand("sweep", "Re-solve while varying one scenario parameter");
    add_common(sweep, common);
    sweep->add_option("--param", param, "Parameter path, e.g. consumers[0].loss.OP.k")->required();
    sweep->add_option("--from", from, "First value")->required();
    sweep->add_option("--to", to, "Last value")->required();
    sweep->add_option("--steps", steps, "Number of rows");

    int count = 100;
    auto* verify = app.add_subcommand("verify", "Oracle cross-check battery");
    add_common(verify, common, false);
    verify->add_option("--count", count, "Random scenarios in addition to --scenario");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    }

    std::ofstream file;
    if (!common.out.empty()) {
        file.open(common.out);
        if (!file) {
            err << "cannot write '" << common.out << "'\n";
            return kUsage;
        }
    }
    std::ostream& sink = common.out.empty() ? out : file;

    try {
        if (validate->parsed()) return cmd_validate(common, sink);
        if (solve->parsed()) return cmd_solve(common, regime, sink);
        if (screen->parsed()) return cmd_screen(common, sink);
        if (ramsey->parsed()) return cmd_ramsey(common, target, change, sink);
        if (sweep->parsed()) return cmd_sweep(common, param, from, to, steps, sink);
        if (verify->parsed()) return cmd_verify(common, count, sink, err);
    } catch (const Exit& e) {
        err << e.message << '\n';
        return e.code;
    } catch (const InfeasibleConstraint& e) {
        err << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << '\n';
        return kSolverFailure;
    } catch (const InvalidScenario& e) {
        err << "invalid scenario: " << e.what() << '\n';
        return kAssumptionViolation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kSolverFailure;
    }
    return kUsage;
}

}  // namespace tou::cli
