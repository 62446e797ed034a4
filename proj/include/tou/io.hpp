#pragma once

// JSON scenario documents.
//
//   {
//     "periods": ["PE", "OP"],
//     "cost": [0, 0, 0.5],
//     "consumers": [
//       {"id": "a", "A": 1,
//        "loss": {"PE": {"family": "quadratic", "k": 2, "d_bar": 5},
//                 "OP": {"family": "isoelastic", "d_ref": 1, "pi_ref": 2, "epsilon": -0.5}}}
//     ],
//     "options": {"flat_tol": 1e-10, "var_tol": 1e-12, "quad_tol": 1e-9,
//                 "grid_points": 256, "seed": 0}
//   }
//
// Loss parameters may also be nested under "params".

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tou/demand.hpp"
#include "tou/market.hpp"

namespace tou::io {

using json = nlohmann::ordered_json;

/// Parse failure anchored to a line (syntax) or a field path (schema).
class ParseError : public std::runtime_error {
public:
    ParseError(std::string field, int line, const std::string& message)
        : std::runtime_error(format(field, line, message)), field_(std::move(field)), line_(line) {}

    const std::string& field() const { return field_; }
    int line() const { return line_; }

private:
    static std::string format(const std::string& field, int line, const std::string& message) {
        std::string where;
        if (line > 0) where = "line " + std::to_string(line);
        if (!field.empty()) where += (where.empty() ? "" : ", ") + std::string("field '") + field + "'";
        return where.empty() ? message : where + ": " + message;
    }
    std::string field_;
    int line_;
};

struct NamedParams {
    std::string family;
    std::vector<std::pair<std::string, double>> params;
};

/// Family name and parameters of a loss, in emission order.
inline NamedParams describe(const LossSpec& spec) {
    if (const auto* q = spec.as_quadratic()) return {"quadratic", {{"k", q->k}, {"d_bar", q->d_bar}}};
    if (const auto* i = spec.as_isoelastic())
        return {"isoelastic",
                {{"d_ref", i->d_ref},
                 {"pi_ref", i->pi_ref},
                 {"epsilon", i->epsilon},
                 {"pi_low", i->pi_low},
                 {"pi_high", i->pi_high}}};
    const auto* c = spec.as_custom();
    if (c->name.empty())
        throw PreconditionError("custom loss without a named form cannot be serialized");
    return {c->name, c->params};
}

namespace detail {

inline int line_of(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw ParseError(path, 0, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path.empty() ? key : path + "." + key, 0, "missing");
    return *it;
}

inline double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ParseError(path, 0, "expected a number");
    return v.get<double>();
}

inline double param(const json& loss, const std::string& key, const std::string& path) {
    const json& src = loss.contains("params") ? loss.at("params") : loss;
    const std::string base = loss.contains("params") ? path + ".params" : path;
    return number(require(src, key, base), base + "." + key);
}

inline bool has_param(const json& loss, const std::string& key) {
    const json& src = loss.contains("params") ? loss.at("params") : loss;
    return src.is_object() && src.contains(key);
}

inline LossSpec parse_loss(const json& loss, const std::string& path) {
    if (!loss.is_object()) throw ParseError(path, 0, "expected an object");
    const json& fam = require(loss, "family", path);
    if (!fam.is_string()) throw ParseError(path + ".family", 0, "expected a string");
    const std::string family = fam.get<std::string>();
    try {
        if (family == "quadratic")
            return LossSpec::quadratic(param(loss, "k", path), param(loss, "d_bar", path));
        if (family == "isoelastic") {
            const double d_ref = param(loss, "d_ref", path);
            const double pi_ref = param(loss, "pi_ref", path);
            const double eps = param(loss, "epsilon", path);
            if (has_param(loss, "pi_low") || has_param(loss, "pi_high")) {
                const double lo = has_param(loss, "pi_low") ? param(loss, "pi_low", path) : 0.01 * pi_ref;
                const double hi = has_param(loss, "pi_high") ? param(loss, "pi_high", path) : 100.0 * pi_ref;
                return LossSpec::isoelastic(d_ref, pi_ref, eps, lo, hi);
            }
            return LossSpec::isoelastic(d_ref, pi_ref, eps);
        }
        if (family == "cubic")
            return cubic_loss(param(loss, "k", path), param(loss, "m", path), param(loss, "d_bar", path));
    } catch (const InvalidScenario& e) {
        throw ParseError(path, 0, e.what());
    }
    throw ParseError(path + ".family", 0, "unknown family '" + family + "'");
}

}  // namespace detail

/// Builds a Scenario from a parsed document. Checks structure and parameter
/// domains; assumption and cost checks are left to the caller.
inline Scenario from_json(const json& doc) {
    using detail::require;
    if (!doc.is_object()) throw ParseError("", 0, "document must be an object");
    Scenario s;

    const json& periods = require(doc, "periods", "");
    if (!periods.is_array() || periods.empty()) throw ParseError("periods", 0, "expected a non-empty array");
    for (std::size_t t = 0; t < periods.size(); ++t) {
        if (!periods[t].is_string())
            throw ParseError("periods[" + std::to_string(t) + "]", 0, "expected a string");
        const auto label = periods[t].get<std::string>();
        for (const auto& seen : s.periods)
            if (seen == label) throw ParseError("periods", 0, "duplicate label '" + label + "'");
        s.periods.push_back(label);
    }

    const json& cost = require(doc, "cost", "");
    if (!cost.is_array()) throw ParseError("cost", 0, "expected an array of coefficients");
    for (std::size_t k = 0; k < cost.size(); ++k)
        s.cost.coefficients.push_back(detail::number(cost[k], "cost[" + std::to_string(k) + "]"));

    const json& consumers = require(doc, "consumers", "");
    if (!consumers.is_array() || consumers.empty())
        throw ParseError("consumers", 0, "expected a non-empty array");
    for (std::size_t i = 0; i < consumers.size(); ++i) {
        const std::string path = "consumers[" + std::to_string(i) + "]";
        const json& cj = consumers[i];
        Consumer c;
        const json& id = require(cj, "id", path);
        if (!id.is_string()) throw ParseError(path + ".id", 0, "expected a string");
        c.id = id.get<std::string>();
        c.A = detail::number(require(cj, "A", path), path + ".A");
        if (!(c.A > 0.0)) throw ParseError(path + ".A", 0, "must be > 0");
        const json& loss = require(cj, "loss", path);
        if (!loss.is_object()) throw ParseError(path + ".loss", 0, "expected an object");
        for (const auto& p : s.periods) {
            const json& lj = require(loss, p, path + ".loss");
            c.loss.emplace(p, detail::parse_loss(lj, path + ".loss." + p));
        }
        for (auto it = loss.begin(); it != loss.end(); ++it)
            if (!c.loss.count(it.key()))
                throw ParseError(path + ".loss." + it.key(), 0, "unknown period");
        s.consumers.push_back(std::move(c));
    }

    if (doc.contains("options")) {
        const json& o = doc.at("options");
        if (!o.is_object()) throw ParseError("options", 0, "expected an object");
        auto opt = [&](const char* key, double& dst) {
            if (o.contains(key)) dst = detail::number(o.at(key), std::string("options.") + key);
        };
        opt("flat_tol", s.options.flat_tol);
        opt("var_tol", s.options.var_tol);
        opt("quad_tol", s.options.quad_tol);
        if (o.contains("grid_points")) {
            const json& g = o.at("grid_points");
            if (!g.is_number_integer() || g.get<long long>() < 16)
                throw ParseError("options.grid_points", 0, "expected an integer >= 16");
            s.options.grid_points = g.get<int>();
        }
        if (o.contains("seed")) {
            const json& g = o.at("seed");
            if (!g.is_number_unsigned() && !(g.is_number_integer() && g.get<long long>() >= 0))
                throw ParseError("options.seed", 0, "expected a non-negative integer");
            s.options.seed = g.get<std::uint64_t>();
        }
        for (const char* key : {"flat_tol", "var_tol", "quad_tol"}) {
            const double v = detail::number(o.value(key, 1.0), std::string("options.") + key);
            if (!(v > 0.0)) throw ParseError(std::string("options.") + key, 0, "must be > 0");
        }
    }
    return s;
}

/// Parses document text; syntax errors carry the line number.
inline Scenario parse(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("", detail::line_of(text, e.byte), e.what());
    }
    return from_json(doc);
}

inline Scenario load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("", 0, "cannot read '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

inline json to_json(const Scenario& s) {
    json doc;
    doc["periods"] = s.periods;
    doc["cost"] = s.cost.coefficients;
    json consumers = json::array();
    for (const auto& c : s.consumers) {
        json cj;
        cj["id"] = c.id;
        cj["A"] = c.A;
        json loss = json::object();
        for (const auto& p : s.periods) {
            const auto named = describe(c.loss_for(p));
            json lj;
            lj["family"] = named.family;
            for (const auto& [k, v] : named.params) lj[k] = v;
            loss[p] = std::move(lj);
        }
        cj["loss"] = std::move(loss);
        consumers.push_back(std::move(cj));
    }
    doc["consumers"] = std::move(consumers);
    doc["options"] = {{"flat_tol", s.options.flat_tol},
                      {"var_tol", s.options.var_tol},
                      {"quad_tol", s.options.quad_tol},
                      {"grid_points", s.options.grid_points},
                      {"seed", s.options.seed}};
    return doc;
}

inline std::string emit(const Scenario& s, int indent = 2) { return to_json(s).dump(indent); }

/// Structural equality: same periods, cost, options, and consumers with the
/// same families and parameters.
inline bool equal(const Scenario& a, const Scenario& b) {
    if (a.periods != b.periods || a.cost.coefficients != b.cost.coefficients) return false;
    if (a.options.flat_tol != b.options.flat_tol || a.options.var_tol != b.options.var_tol ||
        a.options.quad_tol != b.options.quad_tol || a.options.grid_points != b.options.grid_points ||
        a.options.seed != b.options.seed)
        return false;
    if (a.consumers.size() != b.consumers.size()) return false;
    for (std::size_t i = 0; i < a.consumers.size(); ++i) {
        const auto& ca = a.consumers[i];
        const auto& cb = b.consumers[i];
        if (ca.id != cb.id || ca.A != cb.A || ca.loss.size() != cb.loss.size()) return false;
        for (const auto& [period, spec] : ca.loss) {
            auto it = cb.loss.find(period);
            if (it == cb.loss.end()) return false;
            const auto x = describe(spec), y = describe(it->second);
            if (x.family != y.family || x.params != y.params) return false;
        }
    }
    return true;
}

}  // namespace tou::io
