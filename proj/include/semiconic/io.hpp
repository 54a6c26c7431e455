#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "classify.hpp"
#include "eigenpath.hpp"
#include "experiments.hpp"
#include "field.hpp"
#include "locus.hpp"
#include "oscillatory.hpp"
#include "path.hpp"
#include "polynomial.hpp"

namespace semiconic::io {

using json = nlohmann::json;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

// ---------------------------------------------------------------------------
// Polynomials and fields

// [{"c": real, "e": [a, b, c]}, ...]; errors cite the term index.
inline Polynomial parse_polynomial(const json& j, const std::string& where = "polynomial") {
    if (!j.is_array()) throw ParseError(where + ": expected an array of terms");
    std::vector<Term> terms;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const json& t = j[i];
        std::string at = where + " term " + std::to_string(i);
        if (!t.is_object() || !t.contains("c") || !t.contains("e")) throw ParseError(at + ": needs keys c and e");
        if (!t["c"].is_number()) throw ParseError(at + ": coefficient is not a number");
        const json& e = t["e"];
        if (!e.is_array() || e.size() != 3) throw ParseError(at + ": exponent must be a triple");
        Term term;
        term.c = t["c"].get<double>();
        for (int k = 0; k < 3; ++k) {
            if (!e[k].is_number_integer()) throw ParseError(at + ": exponent entries must be integers");
            term.e[k] = e[k].get<int>();
            if (term.e[k] < 0) throw ParseError(at + ": negative exponent");
            if (term.e[k] > kMaxDegree)
                throw ParseError(at + ": degree " + std::to_string(term.e[k]) + " exceeds " + std::to_string(kMaxDegree));
        }
        terms.push_back(term);
    }
    try {
        return Polynomial(terms);
    } catch (const std::invalid_argument& ex) {
        throw ParseError(where + ": " + ex.what());
    }
}

inline json to_json(const Polynomial& p) {
    json a = json::array();
    for (const auto& t : p.terms()) a.push_back({{"c", t.c}, {"e", {t.e[0], t.e[1], t.e[2]}}});
    return a;
}

inline BuiltinParams parse_params(const json& j) {
    BuiltinParams p;
    if (j.is_null()) return p;
    if (!j.is_object()) throw ParseError("params: expected an object");
    for (const auto& [k, v] : j.items()) {
        if (k == "h") p.h = v.get<std::vector<double>>();
        else if (k == "m") p.m = v.get<std::vector<double>>();
        else if (k == "m0") p.m = {v.get<double>()};
        else if (k == "h1") p.h1 = parse_polynomial(v, "params.h1");
        else if (k == "h2") p.h2 = parse_polynomial(v, "params.h2");
        else if (k == "E") p.E = v.get<double>();
        else if (k == "E_prime") p.E_prime = v.get<double>();
        else if (k == "c") p.c = v.get<double>();
        else throw ParseError("params: unknown key " + k);
    }
    return p;
}

inline json to_json(const BuiltinParams& p) {
    return {{"h", p.h}, {"m", p.m}, {"h1", to_json(p.h1)}, {"h2", to_json(p.h2)},
            {"E", p.E}, {"E_prime", p.E_prime}, {"c", p.c}};
}

// {"arity": 2|3, "components": [[terms], [terms]]}, {"n": N, "arity": 2|3, "upper": [[terms], ...]},
// or {"builtin": name, "params": {...}}.
inline AnyField parse_any_field(const json& j) {
    if (!j.is_object()) throw ParseError("field: expected an object");
    try {
        if (j.contains("builtin")) return builtin(j["builtin"].get<std::string>(), parse_params(j.value("params", json())));
        if (!j.contains("arity")) throw ParseError("field: missing arity");
        int arity = j["arity"].get<int>();
        if (j.contains("upper")) {
            std::vector<Polynomial> up;
            for (std::size_t i = 0; i < j["upper"].size(); ++i)
                up.push_back(parse_polynomial(j["upper"][i], "entry " + std::to_string(i)));
            return NLevelHamiltonianMap(j.at("n").get<int>(), arity, up);
        }
        const json& c = j.at("components");
        if (!c.is_array() || c.size() != 2) throw ParseError("field: components must hold two polynomials");
        return ControlField(arity, parse_polynomial(c[0], "component 0"), parse_polynomial(c[1], "component 1"));
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(std::string("field: ") + e.what());
    }
}

inline ControlField parse_field(const json& j) {
    AnyField a = parse_any_field(j);
    if (!std::holds_alternative<ControlField>(a)) throw ParseError("field: expected a two-level control field");
    return std::get<ControlField>(a);
}

// Builtins serialize by name unless `expand` asks for the explicit terms.
inline json to_json(const ControlField& f, bool expand = false) {
    if (f.builtin_info() && !expand) return {{"builtin", f.builtin_info()->name}, {"params", to_json(f.builtin_info()->params)}};
    return {{"arity", f.arity()}, {"components", {to_json(f.component(0)), to_json(f.component(1))}}};
}

// ---------------------------------------------------------------------------
// Paths

// {"segments": [{"kind": "polynomial", "t0", "t1", "u": [...], "v": [...]} |
//               {"kind": "arc", "t0", "t1", "center": [cu, cv], "radius", "angle0", "angle1"}], "reversed": bool}
// Shorthands: {"polynomial": {"u": [...], "v": [...]}}, {"line": {"from": [..], "to": [..]}},
// {"circle": {"center": [..], "radius": r, "angle0": a, "turns": n}}.
// Polynomial coefficients are in s = t - t0.
inline ControlPath parse_path(const json& j) {
    if (!j.is_object()) throw ParseError("path: expected an object");
    try {
        ControlPath p;
        if (j.contains("polynomial")) {
            p = ControlPath::polynomial(j["polynomial"].at("u").get<std::vector<double>>(),
                                        j["polynomial"].at("v").get<std::vector<double>>());
        } else if (j.contains("line")) {
            auto a = j["line"].at("from").get<std::vector<double>>(), b = j["line"].at("to").get<std::vector<double>>();
            if (a.size() != 2 || b.size() != 2) throw ParseError("path: line ends must be pairs");
            p = ControlPath::line({a[0], a[1]}, {b[0], b[1]});
        } else if (j.contains("circle")) {
            const json& c = j["circle"];
            auto ctr = c.at("center").get<std::vector<double>>();
            if (ctr.size() != 2) throw ParseError("path: circle center must be a pair");
            p = ControlPath::circle({ctr[0], ctr[1]}, c.at("radius").get<double>(), c.value("angle0", 0.0),
                                    c.value("turns", 1.0));
        } else if (j.contains("segments")) {
            std::vector<PathSegment> segs;
            for (std::size_t i = 0; i < j["segments"].size(); ++i) {
                const json& s = j["segments"][i];
                std::string at = "path segment " + std::to_string(i);
                PathSegment seg;
                seg.t0 = s.at("t0").get<double>();
                seg.t1 = s.at("t1").get<double>();
                std::string kind = s.value("kind", "polynomial");
                if (kind == "polynomial") {
                    seg.u = s.at("u").get<std::vector<double>>();
                    seg.v = s.at("v").get<std::vector<double>>();
                } else if (kind == "arc") {
                    seg.kind = PathSegment::Kind::arc;
                    auto ctr = s.at("center").get<std::vector<double>>();
                    if (ctr.size() != 2) throw ParseError(at + ": center must be a pair");
                    seg.cu = ctr[0];
                    seg.cv = ctr[1];
                    seg.radius = s.at("radius").get<double>();
                    seg.a0 = s.at("angle0").get<double>();
                    seg.a1 = s.at("angle1").get<double>();
                } else {
                    throw ParseError(at + ": unknown kind " + kind);
                }
                segs.push_back(seg);
            }
            p = ControlPath(segs);
        } else {
            throw ParseError("path: expected polynomial, line, circle or segments");
        }
        if (j.value("reversed", false)) p = p.reversed();
        return p;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(std::string("path: ") + e.what());
    }
}

inline json to_json(const ControlPath& p) {
    json segs = json::array();
    for (const auto& s : p.segments()) {
        if (s.kind == PathSegment::Kind::polynomial)
            segs.push_back({{"kind", "polynomial"}, {"t0", s.t0}, {"t1", s.t1}, {"u", s.u}, {"v", s.v}});
        else
            segs.push_back({{"kind", "arc"}, {"t0", s.t0}, {"t1", s.t1}, {"center", {s.cu, s.cv}},
                            {"radius", s.radius}, {"angle0", s.a0}, {"angle1", s.a1}});
    }
    return {{"segments", segs}, {"reversed", p.is_reversed()}};
}

// ---------------------------------------------------------------------------
// Phase profiles: {"a": a, "b": b, "phase": [c0, c1, ...], "amplitude": [c0, ...]} (coefficients in x).

inline PhaseProfile parse_profile(const json& j) {
    try {
        return PhaseProfile::polynomial(j.at("phase").get<std::vector<double>>(),
                                        j.value("amplitude", std::vector<double>{1.0}), j.value("a", 0.0),
                                        j.value("b", 1.0));
    } catch (const std::exception& e) {
        throw ParseError(std::string("profile: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Command-line values

// "u,v[,z]"
inline std::vector<double> parse_point(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ParseError("bad coordinate '" + item + "' in " + s);
        }
    }
    if (out.size() < 2 || out.size() > 3) throw ParseError("point needs 2 or 3 coordinates: " + s);
    return out;
}

// "a:b:n" geometric (for eps) or uniform (for z); a comma list is taken verbatim.
inline std::vector<double> parse_grid(const std::string& s, bool geometric) {
    if (s.find(':') != std::string::npos) {
        std::stringstream ss(s);
        std::string a, b, n;
        std::getline(ss, a, ':');
        std::getline(ss, b, ':');
        std::getline(ss, n, ':');
        try {
            double lo = std::stod(a), hi = std::stod(b);
            int cnt = std::stoi(n);
            return geometric ? geometric_grid(lo, hi, cnt) : uniform_grid(lo, hi, cnt);
        } catch (const std::invalid_argument& e) {
            throw ParseError("bad grid " + s + ": " + e.what());
        }
    }
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    if (out.empty()) throw ParseError("empty grid");
    return out;
}

// {"geometric": [a, b, n]} | {"uniform": [a, b, n]} | [x0, x1, ...]
inline std::vector<double> grid_from_json(const json& j) {
    if (j.is_array()) return j.get<std::vector<double>>();
    if (j.contains("geometric")) {
        const json& g = j["geometric"];
        return geometric_grid(g.at(0).get<double>(), g.at(1).get<double>(), g.at(2).get<int>());
    }
    if (j.contains("uniform")) {
        const json& g = j["uniform"];
        return uniform_grid(g.at(0).get<double>(), g.at(1).get<double>(), g.at(2).get<int>());
    }
    throw ParseError("grid: expected a list, geometric or uniform");
}

// ---------------------------------------------------------------------------
// Results

inline json to_json(const Classification& c) {
    json j = {{"verdict", to_string(c.verdict)}};
    if (c.eta) j["eta"] = {(*c.eta)[0], (*c.eta)[1]};
    const auto& d = c.diagnostics;
    j["diagnostics"] = {{"residual", d.residual},       {"chi", d.chi},
                        {"collinearity", d.collinearity}, {"d_eta_chi", d.d_eta_chi},
                        {"dz_norm", d.dz_norm},         {"submersion", d.submersion},
                        {"scale", d.scale},             {"eta_component", d.eta_component}};
    return j;
}

inline json to_json(const RateFit& r) {
    return {{"slope", r.slope}, {"intercept", r.intercept}, {"constant", r.envelope}, {"floored", r.floored},
            {"flagged", r.flagged}};
}

inline json to_json(const TransferResult& r) {
    json per_z = json::array();
    for (std::size_t i = 0; i < r.z_grid.size(); ++i) {
        json e = {{"z", r.z_grid[i]}, {"regime", r.regime[i]}};
        e["fit"] = r.per_z[i] ? to_json(*r.per_z[i]) : json(nullptr);
        per_z.push_back(e);
    }
    json j = {{"run_id", r.run_id},
              {"z_grid", r.z_grid},
              {"eps_grid", r.eps_grid},
              {"per_z", per_z},
              {"uniform", r.uniform ? to_json(*r.uniform) : json(nullptr)},
              {"uniform_defects", r.uniform_defects},
              {"metadata", r.metadata}};
    return j;
}

inline std::string curve_csv(const LocusCurve& c) {
    std::ostringstream os;
    os.precision(17);
    os << "index,u,v,z,tu,tv,tz,verdict\n";
    for (std::size_t i = 0; i < c.vertices.size(); ++i) {
        const auto& x = c.vertices[i];
        const auto& t = c.tangents[i];
        os << i << ',' << x[0] << ',' << x[1] << ',' << x[2] << ',' << t[0] << ',' << t[1] << ',' << t[2] << ','
           << (i < c.markers.size() ? to_string(c.markers[i].verdict) : "") << '\n';
    }
    return os.str();
}

inline std::string branches_csv(const EigenBranches& B) {
    std::ostringstream os;
    os.precision(17);
    os << "t,lambda0,lambda1,phi0x,phi0y,phi1x,phi1y,theta\n";
    for (std::size_t k = 0; k < B.t.size(); ++k)
        os << B.t[k] << ',' << B.lambda0[k] << ',' << B.lambda1[k] << ',' << B.phi0[k][0] << ',' << B.phi0[k][1]
           << ',' << B.phi1[k][0] << ',' << B.phi1[k][1] << ',' << B.theta[k] << '\n';
    return os.str();
}

}  // namespace semiconic::io
