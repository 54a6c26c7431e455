#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "experiments.hpp"
#include "io.hpp"
#include "locus.hpp"

namespace semiconic {

struct ClauseResult {
    std::string name;
    std::string kind;
    bool pass = false;
    double value = 0.0;  // measured quantity compared against the threshold
    double threshold = 0.0;
    std::string detail;
};

struct RunOutcome {
    TransferResult result;
    std::vector<ClauseResult> clauses;
    io::json diagnostics;
    bool all_pass() const {
        for (const auto& c : clauses)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

inline std::size_t find_index(const std::vector<double>& grid, double x, const char* what) {
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (std::abs(grid[i] - x) <= 1e-9 * std::max(1.0, std::abs(x))) return i;
    throw std::invalid_argument(std::string(what) + " value " + std::to_string(x) + " is not on the grid");
}

inline std::vector<std::size_t> z_indices(const TransferResult& r, const io::json& c) {
    std::vector<std::size_t> out;
    if (!c.contains("z")) {
        for (std::size_t i = 0; i < r.z_grid.size(); ++i) out.push_back(i);
        return out;
    }
    for (double z : c["z"].get<std::vector<double>>()) out.push_back(find_index(r.z_grid, z, "z"));
    return out;
}

// Order of eps indices from largest to smallest eps.
inline std::vector<std::size_t> eps_descending(const std::vector<double>& eps) {
    std::vector<std::size_t> idx(eps.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return eps[a] > eps[b]; });
    return idx;
}

}  // namespace detail

// Acceptance clauses over a finished sweep. Kinds: T_at_least, T_at_most, T_decreasing, uniform_slope_at_least,
// per_z_slope_at_least, defect_nonincreasing.
inline ClauseResult evaluate_clause(const TransferResult& r, const io::json& c) {
    ClauseResult out;
    out.kind = c.at("kind").get<std::string>();
    out.name = c.value("name", out.kind);
    out.threshold = c.value("value", 0.0);
    const double tol = c.value("tolerance", 0.1);
    std::ostringstream os;
    os.precision(6);
    auto cells_ok = [&](std::size_t i) {
        for (const auto& s : r.status[i])
            if (s != "ok") return false;
        return true;
    };
    if (out.kind == "T_at_least" || out.kind == "T_at_most") {
        std::size_t j = detail::find_index(r.eps_grid, c.at("eps").get<double>(), "eps");
        bool lower = out.kind == "T_at_least";
        out.pass = true;
        out.value = lower ? 1.0 : 0.0;
        for (std::size_t i : detail::z_indices(r, c)) {
            double T = r.T[i][j];
            bool ok = r.status[i][j] == "ok" && (lower ? T >= out.threshold : T <= out.threshold);
            out.pass = out.pass && ok;
            out.value = lower ? std::min(out.value, T) : std::max(out.value, T);
            os << "z=" << r.z_grid[i] << ":T=" << T << (ok ? " " : "(x) ");
        }
    } else if (out.kind == "T_decreasing" || out.kind == "defect_nonincreasing") {
        // Along decreasing eps, each value may exceed its predecessor by at most `tolerance` (relative).
        auto order = detail::eps_descending(r.eps_grid);
        const double floor = c.value("floor", 1e-12);
        out.pass = true;
        out.value = 0.0;
        std::vector<std::size_t> zs;
        if (out.kind == "T_decreasing") zs = detail::z_indices(r, c);
        else
            for (std::size_t i = 0; i < r.z_grid.size(); ++i)
                if (r.regime[i] == 1) zs.push_back(i);
        for (std::size_t i : zs) {
            if (!cells_ok(i)) {
                out.pass = false;
                os << "z=" << r.z_grid[i] << ":failed-cells ";
                continue;
            }
            const auto& row = out.kind == "T_decreasing" ? r.T[i] : r.defects[i];
            double worst = 0.0;
            for (std::size_t k = 1; k < order.size(); ++k) {
                double prev = row[order[k - 1]], cur = row[order[k]];
                if (cur <= floor) continue;
                worst = std::max(worst, cur / std::max(prev, floor) - 1.0);
            }
            bool ok = worst <= tol;
            out.pass = out.pass && ok;
            out.value = std::max(out.value, worst);
            os << "z=" << r.z_grid[i] << ":rise=" << worst << (ok ? " " : "(x) ");
        }
        out.threshold = tol;
    } else if (out.kind == "uniform_slope_at_least") {
        std::vector<double> d(r.eps_grid.size(), 0.0);
        std::vector<double> excl = c.value("exclude_z", std::vector<double>{});
        bool any = false;
        for (std::size_t i = 0; i < r.z_grid.size(); ++i) {
            if (r.regime[i] != 1) continue;
            bool skip = false;
            for (double z : excl) skip = skip || std::abs(z - r.z_grid[i]) <= 1e-12;
            if (skip) continue;
            any = true;
            for (std::size_t j = 0; j < d.size(); ++j)
                d[j] = std::max(d[j], r.status[i][j] == "ok" ? r.defects[i][j] : 1.0);
        }
        if (!any) throw std::invalid_argument("uniform slope clause has no transfer-regime z");
        try {
            RateFit f = fit_rate(r.eps_grid, d);
            out.value = f.slope;
            out.pass = f.slope >= out.threshold;
            os << "slope=" << f.slope << " constant=" << f.envelope << (f.flagged ? " floored" : "");
        } catch (const std::exception& e) {
            out.pass = false;
            os << e.what();
        }
    } else if (out.kind == "per_z_slope_at_least") {
        out.pass = true;
        out.value = 1e300;
        for (std::size_t i : detail::z_indices(r, c)) {
            double s = -1e300;
            try {
                if (cells_ok(i)) s = fit_rate(r.eps_grid, r.defects[i]).slope;
            } catch (const std::exception&) {
            }
            bool ok = s >= out.threshold;
            out.pass = out.pass && ok;
            out.value = std::min(out.value, s);
            os << "z=" << r.z_grid[i] << ":slope=" << s << (ok ? " " : "(x) ");
        }
    } else {
        throw std::invalid_argument("unknown acceptance clause kind " + out.kind);
    }
    out.detail = os.str();
    return out;
}

inline io::json to_json(const ClauseResult& c) {
    return {{"name", c.name},   {"kind", c.kind},         {"pass", c.pass},
            {"value", c.value}, {"threshold", c.threshold}, {"detail", c.detail}};
}

inline LocusCurve trace_for_run(const ControlField& f, const io::json& cfg, const std::vector<double>& fallback_seed) {
    std::vector<double> seed = cfg.value("seed", fallback_seed);
    TraceOptions to;
    if (cfg.contains("trace")) {
        to.step = cfg["trace"].value("step", to.step);
        to.max_len = cfg["trace"].value("max_len", to.max_len);
    }
    LocusCurve L = trace_locus(f, seed, to);
    L.turning_points = turning_points(f, L);
    return L;
}

// Full pipeline from a run configuration: trace, synthesize the path, sweep, evaluate clauses.
inline RunOutcome run_config(const io::json& cfg) {
    RunOutcome out;
    ControlField f = io::parse_field(cfg.at("field"));
    const std::string kind = cfg.value("experiment", "condition-C");
    std::vector<double> eps = io::grid_from_json(cfg.value("eps_grid", io::json{{"geometric", {1e-1, 3.1622776601683794e-4, 8}}}));
    PropagateOptions po;
    if (cfg.contains("propagation")) {
        const auto& p = cfg["propagation"];
        po.theta_max = p.value("theta_max", po.theta_max);
        po.max_steps = p.value("max_steps", po.max_steps);
        if (p.value("scheme", std::string("midpoint")) == "magnus4") po.scheme = Scheme::magnus4;
    }
    std::vector<double> entry = cfg.at("entry").get<std::vector<double>>();
    LocusCurve L = trace_for_run(f, cfg, entry);
    out.diagnostics["locus"] = {{"vertices", L.vertices.size()}, {"turning_points", L.turning_points.size()},
                                {"stop_reason", L.stop_reason}};
    SweepSpec spec;
    if (kind == "condition-C") {
        CPathReport C = synthesize_C_path(f, L, entry);
        std::vector<double> zg =
            io::grid_from_json(cfg.value("z_grid", io::json{{"uniform", {C.z0, C.z0 + 2.0 * (C.z_fold - C.z0), 9}}}));
        spec = condition_C_sweep(f, C, zg, eps);
        out.diagnostics["path"] = {{"fit_degree", C.span.degree},
                                   {"fit_residual", C.span.residual},
                                   {"locus_residual", C.locus_residual},
                                   {"end_value", C.end_value},
                                   {"end_velocity", C.end_velocity},
                                   {"end_acceleration", C.end_acceleration},
                                   {"z0", C.z0},
                                   {"z_fold", C.z_fold},
                                   {"path", io::to_json(C.path)}};
    } else if (kind == "loop" || kind == "exit-leg") {
        std::vector<double> ex = cfg.at("exit").get<std::vector<double>>();
        std::vector<double> base = cfg.at("base").get<std::vector<double>>();
        if (base.size() != 2) throw io::ParseError("base must be a pair");
        LoopOptions lo;
        if (cfg.contains("loop")) {
            lo.t0 = cfg["loop"].value("t0", lo.t0);
            lo.t1 = cfg["loop"].value("t1", lo.t1);
            lo.exit_speed = cfg["loop"].value("exit_speed", lo.exit_speed);
        }
        LoopReport R = synthesize_loop_path(f, L, entry, ex, {base[0], base[1]}, lo);
        std::vector<double> zg = io::grid_from_json(cfg.value("z_grid", io::json{{"uniform", {R.z0, R.z1, 9}}}));
        spec = kind == "loop" ? loop_sweep(f, R, zg, eps) : exit_leg_sweep(f, R, zg, eps);
        out.diagnostics["path"] = {{"fit_degree", R.span.degree},
                                   {"fit_residual", R.span.residual},
                                   {"z_range_ok", R.z_range_ok},
                                   {"arc_z_range", {R.arc_z_min, R.arc_z_max}},
                                   {"min_gap_off_segment", R.min_gap_off_segment},
                                   {"min_gap_t", R.min_gap_t},
                                   {"join_defect_c4", R.path.join_defect(4)},
                                   {"notes", R.diagnostics},
                                   {"path", io::to_json(R.path)}};
    } else {
        throw io::ParseError("unknown experiment " + kind);
    }
    spec.propagation = po;
    spec.threads = cfg.value("threads", 0u);
    spec.metadata["field"] = io::to_json(f).dump();
    spec.metadata["experiment"] = kind;
    spec.metadata["theta_max"] = std::to_string(po.theta_max);
    spec.metadata["scheme"] = po.scheme == Scheme::magnus4 ? "magnus4" : "midpoint";
    out.result = ensemble_sweep(spec);
    for (const auto& c : cfg.value("acceptance", io::json::array())) out.clauses.push_back(evaluate_clause(out.result, c));
    return out;
}

inline io::json summary_json(const RunOutcome& o) {
    io::json j = io::to_json(o.result);
    io::json cl = io::json::array();
    for (const auto& c : o.clauses) cl.push_back(to_json(c));
    j["acceptance"] = cl;
    j["all_pass"] = o.all_pass();
    j["diagnostics"] = o.diagnostics;
    return j;
}

}  // namespace semiconic
