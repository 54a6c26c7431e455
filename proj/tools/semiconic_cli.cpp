// Command-line front end: one subcommand per pipeline stage plus `run` for full configured experiments.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <semiconic/semiconic.hpp>

using namespace semiconic;
using io::json;

namespace {

void emit(const json& j, const std::string& out) {
    if (out.empty()) std::cout << j.dump(2) << '\n';
    else io::write_text(out, j.dump(2) + "\n");
}

void emit_text(const std::string& text, const std::string& out) {
    if (out.empty()) std::cout << text;
    else io::write_text(out, text);
}

Tolerances tolerances(double rank) {
    Tolerances t;
    if (rank > 0.0) t.rank = rank;
    return t;
}

std::optional<double> opt_z(const ControlField& f, const std::optional<double>& z) {
    if (f.arity() == 3 && !z) throw std::invalid_argument("family field needs --z");
    return f.arity() == 3 ? z : std::nullopt;
}

json jet_json(const Jet2& j) {
    return {{"value", j.value}, {"gradient", j.gradient}, {"hessian", j.hessian}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conical and semi-conical eigenvalue intersections: classification, loci, branches, propagation"};
    app.require_subcommand(1);

    std::string field_file, path_file, out, point, config, profile_file, csv_file;
    double rank = 0.0;

    auto* classify_cmd = app.add_subcommand("classify", "Classify a zero of the field");
    classify_cmd->add_option("--field", field_file, "field JSON")->required();
    classify_cmd->add_option("--point", point, "u,v[,z]")->required();
    classify_cmd->add_option("--tol-rank", rank, "rank threshold");
    classify_cmd->add_option("--out", out, "output JSON");

    std::string seed;
    double step = 0.01, max_len = 2.0;
    auto* trace_cmd = app.add_subcommand("trace", "Trace the singular locus through a seed");
    trace_cmd->add_option("--field", field_file)->required();
    trace_cmd->add_option("--seed", seed, "u,v,z")->required();
    trace_cmd->add_option("--step", step);
    trace_cmd->add_option("--max-len", max_len, "arclength per direction");
    trace_cmd->add_option("--out", out, "curve CSV; turning points go to <out>.turning.json");

    std::string steps = "1,2";
    auto* nf_cmd = app.add_subcommand("normalform", "Reduce to the (SC)/(SCP) normal conditions");
    nf_cmd->add_option("--field", field_file)->required();
    nf_cmd->add_option("--point", point)->required();
    nf_cmd->add_option("--steps", steps, "reduction steps to apply: 1 or 1,2");
    nf_cmd->add_option("--out", out);

    std::optional<double> zopt;
    int grid = 10000;
    auto* br_cmd = app.add_subcommand("branches", "Track eigenpairs along a path");
    br_cmd->add_option("--field", field_file)->required();
    br_cmd->add_option("--path", path_file)->required();
    br_cmd->add_option("--z", zopt);
    br_cmd->add_option("--grid", grid);
    br_cmd->add_option("--out", out, "branches CSV");

    double eps = 1e-2, theta_max = 0.1;
    std::string frame = "physical", scheme = "midpoint";
    auto* pr_cmd = app.add_subcommand("propagate", "Propagate the lower eigenstate along a path");
    pr_cmd->add_option("--field", field_file)->required();
    pr_cmd->add_option("--path", path_file)->required();
    pr_cmd->add_option("--z", zopt);
    pr_cmd->add_option("--eps", eps)->required();
    pr_cmd->add_option("--frame", frame)->check(CLI::IsMember({"physical", "rotating"}));
    pr_cmd->add_option("--scheme", scheme)->check(CLI::IsMember({"midpoint", "magnus4"}));
    pr_cmd->add_option("--theta-max", theta_max);
    pr_cmd->add_option("--grid", grid, "branch grid for targets and frame");
    pr_cmd->add_option("--out", out);

    int k = 1;
    std::string eps_grid = "0.1:0.00031622776601683794:8";
    auto* osc_cmd = app.add_subcommand("oscillatory", "Fit the decay exponent of an oscillatory integral");
    osc_cmd->add_option("--profile", profile_file)->required();
    osc_cmd->add_option("--k", k)->required();
    osc_cmd->add_option("--eps-grid", eps_grid, "a:b:n geometric or comma list");
    osc_cmd->add_option("--out", out);

    std::string z_grid = "-0.5:0.5:9", regime = "auto";
    unsigned threads = 0;
    auto* sw_cmd = app.add_subcommand("sweep", "Transition probabilities over a (z, eps) grid");
    sw_cmd->add_option("--field", field_file)->required();
    sw_cmd->add_option("--path", path_file)->required();
    sw_cmd->add_option("--z-grid", z_grid, "a:b:n uniform or comma list");
    sw_cmd->add_option("--eps-grid", eps_grid);
    sw_cmd->add_option("--regime", regime, "transfer, none, or auto (odd crossing count)")
        ->check(CLI::IsMember({"transfer", "none", "auto"}));
    sw_cmd->add_option("--threads", threads);
    sw_cmd->add_option("--out", out, "output prefix for .csv, .json, .dat")->required();

    double floor = 1e-12;
    auto* fit_cmd = app.add_subcommand("fit", "Log-log rate fit of defects against eps");
    fit_cmd->add_option("--csv", csv_file, "CSV with columns eps,defect (header optional)")->required();
    fit_cmd->add_option("--floor", floor);
    fit_cmd->add_option("--out", out);

    std::string out_dir = ".";
    auto* run_cmd = app.add_subcommand("run", "Full pipeline from a run configuration");
    run_cmd->add_option("--config", config)->required();
    run_cmd->add_option("--out-dir", out_dir);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*classify_cmd) {
            ControlField f = io::parse_field(io::read_json_file(field_file));
            auto x = io::parse_point(point);
            Classification c = classify_any(f, x, tolerances(rank));
            emit(io::to_json(c), out);
            return 0;
        }
        if (*trace_cmd) {
            ControlField f = io::parse_field(io::read_json_file(field_file));
            TraceOptions to;
            to.step = step;
            to.max_len = max_len;
            LocusCurve L = trace_locus(f, io::parse_point(seed), to);
            L.turning_points = turning_points(f, L);
            json tp = json::array();
            for (const auto& t : L.turning_points)
                tp.push_back({{"point", t.point}, {"zdd", t.zdd}, {"degenerate", t.degenerate},
                              {"verdict", to_string(t.marker.verdict)}});
            json meta = {{"turning_points", tp},
                         {"closed", L.closed},
                         {"stop_reason", L.stop_reason},
                         {"double_points", detect_self_intersections(L).size()}};
            emit_text(io::curve_csv(L), out);
            if (!out.empty()) io::write_text(out + ".turning.json", meta.dump(2) + "\n");
            else std::cout << meta.dump(2) << '\n';
            return 0;
        }
        if (*nf_cmd) {
            ControlField f = io::parse_field(io::read_json_file(field_file));
            auto x = io::parse_point(point);
            int n = steps.find('2') != std::string::npos ? 2 : 1;
            NormalFormReport r = reduce_to_condition(f, x, n);
            json cl = json::array();
            for (const auto& c : r.condition.clauses) cl.push_back({{"name", c.name}, {"value", c.value}, {"pass", c.pass}});
            json j = {{"transform", {{"theta", r.theta}, {"rotation", r.rotation}}},
                      {"field", io::to_json(r.field, true)},
                      {"jet", jet_json(jet2(r.field, r.field.to_point(x)))},
                      {"condition", {{"clauses", cl}, {"pass", r.condition.pass}}},
                      {"v2_sign", r.v2}};
            if (f.arity() == 3) j["invariants"] = {{"beta", r.beta}, {"m0", r.m0}, {"small_m", r.small_m}};
            emit(j, out);
            return r.condition.pass ? 0 : 1;
        }
        if (*br_cmd) {
            ControlField f = io::parse_field(io::read_json_file(field_file));
            ControlPath p = io::parse_path(io::read_json_file(path_file));
            EigenBranches B = track_branches(f, p, opt_z(f, zopt), grid);
            emit_text(io::branches_csv(B), out);
            for (const auto& w : B.warnings) std::cerr << "warning: " << w << '\n';
            return 0;
        }
        if (*pr_cmd) {
            ControlField f = io::parse_field(io::read_json_file(field_file));
            ControlPath p = io::parse_path(io::read_json_file(path_file));
            auto z = opt_z(f, zopt);
            EigenBranches B = track_branches(f, p, z, grid);
            PropagateOptions po;
            po.theta_max = theta_max;
            po.scheme = scheme == "magnus4" ? Scheme::magnus4 : Scheme::midpoint;
            State2 psi0 = real_state(B.phi0.front());
            PropagationResult r = frame == "rotating" ? propagate_with_frame(f, p, z, eps, psi0, B, po)
                                                      : propagate(f, p, z, eps, psi0, po);
            auto cj = [](cplx c) { return json::array({c.real(), c.imag()}); };
            json j = {{"eps", eps},
                      {"psi", {cj(r.psi(0)), cj(r.psi(1))}},
                      {"steps", r.steps},
                      {"norm_drift", r.norm_drift},
                      {"overlap_tracked", transition_probability(r.psi, B.phi0.back())},
                      {"overlap_other", transition_probability(r.psi, B.phi1.back())},
                      {"crossings", B.crossing_times}};
            if (r.rotating) j["rotating"] = {cj((*r.rotating)(0)), cj((*r.rotating)(1))};
            emit(j, out);
            return 0;
        }
        if (*osc_cmd) {
            PhaseProfile p = io::parse_profile(io::read_json_file(profile_file));
            VdcFit v = vdc_exponent(p, k, io::parse_grid(eps_grid, true));
            json j = {{"k", k},
                      {"slope", v.slope},
                      {"constant", v.constant},
                      {"eps", v.eps},
                      {"sup", v.sup},
                      {"rescale", v.certificate.rescale},
                      {"certified", v.certificate.pass}};
            emit(j, out);
            return 0;
        }
        if (*sw_cmd) {
            ControlField f = io::parse_field(io::read_json_file(field_file));
            ControlPath p = io::parse_path(io::read_json_file(path_file));
            if (f.arity() != 3) throw std::invalid_argument("sweep needs a family field");
            SweepSpec s;
            s.field = f;
            s.path = p;
            s.z_grid = io::parse_grid(z_grid, false);
            s.eps_grid = io::parse_grid(eps_grid, true);
            s.threads = threads;
            s.initial = [f, p](double z) { return one_sided_eigenpair(f, p, z, 0.0, +1, -1).phi; };
            s.target = [f, p](double z) { return one_sided_eigenpair(f, p, z, 1.0, -1, +1).phi; };
            if (regime == "auto")
                s.regime = [f, p](double z) { return static_cast<int>(track_branches(f, p, z, 4000).crossing_times.size() % 2); };
            else {
                int r = regime == "transfer" ? 1 : 0;
                s.regime = [r](double) { return r; };
            }
            s.metadata["field"] = io::to_json(f).dump();
            s.metadata["path"] = io::to_json(p).dump();
            TransferResult res = ensemble_sweep(s);
            io::write_text(out + ".csv", transfer_csv(res));
            io::write_text(out + ".dat", transfer_dat(res));
            io::write_text(out + ".json", io::to_json(res).dump(2) + "\n");
            return res.all_ok() ? 0 : 1;
        }
        if (*fit_cmd) {
            std::ifstream in(csv_file);
            if (!in) throw std::runtime_error("cannot open " + csv_file);
            std::vector<double> e, d;
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                std::stringstream ss(line);
                std::string a, b;
                std::getline(ss, a, ',');
                std::getline(ss, b, ',');
                try {
                    double x = std::stod(a), y = std::stod(b);
                    e.push_back(x);
                    d.push_back(y);
                } catch (const std::invalid_argument&) {
                    if (!e.empty()) throw std::runtime_error("non-numeric row: " + line);
                }
            }
            try {
                RateFit r = fit_rate(e, d, floor);
                emit(io::to_json(r), out);
                return 0;
            } catch (const std::domain_error& ex) {
                emit({{"error", ex.what()}, {"flagged", true}}, out);
                return 1;
            }
        }
        if (*run_cmd) {
            json cfg = io::read_json_file(config);
            RunOutcome o = run_config(cfg);
            std::filesystem::create_directories(out_dir);
            std::string prefix = (std::filesystem::path(out_dir) / cfg.value("output", "run")).string();
            io::write_text(prefix + ".csv", transfer_csv(o.result));
            io::write_text(prefix + ".dat", transfer_dat(o.result));
            io::write_text(prefix + ".json", summary_json(o).dump(2) + "\n");
            for (const auto& c : o.clauses)
                std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
            std::cout << "run " << o.result.run_id << (o.all_pass() ? " passed" : " failed") << '\n';
            return o.all_pass() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
