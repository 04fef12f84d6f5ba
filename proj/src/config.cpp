#include "fkd/config.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace fkd {

using ojson = nlohmann::ordered_json;

namespace {

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double interval_bound(const ojson& j) {
    if (j.is_null()) return kInf;
    return j.get<double>();
}

Coeff1D parse_coeff1d(const ojson& j) {
    if (j.contains("constant")) return Coeff1D::constant(j["constant"].get<double>());
    if (j.contains("affine")) {
        auto a = j["affine"];
        return Coeff1D::affine(a.at(0).get<double>(), a.at(1).get<double>());
    }
    if (j.contains("terms")) {
        std::vector<Coeff1D::Term> terms;
        for (const auto& t : j["terms"])
            terms.push_back({t.at("coeff").get<double>(), t.at("exponent").get<double>()});
        return Coeff1D(std::move(terms));
    }
    fail(ErrorCategory::ConfigParse, "coefficient needs 'constant', 'affine' or 'terms'");
}

FieldExpr parse_field_expr(const ojson& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return FieldExpr::constant(j.at("value").get<double>());
    if (kind == "linear") {
        std::vector<double> coeffs = j.value("coeffs", std::vector<double>{});
        return FieldExpr::linear(j.value("intercept", 0.0), std::move(coeffs));
    }
    if (kind == "power")
        return FieldExpr::power(j.value("coord", 0), j.at("coeff").get<double>(),
                                j.at("exponent").get<double>());
    if (kind == "sum" || kind == "product") {
        std::vector<FieldExpr> kids;
        for (const auto& c : j.at(kind == "sum" ? "terms" : "factors"))
            kids.push_back(parse_field_expr(c));
        return kind == "sum" ? FieldExpr::sum(std::move(kids))
                             : FieldExpr::product(std::move(kids));
    }
    if (kind == "put_payoff")
        return FieldExpr::put_payoff(j.value("coord", 0), j.at("strike").get<double>());
    if (kind == "call_payoff")
        return FieldExpr::call_payoff(j.value("coord", 0), j.at("strike").get<double>());
    if (kind == "time_discounted")
        return FieldExpr::time_discounted(j.at("rate").get<double>(),
                                          j.at("horizon").get<double>(),
                                          parse_field_expr(j.at("inner")));
    fail(ErrorCategory::ConfigParse, "unknown field kind '" + kind + "'");
}

FieldDomain parse_field_domain(const std::string& s) {
    if (s == "interior") return FieldDomain::Interior;
    if (s == "gamma1") return FieldDomain::Gamma1;
    if (s == "boundary") return FieldDomain::FullBoundary;
    if (s == "parabolic_partial") return FieldDomain::ParabolicPartial;
    if (s == "parabolic_full") return FieldDomain::ParabolicFull;
    fail(ErrorCategory::ConfigParse, "unknown field domain tag '" + s + "'");
}

ScalarField parse_scalar_field(const ojson& j, FieldDomain dflt) {
    ScalarField f;
    f.expr = parse_field_expr(j);
    f.domain = j.contains("on") ? parse_field_domain(j["on"].get<std::string>()) : dflt;
    f.growth_K = j.value("growth_K", 0.0);
    return f;
}

DiffusionModel parse_custom_model(const ojson& j) {
    DiffusionModel m;
    m.d = j.at("d").get<int>();
    m.m = j.at("m").get<int>();
    m.beta = j.at("beta").get<double>();
    m.drift_d = parse_coeff1d(j.at("drift_d"));
    m.sigma0 = parse_coeff1d(j.at("sigma0"));
    m.rho = j.at("rho").get<std::vector<double>>();
    for (int i = 0; i < m.d - 1; ++i)
        m.drift_head.push_back(parse_field_expr(j.at("drift_head").at(i)));
    for (int i = 0; i < m.d - 1; ++i) {
        std::vector<FieldExpr> row;
        for (int k = 0; k < m.m; ++k) row.push_back(parse_field_expr(j.at("vol_head").at(i).at(k)));
        m.vol_head.push_back(std::move(row));
    }
    m.killing = parse_field_expr(j.at("killing"));
    m.c0 = j.at("c0").get<double>();
    m.growth_K = j.at("growth_K").get<double>();
    m.ellipticity_delta = j.at("ellipticity_delta").get<double>();
    m.sigma0_locally_constant = j.value("sigma0_locally_constant", false);
    if (j.contains("holder")) {
        const auto& h = j["holder"];
        m.holder = HolderData{h.value("gamma", 1.0), h.value("L", 0.0), h.value("kappa", 0.5)};
    }
    m.name = j.value("name", std::string("custom"));
    m.d1_reduction = m.d == 1;
    return m;
}

ProblemKind parse_kind(const std::string& s) {
    if (s == "elliptic_bvp") return ProblemKind::EllipticBvp;
    if (s == "parabolic_bvp") return ProblemKind::ParabolicBvp;
    if (s == "elliptic_obstacle") return ProblemKind::EllipticObstacle;
    if (s == "parabolic_obstacle") return ProblemKind::ParabolicObstacle;
    fail(ErrorCategory::ConfigParse, "unknown problem kind '" + s + "'");
}

void apply_override(ojson& root, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        fail(ErrorCategory::ConfigParse, "override must look like path.to.key=value");
    std::string path = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);

    ojson* node = &root;
    std::size_t pos = 0;
    while (true) {
        auto dot = path.find('.', pos);
        std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (dot == std::string::npos) {
            ojson parsed = ojson::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? ojson(value) : parsed;
            return;
        }
        node = &(*node)[key];
        pos = dot + 1;
    }
}

std::string timestamp_utc() {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

ojson extended_real_json(const std::optional<ExtendedReal>& e) {
    if (!e) return nullptr;
    ojson j;
    j["kind"] = e->finite() ? "finite" : (e->divergent() ? "divergent" : "inconclusive");
    if (e->finite()) {
        j["value"] = e->value;
        j["error_bound"] = e->error_bound;
    }
    j["evidence"] = e->partials;
    return j;
}

ojson estimate_json(const Estimate& e, const SimConfig& sim) {
    ojson j;
    j["mean"] = e.mean;
    j["stderr"] = e.std_error;
    j["ci95"] = {e.ci95_lo, e.ci95_hi};
    j["truncation_bias_bound"] = e.truncation_bias_bound;
    j["n_paths"] = e.n_paths;
    j["dt"] = sim.dt;
    j["diagnostics"] = {{"gamma0_touch_rate", e.diagnostics.gamma0_touch_rate},
                        {"horizon_censor_rate", e.diagnostics.horizon_censor_rate}};
    return j;
}

EstimatorConfig estimator_config(const RunConfig& cfg) {
    EstimatorConfig ec;
    ec.sim = cfg.sim;
    ec.n_paths = cfg.n_paths;
    ec.threads = cfg.threads;
    return ec;
}

Grid oracle_grid(const RunConfig& cfg) {
    GridSpec gs;
    gs.nodes_per_axis = cfg.oracle_nodes;
    if (gs.nodes_per_axis.empty())
        gs.nodes_per_axis.assign(static_cast<std::size_t>(cfg.model.d), cfg.model.d == 1 ? 201 : 61);
    gs.grading_ratio_max = cfg.grading_ratio;
    gs.first_cell_frac = cfg.first_cell_frac;
    gs.truncation_hi = cfg.truncation_hi;
    gs.truncation_lo = cfg.truncation_lo;
    return build_grid(cfg.domain, gs);
}

void write_text(const std::string& dir, const std::string& name, const std::string& text) {
    std::filesystem::create_directories(dir.empty() ? "." : dir);
    std::ofstream out((dir.empty() ? "." : dir) + "/" + name);
    out << text;
}

} // namespace

RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides) {
    ojson j = ojson::parse(text, nullptr, false);
    if (j.is_discarded()) fail(ErrorCategory::ConfigParse, "config is not valid JSON");
    for (const auto& ov : overrides) apply_override(j, ov);

    RunConfig cfg;
    cfg.raw_json = j.dump(2);

    try {
        // model
        const auto& jm = j.at("model");
        if (jm.contains("preset")) {
            std::vector<std::pair<std::string, double>> params;
            if (jm.contains("params"))
                for (auto it = jm["params"].begin(); it != jm["params"].end(); ++it)
                    params.emplace_back(it.key(), it.value().get<double>());
            cfg.model = preset(jm["preset"].get<std::string>(), params);
        } else if (jm.contains("custom")) {
            cfg.model = parse_custom_model(jm["custom"]);
        } else {
            fail(ErrorCategory::ConfigParse, "model needs 'preset' or 'custom'");
        }
        cfg.probe_b = jm.value("probe_b", 0.0);

        // domain
        if (j.contains("domain") && j["domain"].contains("box")) {
            std::vector<DomainSpec::Interval> box;
            for (const auto& iv : j["domain"]["box"])
                box.push_back({interval_bound(iv.at(0)), interval_bound(iv.at(1))});
            cfg.domain = DomainSpec::make_box(std::move(box));
        } else {
            cfg.domain = default_domain(cfg.model);
        }
        if (cfg.domain.dim() != cfg.model.d)
            fail(ErrorCategory::ConfigParse, "domain dimension does not match the model");

        // problem
        if (j.contains("problem")) {
            cfg.has_problem = true;
            const auto& jp = j["problem"];
            cfg.problem.kind = parse_kind(jp.at("kind").get<std::string>());
            std::string variant = jp.value("variant", std::string("tau"));
            cfg.problem.variant = variant == "lambda" ? Variant::Lambda : Variant::Tau;
            cfg.problem.T = jp.value("T", 1.0);
            bool parab = is_parabolic(cfg.problem.kind);
            FieldDomain g_dflt = parab ? FieldDomain::ParabolicPartial : FieldDomain::Gamma1;
            if (jp.contains("f"))
                cfg.problem.f = parse_scalar_field(jp["f"], FieldDomain::Interior);
            else
                cfg.problem.f = {FieldExpr::constant(0.0), FieldDomain::Interior, 1e-12};
            if (!jp.contains("g")) fail(ErrorCategory::ConfigParse, "problem needs boundary data g");
            cfg.problem.g = parse_scalar_field(jp["g"], g_dflt);
            if (jp.contains("psi"))
                cfg.problem.psi = parse_scalar_field(jp["psi"], FieldDomain::Interior);
            else if (is_obstacle(cfg.problem.kind))
                fail(ErrorCategory::Compatibility, "obstacle problem requires psi");
            if (jp.contains("x")) cfg.query_x = jp["x"].get<std::vector<double>>();
            cfg.query_t = jp.value("t", 0.0);
            if (jp.contains("x_sweep"))
                for (const auto& row : jp["x_sweep"])
                    cfg.x_sweep.push_back(row.get<std::vector<double>>());
        }

        // sim
        if (j.contains("sim")) {
            const auto& js = j["sim"];
            cfg.sim.dt = js.value("dt", cfg.sim.dt);
            if (js.contains("t_max") && !js["t_max"].is_null())
                cfg.sim.t_max = js["t_max"].get<double>();
            else if (!cfg.has_problem || !is_parabolic(cfg.problem.kind))
                cfg.sim.t_max = cfg.model.c0 > 0.0 ? default_elliptic_horizon(cfg.model)
                                                   : cfg.sim.t_max;
            cfg.sim.boundary_tol = js.value("boundary_tol", cfg.sim.boundary_tol);
            cfg.sim.substep_factor = js.value("substep_factor", cfg.sim.substep_factor);
            cfg.sim.seed = js.value("seed", cfg.sim.seed);
            cfg.sim.antithetic = js.value("antithetic", cfg.sim.antithetic);
            cfg.n_paths = js.value("n_paths", cfg.n_paths);
            cfg.n_train = js.value("n_train", cfg.n_train);
            cfg.n_slabs = js.value("n_slabs", cfg.n_slabs);
            cfg.basis_degree = js.value("basis_degree", cfg.basis_degree);
        } else if (cfg.has_problem && !is_parabolic(cfg.problem.kind) && cfg.model.c0 > 0.0) {
            cfg.sim.t_max = default_elliptic_horizon(cfg.model);
        }

        // oracle
        if (j.contains("oracle")) {
            const auto& jo = j["oracle"];
            if (jo.contains("nodes")) cfg.oracle_nodes = jo["nodes"].get<std::vector<int>>();
            cfg.grading_ratio = jo.value("grading_ratio", cfg.grading_ratio);
            cfg.first_cell_frac = jo.value("first_cell_frac", cfg.first_cell_frac);
            if (jo.contains("truncation_hi"))
                cfg.truncation_hi = jo["truncation_hi"].get<std::vector<double>>();
            if (jo.contains("truncation_lo"))
                cfg.truncation_lo = jo["truncation_lo"].get<std::vector<double>>();
            cfg.solver.tol = jo.value("solver_tol", cfg.solver.tol);
            cfg.solver.max_iterations = jo.value("max_iterations", cfg.solver.max_iterations);
            cfg.solver.omega = jo.value("omega", cfg.solver.omega);
            cfg.solver.theta = jo.value("theta", cfg.solver.theta);
            cfg.solver.time_steps = jo.value("time_steps", cfg.solver.time_steps);
            if (jo.contains("far_field"))
                cfg.solver.far_field =
                    parse_scalar_field(jo["far_field"], FieldDomain::FullBoundary);
        }

        // output
        if (j.contains("output")) {
            const auto& jo = j["output"];
            cfg.out_dir = jo.value("dir", std::string());
            cfg.dump_paths = jo.value("dump_paths", 0L);
            cfg.emit_csv = jo.value("csv", false);
        }

        cfg.threads = j.value("threads", 1);
    } catch (const EngineError&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorCategory::ConfigParse, e.what());
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::ConfigParse, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), overrides);
}

std::string strip_timestamp(const std::string& report_json) {
    std::string out;
    std::istringstream in(report_json);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find("\"generated_at\"") != std::string::npos) continue;
        out += line;
        out += '\n';
    }
    return out;
}

std::string run_classify(const RunConfig& cfg) {
    validate_model(cfg.model, default_validation_grid(cfg.model));
    double probe = cfg.probe_b > 0.0 ? cfg.probe_b : default_probe_b(cfg.model, cfg.domain);
    auto cls = classify_origin(cfg.model, probe, true);

    ojson j;
    j["command"] = "classify";
    j["model"] = cfg.model.name;
    j["d1_reduction"] = cfg.model.d1_reduction;
    j["probe_b"] = cls.probe_b;
    j["S"] = extended_real_json(cls.S0b);
    j["M"] = extended_real_json(cls.M0b);
    j["Sigma"] = extended_real_json(cls.Sigma0);
    j["N"] = extended_real_json(cls.N0);
    j["label"] = to_string(cls.label);
    j["scenario"] = to_string(cls.scenario);
    j["analytic_case"] = to_string(cls.analytic_case);
    j["generated_at"] = timestamp_utc();
    return j.dump(2);
}

namespace {

void dump_paths_csv(const RunConfig& cfg) {
    if (cfg.dump_paths <= 0) return;
    std::string csv = "path_id,k,t";
    for (int i = 1; i <= cfg.model.d; ++i) csv += ",x_" + std::to_string(i);
    csv += ",discount,flag\n";
    for (long p = 0; p < cfg.dump_paths; ++p) {
        auto path = simulate_path(cfg.model, cfg.domain, cfg.query_x, cfg.query_t, cfg.sim,
                                  static_cast<std::uint64_t>(p));
        for (std::size_t k = 0; k < path.size(); ++k) {
            csv += std::to_string(p) + "," + std::to_string(k) + "," + fmt17(path.times[k]);
            auto st = path.state(k);
            for (double v : st) csv += "," + fmt17(v);
            csv += "," + fmt17(path.discount[k]);
            std::string flag = "interior";
            if (k + 1 == path.size() && path.lambda_exit)
                flag = to_string(path.lambda_exit->face);
            else if (st[st.size() - 1] <= cfg.sim.boundary_tol)
                flag = "gamma0_touch";
            csv += "," + flag + "\n";
        }
    }
    write_text(cfg.out_dir, "paths.csv", csv);
}

Estimate price_at(const RunConfig& cfg, std::span<const double> x) {
    auto ec = estimator_config(cfg);
    if (cfg.problem.kind == ProblemKind::EllipticBvp)
        return estimate_elliptic(cfg.model, cfg.domain, cfg.problem, x, ec);
    if (cfg.problem.kind == ProblemKind::ParabolicBvp)
        return estimate_parabolic(cfg.model, cfg.domain, cfg.problem, cfg.query_t, x, ec);
    fail(ErrorCategory::ConfigParse, "price handles BVP kinds; use 'exercise' for obstacles");
}

} // namespace

std::string run_price(const RunConfig& cfg) {
    if (!cfg.has_problem) fail(ErrorCategory::ConfigParse, "price needs a problem section");
    if (cfg.query_x.empty()) fail(ErrorCategory::ConfigParse, "price needs problem.x");
    validate_model(cfg.model, default_validation_grid(cfg.model));

    auto est = price_at(cfg, cfg.query_x);

    ojson j;
    j["command"] = "price";
    j["kind"] = to_string(cfg.problem.kind);
    j["variant"] = to_string(cfg.problem.variant);
    j["x"] = cfg.query_x;
    j["t"] = cfg.query_t;
    j.update(estimate_json(est, cfg.sim));
    j["seed"] = cfg.sim.seed;

    if (!cfg.x_sweep.empty() && cfg.emit_csv) {
        std::string csv = "x_1";
        for (int i = 2; i <= cfg.model.d; ++i) csv += ",x_" + std::to_string(i);
        csv += ",mean,stderr\n";
        for (const auto& xq : cfg.x_sweep) {
            auto e = price_at(cfg, xq);
            for (std::size_t i = 0; i < xq.size(); ++i)
                csv += (i ? "," : "") + fmt17(xq[i]);
            csv += "," + fmt17(e.mean) + "," + fmt17(e.std_error) + "\n";
        }
        write_text(cfg.out_dir, "price_sweep.csv", csv);
        j["sweep_csv"] = (cfg.out_dir.empty() ? "." : cfg.out_dir) + "/price_sweep.csv";
    }
    dump_paths_csv(cfg);
    j["generated_at"] = timestamp_utc();
    return j.dump(2);
}

std::string run_exercise(const RunConfig& cfg) {
    if (!cfg.has_problem || !is_obstacle(cfg.problem.kind))
        fail(ErrorCategory::ConfigParse, "exercise needs an obstacle problem");
    if (cfg.query_x.empty()) fail(ErrorCategory::ConfigParse, "exercise needs problem.x");
    validate_model(cfg.model, default_validation_grid(cfg.model));

    LsmcConfig lc;
    lc.est = estimator_config(cfg);
    lc.n_train = cfg.n_train;
    lc.n_slabs = cfg.n_slabs;
    lc.basis_degree = cfg.basis_degree;

    LsmcResult res = cfg.problem.kind == ProblemKind::ParabolicObstacle
                         ? lsmc_value(cfg.model, cfg.domain, cfg.problem, cfg.query_t,
                                      cfg.query_x, lc)
                         : elliptic_obstacle_value(cfg.model, cfg.domain, cfg.problem,
                                                   cfg.query_x, lc);

    ojson j;
    j["command"] = "exercise";
    j["kind"] = to_string(cfg.problem.kind);
    j["x"] = cfg.query_x;
    j["t"] = cfg.query_t;
    j["value_low"] = res.estimate.mean;
    j["value_high"] = res.regression_value;
    j["stderr"] = res.estimate.std_error;
    j["ci95"] = {res.estimate.ci95_lo, res.estimate.ci95_hi};
    j["truncation_bias_bound"] = res.estimate.truncation_bias_bound;
    j["n_paths"] = res.estimate.n_paths;
    j["n_slabs"] = cfg.n_slabs;
    j["warnings"] = res.warnings;

    double x_lo = cfg.domain.box[cfg.model.d - 1].lo;
    double x_hi = std::isfinite(cfg.domain.box[cfg.model.d - 1].hi)
                      ? cfg.domain.box[cfg.model.d - 1].hi
                      : 4.0;
    auto boundary = res.policy.exercise_boundary(x_lo, x_hi);
    ojson poly = ojson::array();
    for (const auto& [tb, xb] : boundary) poly.push_back({tb, xb});
    j["policy"] = {{"kind", "regression"}, {"exercise_boundary", poly}};

    if (cfg.emit_csv && !boundary.empty()) {
        std::string csv = "t,x_boundary\n";
        for (const auto& [tb, xb] : boundary) csv += fmt17(tb) + "," + fmt17(xb) + "\n";
        write_text(cfg.out_dir, "exercise_boundary.csv", csv);
    }
    j["generated_at"] = timestamp_utc();
    return j.dump(2);
}

namespace {

PdeSolution solve_oracle(const RunConfig& cfg, const Grid& grid) {
    if (is_obstacle(cfg.problem.kind))
        return solve_obstacle(cfg.model, cfg.domain, cfg.problem, grid, cfg.solver);
    if (cfg.problem.kind == ProblemKind::ParabolicBvp)
        return solve_parabolic(cfg.model, cfg.domain, cfg.problem, grid, cfg.solver);
    return solve_elliptic(cfg.model, cfg.domain, cfg.problem, grid, cfg.solver);
}

} // namespace

std::string run_oracle(const RunConfig& cfg) {
    if (!cfg.has_problem) fail(ErrorCategory::ConfigParse, "oracle needs a problem section");
    validate_model(cfg.model, default_validation_grid(cfg.model));

    auto grid = oracle_grid(cfg);
    auto sol = solve_oracle(cfg, grid);

    if (cfg.emit_csv) {
        std::string csv;
        for (int i = 1; i <= cfg.model.d; ++i) csv += (i > 1 ? "," : "") + ("x_" + std::to_string(i));
        csv += ",u\n";
        std::vector<int> idx(cfg.model.d);
        std::vector<double> x(cfg.model.d);
        for (long k = 0; k < grid.n_nodes; ++k) {
            grid.unflatten(k, idx);
            grid.point(idx, x);
            for (int i = 0; i < cfg.model.d; ++i) csv += (i ? "," : "") + fmt17(x[i]);
            csv += "," + fmt17(sol.values[static_cast<std::size_t>(k)]) + "\n";
        }
        write_text(cfg.out_dir, "oracle_grid.csv", csv);
    }

    ojson j;
    j["command"] = "oracle";
    j["kind"] = to_string(cfg.problem.kind);
    ojson nodes = ojson::array();
    for (const auto& ax : grid.axes) nodes.push_back(ax.size());
    j["nodes"] = nodes;
    j["residual_norm"] = sol.residual_norm;
    j["complementarity_residual"] = sol.complementarity_residual;
    j["iterations"] = sol.iterations;
    if (!cfg.query_x.empty())
        j["value_at_query"] = is_parabolic(cfg.problem.kind)
                                  ? sol.value_at(cfg.query_t, cfg.query_x)
                                  : sol.value_at(cfg.query_x);
    j["generated_at"] = timestamp_utc();
    return j.dump(2);
}

std::string run_compare(const RunConfig& cfg) {
    if (!cfg.has_problem) fail(ErrorCategory::ConfigParse, "compare needs a problem section");
    if (is_obstacle(cfg.problem.kind))
        fail(ErrorCategory::ConfigParse, "compare handles BVP kinds");
    validate_model(cfg.model, default_validation_grid(cfg.model));

    auto grid = oracle_grid(cfg);
    auto sol = solve_oracle(cfg, grid);

    std::vector<std::vector<double>> points = cfg.x_sweep;
    if (points.empty() && !cfg.query_x.empty()) points.push_back(cfg.query_x);
    if (points.empty()) fail(ErrorCategory::ConfigParse, "compare needs problem.x or x_sweep");

    ojson rows = ojson::array();
    std::string csv = "x_1";
    for (int i = 2; i <= cfg.model.d; ++i) csv += ",x_" + std::to_string(i);
    csv += ",mc,mc_stderr,pde,diff\n";
    double max_diff = 0.0;
    for (const auto& xq : points) {
        auto mc = price_at(cfg, xq);
        double pv = is_parabolic(cfg.problem.kind) ? sol.value_at(cfg.query_t, xq)
                                                   : sol.value_at(xq);
        double diff = mc.mean - pv;
        max_diff = std::max(max_diff, std::abs(diff));
        ojson row;
        row["x"] = xq;
        row["mc"] = mc.mean;
        row["mc_stderr"] = mc.std_error;
        row["pde"] = pv;
        row["diff"] = diff;
        rows.push_back(row);
        for (std::size_t i = 0; i < xq.size(); ++i) csv += (i ? "," : "") + fmt17(xq[i]);
        csv += "," + fmt17(mc.mean) + "," + fmt17(mc.std_error) + "," + fmt17(pv) + "," +
               fmt17(diff) + "\n";
    }
    if (cfg.emit_csv) write_text(cfg.out_dir, "compare.csv", csv);

    ojson j;
    j["command"] = "compare";
    j["kind"] = to_string(cfg.problem.kind);
    j["rows"] = rows;
    j["max_abs_diff"] = max_diff;
    j["pde_residual_norm"] = sol.residual_norm;
    j["generated_at"] = timestamp_utc();
    return j.dump(2);
}

int run_subcommand(const std::string& name, const std::string& config_path,
                   const std::vector<std::string>& overrides, std::ostream& out,
                   std::ostream& err) {
    try {
        auto cfg = parse_config_file(config_path, overrides);
        std::string report;
        if (name == "classify")
            report = run_classify(cfg);
        else if (name == "price")
            report = run_price(cfg);
        else if (name == "exercise")
            report = run_exercise(cfg);
        else if (name == "oracle")
            report = run_oracle(cfg);
        else if (name == "compare")
            report = run_compare(cfg);
        else
            fail(ErrorCategory::ConfigParse, "unknown subcommand '" + name + "'");
        out << report << "\n";
        return 0;
    } catch (const EngineError& e) {
        ojson j;
        j["error"] = {{"category", category_name(e.category())}, {"message", e.what()}};
        err << j.dump(2) << "\n";
        return is_validation_error(e.category()) ? 2 : 3;
    } catch (const std::exception& e) {
        ojson j;
        j["error"] = {{"category", "internal"}, {"message", e.what()}};
        err << j.dump(2) << "\n";
        return 3;
    }
}

} // namespace fkd
