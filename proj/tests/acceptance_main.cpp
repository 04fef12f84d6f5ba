// Acceptance suite: each criterion runs at its stated tolerance and prints one
// pass/fail line; the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fkd/config.hpp"

using namespace fkd;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

struct Criterion {
    int id;
    std::string summary;
    double budget_seconds;
};

void report(const Criterion& c, bool pass, double seconds, const std::string& detail) {
    bool in_budget = seconds < c.budget_seconds;
    bool ok = pass && in_budget;
    if (!ok) ++g_failures;
    std::printf("[%s] criterion %d: %s (%.1fs/%.0fs budget)%s%s\n", ok ? "PASS" : "FAIL", c.id,
                c.summary.c_str(), seconds, c.budget_seconds,
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
}

void run(const Criterion& c, const std::function<bool(std::string&)>& body) {
    auto t0 = clock_type::now();
    std::string detail;
    bool pass = false;
    try {
        pass = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
    report(c, pass, secs, detail);
}

std::string fixture(const std::string& name) {
    return std::string(FKD_FIXTURE_DIR) + "/" + name;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

DiffusionModel driftless_unit() {
    DiffusionModel m;
    m.d = 1;
    m.m = 1;
    m.beta = 1.0;
    m.drift_d = Coeff1D::zero();
    m.rho = {1.0};
    m.sigma0 = Coeff1D::constant(1.0);
    m.sigma0_locally_constant = true;
    m.killing = FieldExpr::constant(1.0);
    m.c0 = 1.0;
    m.growth_K = 1.0;
    m.ellipticity_delta = 0.99;
    m.name = "driftless";
    m.d1_reduction = true;
    return m;
}

char fmt_buffer[512];
template <typename... A>
std::string fmt(const char* f, A... a) {
    std::snprintf(fmt_buffer, sizeof(fmt_buffer), f, a...);
    return fmt_buffer;
}

// ---- criterion 1: boundary classification table ---------------------------

bool criterion1(std::string& detail) {
    struct Row {
        std::string name;
        DiffusionModel model;
        BoundaryLabel label;
        Scenario scenario;
        AnalyticCase acase;
    };
    std::vector<Row> rows;
    rows.push_back({"cir 2kt/s2=0.4", make_cir1d({1.0, 0.2, 1.0, 0.05}), BoundaryLabel::Regular,
                    Scenario::B, AnalyticCase::e});
    rows.push_back({"cir 2kt/s2=1.0", make_cir1d({1.0, 0.5, 1.0, 0.05}), BoundaryLabel::Entrance,
                    Scenario::A, AnalyticCase::c});
    rows.push_back({"cir 2kt/s2=2.0", make_cir1d({1.0, 1.0, 1.0, 0.05}), BoundaryLabel::Entrance,
                    Scenario::A, AnalyticCase::b});
    rows.push_back({"cir 2kt/s2=3.0", make_cir1d({1.5, 1.0, 1.0, 0.05}), BoundaryLabel::Entrance,
                    Scenario::A, AnalyticCase::b});
    rows.push_back({"cev beta=0.5", make_cev({0.05, 0.3, 0.5, 0.05}), BoundaryLabel::Regular,
                    Scenario::B, AnalyticCase::d});
    rows.push_back({"cev beta=1.5", make_cev({0.05, 0.3, 1.5, 0.05}), BoundaryLabel::Exit,
                    Scenario::B, AnalyticCase::unmatched});
    rows.push_back({"cev beta=1.8", make_cev({0.05, 0.3, 1.8, 0.05}), BoundaryLabel::Exit,
                    Scenario::B, AnalyticCase::unmatched});
    rows.push_back({"heston case b", make_heston({2.0, 0.09, 0.3, -0.5, 0.05}),
                    BoundaryLabel::Entrance, Scenario::A, AnalyticCase::b});
    rows.push_back({"heston case c", make_heston({0.5, 0.09, 0.3, -0.5, 0.05}),
                    BoundaryLabel::Entrance, Scenario::A, AnalyticCase::c});
    rows.push_back({"heston case e", make_heston({1.0, 0.02, 0.3, -0.5, 0.05}),
                    BoundaryLabel::Regular, Scenario::B, AnalyticCase::e});
    rows.push_back({"driftless beta=1", driftless_unit(), BoundaryLabel::Exit, Scenario::B,
                    AnalyticCase::e});
    rows.push_back({"gbm beta=2", make_gbm1d({0.05, 0.2, 0.05}), BoundaryLabel::NaturalNonAttracting,
                    Scenario::A, AnalyticCase::a});

    int bad = 0;
    for (const auto& row : rows) {
        auto numeric = classify_origin(row.model, 1.0, true);
        auto analytic = classify_analytic(row.model);
        bool ok = numeric.label == row.label && numeric.scenario == row.scenario &&
                  analytic.which == row.acase && analytic.scenario.has_value() &&
                  *analytic.scenario == row.scenario;
        if (!ok) {
            ++bad;
            detail += row.name + ": got " + to_string(numeric.label) + "/" +
                      to_string(numeric.scenario) + "/" + to_string(analytic.which) + "; ";
        }
    }
    if (bad == 0) detail = fmt("12/12 rows agree with the derived verdicts");
    return bad == 0;
}

// ---- criterion 2: hitting-probability oracle -------------------------------

bool criterion2(std::string& detail) {
    std::vector<std::pair<std::string, DiffusionModel>> models;
    models.emplace_back("cir(1,0.2,1)", make_cir1d({1.0, 0.2, 1.0, 0.05}));
    models.emplace_back("cir(2,0.03,0.5)", make_cir1d({2.0, 0.03, 0.5, 0.05}));
    models.emplace_back("cir(0.5,0.1,0.6)", make_cir1d({0.5, 0.1, 0.6, 0.05}));
    models.emplace_back("cev(0.05,0.3,b=0.5)", make_cev({0.05, 0.3, 0.5, 0.05}));
    models.emplace_back("cev(0.02,0.4,b=0.9)", make_cev({0.02, 0.4, 0.9, 0.05}));

    const double a = 0.1, b = 1.0;
    const long n_paths = 100000;
    double worst_pull = 0.0;
    for (const auto& [name, mdl] : models) {
        auto cls = classify_origin(mdl, 1.0);
        if (cls.label != BoundaryLabel::Regular) {
            detail += name + " is not a regular-boundary model; ";
            return false;
        }
        for (double y : {0.3, 0.5, 0.8}) {
            double w = hitting_prob(mdl, a, y, b);
            auto mc = sample_exit_mc(mdl, a, y, b, n_paths, 2e-3,
                                     0x5eedULL + static_cast<std::uint64_t>(1000 * y));
            double pull = std::abs(mc.prob_hit_upper - w) / std::max(mc.prob_stderr, 1e-12);
            worst_pull = std::max(worst_pull, pull);
            if (pull > 3.0) {
                detail += fmt("%s y=%.1f: |%.4f-%.4f| = %.1f se; ", name.c_str(), y,
                              mc.prob_hit_upper, w, pull);
                return false;
            }
        }
    }
    detail = fmt("15 points within 3 se (worst pull %.2f) at 1e5 paths", worst_pull);
    return true;
}

// ---- criterion 3: telescoping identity -------------------------------------

bool criterion3(std::string& detail) {
    ProblemSpec spec;
    spec.kind = ProblemKind::EllipticBvp;
    spec.variant = Variant::Tau;
    spec.f = {FieldExpr::constant(0.05), FieldDomain::Interior, 0.05};
    spec.g = {FieldExpr::constant(1.0), FieldDomain::FullBoundary, 1.0};

    // scenario A: Heston case (b)
    auto hes = make_heston({2.0, 0.09, 0.3, -0.5, 0.05});
    auto dom_a = DomainSpec::make_box({{-2.0, 2.0}, {0.0, 1.0}});
    EstimatorConfig cfg;
    cfg.n_paths = 10000;
    cfg.sim.dt = 0.02;
    cfg.sim.t_max = default_elliptic_horizon(hes);
    cfg.sim.seed = 20240521;
    std::vector<double> xa{0.0, 0.25};
    auto ea = estimate_elliptic(hes, dom_a, spec, xa, cfg);

    // scenario B: regular-boundary CIR
    auto cir = make_cir1d({1.0, 0.02, 0.3, 0.05});
    auto dom_b = DomainSpec::make_box({{0.0, 1.0}});
    EstimatorConfig cfgb = cfg;
    cfgb.sim.dt = 0.01;
    std::vector<double> xb{0.3};
    auto eb = estimate_elliptic(cir, dom_b, spec, xb, cfgb);

    bool ok = std::abs(ea.mean - 1.0) <= 3.0 * ea.std_error + 1e-6 && ea.std_error < 1e-3 &&
              std::abs(eb.mean - 1.0) <= 3.0 * eb.std_error + 1e-6 && eb.std_error < 1e-3;
    detail = fmt("A: %.8f (se %.1e), B: %.8f (se %.1e)", ea.mean, ea.std_error, eb.mean,
                 eb.std_error);
    return ok;
}

// ---- criterion 4: closed-form parabolic ------------------------------------

bool criterion4(std::string& detail) {
    auto cfg = parse_config_text(slurp(fixture("price_cir_mean.json")));
    auto u_exact = [](double x) {
        return std::exp(-0.05) * (0.09 + (x - 0.09) * std::exp(-2.0));
    };

    auto ec = [&] {
        EstimatorConfig e;
        e.sim = cfg.sim;
        e.n_paths = cfg.n_paths;
        return e;
    }();

    GridSpec gs;
    gs.nodes_per_axis = cfg.oracle_nodes;
    gs.grading_ratio_max = cfg.grading_ratio;
    gs.first_cell_frac = cfg.first_cell_frac;
    gs.truncation_hi = cfg.truncation_hi;
    auto grid = build_grid(cfg.domain, gs);
    auto sol = solve_parabolic(cfg.model, cfg.domain, cfg.problem, grid, cfg.solver);

    bool ok = true;
    for (double xq : {0.04, 0.09, 0.25}) {
        std::vector<double> x{xq};
        auto est = estimate_parabolic(cfg.model, cfg.domain, cfg.problem, 0.0, x, ec);
        double scale = std::abs(u_exact(xq));
        double mc_err = std::abs(est.mean - u_exact(xq));
        double mc_tol = std::max(3.0 * est.std_error, 5e-3 * scale);
        double pde_err = std::abs(sol.value_at(0.0, x) - u_exact(xq));
        if (mc_err > mc_tol || pde_err > 1e-4) ok = false;
        detail += fmt("x=%.2f mc %.1e/%.1e pde %.1e; ", xq, mc_err, mc_tol, pde_err);
    }
    return ok;
}

// ---- criterion 5: manufactured elliptic solution ---------------------------

bool criterion5(std::string& detail) {
    auto hes = make_heston({2.0, 0.09, 0.3, 0.0, 0.05});
    auto dom = DomainSpec::make_box({{-2.0, 2.0}, {0.0, 1.0}});
    ProblemSpec spec;
    spec.kind = ProblemKind::EllipticBvp;
    spec.f = {FieldExpr::sum({FieldExpr::constant(0.05), FieldExpr::power(1, -0.45, 1.0),
                              FieldExpr::power(1, 4.05, 2.0)}),
              FieldDomain::Interior, 0.0};
    spec.g = {FieldExpr::sum({FieldExpr::constant(1.0), FieldExpr::power(1, 1.0, 2.0)}),
              FieldDomain::FullBoundary, 0.0};
    double pts[5][2] = {{0.0, 0.25}, {1.0, 0.09}, {-1.0, 0.5}, {0.5, 0.36}, {-0.5, 0.04}};

    EstimatorConfig cfg;
    cfg.n_paths = 10000;
    cfg.sim.dt = 0.01;
    cfg.sim.t_max = default_elliptic_horizon(hes);
    cfg.sim.seed = 90125;

    const double C_dt = 0.6; // frozen dt-refinement constant
    const double C_h = 0.12; // frozen grid-refinement constant
    bool ok = true;

    for (auto& p : pts) {
        std::vector<double> x{p[0], p[1]};
        double exact = 1.0 + p[1] * p[1];
        auto est = estimate_elliptic(hes, dom, spec, x, cfg);
        double tol = 3.0 * est.std_error + C_dt * cfg.sim.dt + est.truncation_bias_bound;
        double err = std::abs(est.mean - exact);
        if (err > tol) {
            ok = false;
            detail += fmt("mc (%.1f,%.2f) err %.1e > %.1e; ", p[0], p[1], err, tol);
        }
    }

    auto pde_err = [&](int n1, int n2, double& h) {
        auto grid = build_grid(dom, {{n1, n2}, 1.15, 1e-3});
        auto sol = solve_elliptic(hes, dom, spec, grid);
        h = grid.max_cell();
        double worst = 0.0;
        for (auto& p : pts) {
            std::vector<double> x{p[0], p[1]};
            worst = std::max(worst, std::abs(sol.value_at(x) - (1.0 + p[1] * p[1])));
        }
        return worst;
    };
    double h_c, h_f;
    double err_c = pde_err(41, 31, h_c);
    double err_f = pde_err(81, 61, h_f);
    if (!(err_c <= C_h * h_c && err_f <= C_h * h_f && err_f <= 0.8 * err_c)) {
        ok = false;
        detail += fmt("pde errs %.1e@h=%.3f, %.1e@h=%.3f; ", err_c, h_c, err_f, h_f);
    }
    if (ok) detail = fmt("5 MC points in tolerance; pde %.1e -> %.1e under refinement", err_c, err_f);
    return ok;
}

// ---- criterion 6: obstacle sandwich -----------------------------------------

bool criterion6(std::string& detail) {
    auto cfg = parse_config_text(slurp(fixture("exercise_american_put.json")));
    std::vector<double> x{1.0};

    GridSpec gs;
    gs.nodes_per_axis = cfg.oracle_nodes;
    gs.grading_ratio_max = cfg.grading_ratio;
    auto grid = build_grid(cfg.domain, gs);
    auto sol = solve_obstacle(cfg.model, cfg.domain, cfg.problem, grid, cfg.solver);
    double psor = sol.value_at(0.0, x);

    LsmcConfig lc;
    lc.est.sim = cfg.sim;
    lc.est.n_paths = cfg.n_paths;
    lc.n_train = cfg.n_train;
    lc.n_slabs = cfg.n_slabs;
    auto res = lsmc_value(cfg.model, cfg.domain, cfg.problem, 0.0, x, lc);

    auto region = policy_from_pde(std::make_shared<PdeSolution>(sol), *cfg.problem.psi);
    EstimatorConfig ec;
    ec.sim = cfg.sim;
    ec.sim.seed = cfg.sim.seed ^ 0x77ull;
    ec.n_paths = 30000;
    auto jv = evaluate_policy(cfg.model, cfg.domain, cfg.problem, 0.0, x, region, ec);

    const double tol_upper = 0.0035; // frozen PSOR discretization allowance
    double lo = psor - std::max(0.005, 3.0 * res.estimate.std_error);
    double hi = psor + tol_upper + 3.0 * res.estimate.std_error;
    bool ok = res.estimate.mean >= lo && res.estimate.mean <= hi &&
              sol.complementarity_residual <= 1e-8;
    double jlo = psor - std::max(0.005, 3.0 * jv.std_error);
    double jhi = psor + tol_upper + 3.0 * jv.std_error;
    ok = ok && jv.mean >= jlo && jv.mean <= jhi;
    detail = fmt("psor %.6f, lsmc %.6f (se %.1e), policy-J %.6f (se %.1e)", psor,
                 res.estimate.mean, res.estimate.std_error, jv.mean, jv.std_error);
    return ok;
}

// ---- criterion 7: scenario-A invariants -------------------------------------

bool criterion7(std::string& detail) {
    auto hes = make_heston({2.0, 0.09, 0.3, -0.5, 0.05});
    auto dom = DomainSpec::make_box({{-2.0, 2.0}, {0.0, 2.0}});
    ProblemSpec spec;
    spec.kind = ProblemKind::EllipticBvp;
    spec.variant = Variant::Tau;
    spec.f = {FieldExpr::constant(0.05), FieldDomain::Interior, 0.05};
    spec.g = {FieldExpr::constant(1.0), FieldDomain::Gamma1, 1.0};

    EstimatorConfig cfg;
    cfg.n_paths = 10000;
    cfg.sim.dt = 0.002;
    cfg.sim.t_max = 10.0;
    cfg.sim.boundary_tol = 1e-10;
    cfg.sim.seed = 1337;
    std::vector<double> x{0.0, 0.09};

    auto tau = estimate_elliptic(hes, dom, spec, x, cfg);
    spec.variant = Variant::Lambda;
    auto lam = estimate_elliptic(hes, dom, spec, x, cfg);

    bool no_touches = tau.diagnostics.gamma0_touch_rate == 0.0 &&
                      lam.diagnostics.gamma0_touch_rate == 0.0;
    double combined = std::sqrt(tau.std_error * tau.std_error + lam.std_error * lam.std_error);
    bool agree = std::abs(tau.mean - lam.mean) <= 2.0 * combined + 1e-12;
    detail = fmt("touch rates %.1e/%.1e, tau %.6f vs lambda %.6f",
                 tau.diagnostics.gamma0_touch_rate, lam.diagnostics.gamma0_touch_rate, tau.mean,
                 lam.mean);
    return no_touches && agree;
}

// ---- criterion 8: supermartingale diagnostic --------------------------------

bool criterion8(std::string& detail) {
    struct Preset {
        std::string name;
        DiffusionModel model;
        std::vector<double> x0;
    };
    std::vector<Preset> presets;
    presets.push_back({"cir1d", make_cir1d({0.2, 0.5, 0.5, 1.0}), {0.5}});
    presets.push_back({"gbm1d", make_gbm1d({0.05, 0.2, 1.0}), {1.0}});

    bool ok = true;
    for (auto& p : presets) {
        auto sup = compute_M(p.model, DomainSpec::make_box({{0.0, 8.0}}), 65);
        const std::vector<double> times{0.0, 0.25, 0.5, 1.0};
        auto dom = DomainSpec::half_space(p.model.d);
        SimConfig sim;
        sim.dt = 0.005;
        sim.t_max = 1.0;
        sim.seed = 777;

        const long n = 20000;
        std::vector<std::vector<double>> z(times.size(), std::vector<double>(n));
        for (long path = 0; path < n; ++path) {
            PathNoise noise(sim.seed, static_cast<std::uint64_t>(path));
            struct Sampler {
                const std::vector<double>* times;
                std::size_t next = 1;
                std::vector<double> vals;
                double M_over_c0;
                double c0;
                bool segment(double, std::span<const double>, double, double t1,
                             std::span<const double> x1, double D1, bool) {
                    while (next < times->size() && (*times)[next] <= t1 + 1e-9) {
                        double nx2 = 0.0;
                        for (double v : x1) nx2 += v * v;
                        vals.push_back(std::exp(-D1) * nx2 +
                                       M_over_c0 * std::exp(-c0 * (*times)[next]));
                        ++next;
                    }
                    return true;
                }
            } obs{&times, 1, {}, sup.M / p.model.c0, p.model.c0};
            double nx0 = 0.0;
            for (double v : p.x0) nx0 += v * v;
            z[0][static_cast<std::size_t>(path)] = nx0 + sup.M / p.model.c0;
            walk_path(p.model, dom, p.x0, 0.0, sim, noise, false, obs,
                      Gamma0Policy::DiagnosticOnly);
            for (std::size_t k = 1; k < times.size(); ++k)
                z[k][static_cast<std::size_t>(path)] =
                    k - 1 < obs.vals.size() ? obs.vals[k - 1] : obs.vals.back();
        }

        for (std::size_t k = 1; k < times.size(); ++k) {
            // paired differences: E[Z_{t_k}] - E[Z_{t_{k-1}}] <= 3 se
            BatchAccumulator acc;
            for (long i = 0; i < n; ++i)
                acc.add(z[k][static_cast<std::size_t>(i)] - z[k - 1][static_cast<std::size_t>(i)]);
            if (acc.mean > 3.0 * acc.std_error()) {
                ok = false;
                detail += fmt("%s: E[Z] rose by %.2e (se %.1e) at t=%.2f; ", p.name.c_str(),
                              acc.mean, acc.std_error(), times[k]);
            }
        }
        detail += fmt("%s M=%.3f (p=%.3f); ", p.name.c_str(), sup.M, sup.p);
    }
    return ok;
}

// ---- criterion 9: reproducibility -------------------------------------------

bool criterion9(std::string& detail) {
    struct Fixture {
        std::string file;
        std::string subcommand;
        std::vector<std::string> overrides;
    };
    // criteria 3-7 surfaces at reduced path counts; identity must be exact
    std::vector<Fixture> fixtures{
        {"price_telescoping_heston.json", "price", {"sim.n_paths=2000", "sim.dt=0.05"}},
        {"price_cir_mean.json", "price", {"sim.n_paths=5000", "sim.dt=0.005"}},
        {"compare_heston_manufactured.json", "compare",
         {"sim.n_paths=1000", "sim.dt=0.02", "oracle.nodes=[41,31]"}},
        {"exercise_american_put.json", "exercise",
         {"sim.n_paths=4000", "sim.n_train=4000", "sim.n_slabs=25", "sim.dt=0.02"}},
        {"price_telescoping_heston.json", "price",
         {"sim.n_paths=2000", "sim.dt=0.05", "problem.variant=\"lambda\"",
          "problem.g.on=\"gamma1\""}},
    };
    for (const auto& f : fixtures) {
        auto once = [&]() {
            std::ostringstream out, err;
            int rc = run_subcommand(f.subcommand, fixture(f.file), f.overrides, out, err);
            if (rc != 0) fail(ErrorCategory::EvaluationFailure, "subcommand failed: " + err.str());
            return strip_timestamp(out.str());
        };
        auto a = once();
        auto b = once();
        if (a != b) {
            detail += f.file + " differs between identical runs; ";
            return false;
        }
    }
    detail = fmt("%zu fixture reports byte-identical across reruns", fixtures.size());
    return true;
}

} // namespace

int main() {
    std::printf("acceptance suite\n");
    run({1, "boundary classification table (12 rows)", 10}, criterion1);
    run({2, "hitting-probability oracle vs MC (5 models x 3 points)", 120}, criterion2);
    run({3, "telescoping identity (scenario A and B)", 60}, criterion3);
    run({4, "closed-form CIR parabolic (MC + PDE)", 180}, criterion4);
    run({5, "manufactured Heston elliptic (MC + PDE)", 300}, criterion5);
    run({6, "American put obstacle sandwich", 300}, criterion6);
    run({7, "scenario-A invariants (no Gamma0 touches, tau = lambda)", 120}, criterion7);
    run({8, "supermartingale diagnostic", 120}, criterion8);
    run({9, "reproducibility of criteria 3-7 reports", 600}, criterion9);

    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
}
