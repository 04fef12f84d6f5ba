#include <doctest.h>

#include <cmath>

#include "fkd/fk_estimate.hpp"
#include "fkd/simulate.hpp"

using namespace fkd;

namespace {

DiffusionModel gbm_style_2d() {
    // beta = 2 toy model with constant reduced volatility, used for the
    // hand-computed stepping check
    DiffusionModel m;
    m.d = 2;
    m.m = 2;
    m.beta = 2.0;
    m.drift_head = {FieldExpr::constant(0.03)};
    m.drift_d = Coeff1D::power(0.1, 1.0);
    m.vol_head = {{FieldExpr::constant(0.8), FieldExpr::constant(-0.6)}};
    m.rho = {0.6, 0.8};
    m.sigma0 = Coeff1D::constant(0.4);
    m.sigma0_locally_constant = true;
    m.killing = FieldExpr::constant(0.05);
    m.c0 = 0.05;
    m.growth_K = 2.0;
    m.ellipticity_delta = 0.05;
    m.name = "toy2d";
    return m;
}

} // namespace

TEST_CASE("one Euler step, hand-computed") {
    auto m = gbm_style_2d();
    std::vector<double> x{1.0, 0.25}, noise{0.1, -0.05}, out(2);
    step(m, x, 0.01, noise, out);
    // x1' = 1 + 0.03*0.01 + 0.25^{1} * (0.8*0.1 - 0.6*(-0.05))
    double x1 = 1.0 + 0.0003 + 0.25 * (0.08 + 0.03);
    // x2' = 0.25 + 0.1*0.25*0.01 + 0.25 * 0.4 * (0.6*0.1 + 0.8*(-0.05))
    double x2 = 0.25 + 0.00025 + 0.25 * 0.4 * (0.06 - 0.04);
    CHECK(out[0] == x1);
    CHECK(out[1] == x2);
}

TEST_CASE("volatility vanishes on the boundary, drift pushes back in") {
    auto hes = make_heston({2.0, 0.09, 0.3, -0.5, 0.05});
    std::vector<double> x{0.3, 0.0}, noise{1.7, -2.4}, out(2);
    step(hes, x, 0.01, noise, out);
    CHECK(out[1] == doctest::Approx(0.18 * 0.01)); // b_d(0) dt, no noise contribution
    CHECK(out[1] >= 0.0);
}

TEST_CASE("full truncation clamps deep negative excursions") {
    auto cir = make_cir1d({1.0, 0.2, 1.0, 0.05});
    std::vector<double> x{1e-6}, noise{-5.0}, out(1);
    step(cir, x, 0.01, noise, out);
    CHECK(out[0] == 0.0);
}

TEST_CASE("positivity of the degenerate coordinate over a million random steps") {
    NormalStream z(7, 0);
    std::vector<double> noise(2), out(2);
    long negative = 0;
    for (const auto& mdl : {make_heston({2.0, 0.09, 0.3, -0.5, 0.05}),
                            make_heston({1.0, 0.02, 0.3, -0.5, 0.05})}) {
        std::vector<double> x{0.0, 0.05};
        for (int i = 0; i < 200000; ++i) {
            noise[0] = 0.1 * z.next();
            noise[1] = 0.1 * z.next();
            step(mdl, x, 0.01, noise, out);
            if (out[1] < 0.0) ++negative;
            x[1] = std::min(out[1], 2.0);
        }
    }
    for (const auto& mdl : {make_cir1d({1.0, 0.05, 1.0, 0.05}), make_cev({0.05, 0.4, 0.5, 0.05}),
                            make_gbm1d({0.05, 0.2, 0.05})}) {
        std::vector<double> x1{0.02}, out1(1), n1(1);
        for (int i = 0; i < 200000; ++i) {
            n1[0] = 0.1 * z.next();
            step(mdl, x1, 0.01, n1, out1);
            if (out1[0] < 0.0) ++negative;
            x1[0] = std::min(out1[0], 3.0);
        }
    }
    CHECK(negative == 0);
}

TEST_CASE("a start on Gamma1 exits immediately") {
    auto hes = make_heston({2.0, 0.09, 0.3, -0.5, 0.05});
    auto dom = DomainSpec::make_box({{-1.0, 1.0}, {0.0, 1.0}});
    SimConfig cfg;
    cfg.t_max = 1.0;
    std::vector<double> x0{1.0, 0.25};
    auto path = simulate_path(hes, dom, x0, 0.0, cfg, 0);
    REQUIRE(path.tau_exit.has_value());
    REQUIRE(path.lambda_exit.has_value());
    CHECK(path.tau_exit->time == 0.0);
    CHECK(path.tau_exit->face == ExitFace::Gamma1);
    CHECK(path.lambda_exit->time == 0.0);
}

TEST_CASE("scenario A paths avoid the degenerate face") {
    auto hes = make_heston({2.0, 0.09, 0.3, -0.5, 0.05});
    auto dom = DomainSpec::make_box({{-2.0, 2.0}, {0.0, 2.0}});
    SimConfig cfg;
    cfg.dt = 0.005;
    cfg.t_max = 1.0;
    cfg.seed = 21;
    std::vector<double> x0{0.0, 0.09};
    long touches = 0;
    for (long p = 0; p < 2000; ++p) {
        auto path = simulate_path(hes, dom, x0, 0.0, cfg, static_cast<std::uint64_t>(p));
        touches += path.gamma0_touches;
        // tau <= lambda pathwise
        if (path.tau_exit && path.lambda_exit)
            CHECK(path.tau_exit->time <= path.lambda_exit->time + 1e-12);
    }
    CHECK(touches == 0);
}

TEST_CASE("regular-boundary CIR reaches Gamma0 and more often from nearer starts") {
    auto cir = make_cir1d({1.0, 0.02, 0.6, 0.05}); // 2kt/s^2 = 0.11: strongly regular
    auto dom = DomainSpec::make_box({{0.0, 2.0}});
    SimConfig cfg;
    cfg.dt = 0.002;
    cfg.t_max = 1.0;
    cfg.seed = 5;
    auto touch_fraction = [&](double start) {
        long hit = 0;
        const long n = 1500;
        std::vector<double> x0{start};
        for (long p = 0; p < n; ++p) {
            auto path = simulate_path(cir, dom, x0, 0.0, cfg, static_cast<std::uint64_t>(p));
            if (path.tau_exit && path.tau_exit->face == ExitFace::Gamma0) ++hit;
        }
        return static_cast<double>(hit) / n;
    };
    double far = touch_fraction(0.05);
    double near = touch_fraction(0.01);
    CHECK(near > 0.0);
    CHECK(near > far);
}

TEST_CASE("weak order sanity for the CIR mean") {
    auto cir = make_cir1d({2.0, 0.09, 0.3, 0.05});
    auto dom = DomainSpec::make_box({{0.0, kInf}});
    double x0 = 0.04, T = 1.0;
    double exact = 0.09 + (x0 - 0.09) * std::exp(-2.0 * T);

    auto mean_at = [&](double dt, double& se) {
        SimConfig cfg;
        cfg.dt = dt;
        cfg.t_max = T;
        cfg.seed = 31;
        std::vector<double> xs{x0};
        BatchAccumulator acc;
        for (long p = 0; p < 20000; ++p) {
            PathNoise noise(cfg.seed, static_cast<std::uint64_t>(p));
            struct Last {
                double xd = 0.0;
                bool segment(double, std::span<const double>, double, double,
                             std::span<const double> x1, double, bool) {
                    xd = x1[x1.size() - 1];
                    return true;
                }
            } obs;
            walk_path(cir, dom, xs, 0.0, cfg, noise, false, obs);
            acc.add(obs.xd);
        }
        se = acc.std_error();
        return acc.mean;
    };

    double se1, se2;
    double err1 = std::abs(mean_at(1e-2, se1) - exact);
    double err2 = std::abs(mean_at(5e-3, se2) - exact);
    const double C = 0.6; // frozen from the refinement ladder
    CHECK(err1 <= C * 1e-2 + 3.0 * se1);
    CHECK(err2 <= C * 5e-3 + 3.0 * se2);
    CHECK(err2 <= err1 + 3.0 * (se1 + se2));
}

TEST_CASE("discount weight") {
    auto cir = make_cir1d({2.0, 0.09, 0.3, 0.05});
    auto dom = DomainSpec::make_box({{0.0, kInf}});
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.t_max = 1.0;
    cfg.seed = 3;
    std::vector<double> x0{0.09};
    auto path = simulate_path(cir, dom, x0, 0.0, cfg, 0);

    // constant killing: the trapezoid is exact
    CHECK(discount_weight(path, 0.0) == doctest::Approx(1.0));
    CHECK(discount_weight(path, 0.435) == doctest::Approx(std::exp(-0.05 * 0.435)).epsilon(1e-12));
    CHECK(discount_weight(path, 1.0) == doctest::Approx(std::exp(-0.05)).epsilon(1e-12));
    CHECK_THROWS_AS(discount_weight(path, 2.0), EngineError);
}

TEST_CASE("state-dependent discount along the deterministic flow") {
    // c(x) = c0 (1 + x_d) integrated along the noise-free CIR flow
    double kappa = 1.2, theta = 0.3, c0 = 0.5, x0 = 0.05, s = 0.8;
    auto cir = make_cir1d({kappa, theta, 0.4, c0});
    cir.killing = FieldExpr::linear(c0, {c0});

    auto flow_integral = [&](double t) {
        // int_0^t c0 (1 + theta + (x0-theta) e^{-kappa u}) du
        return c0 * ((1.0 + theta) * t + (x0 - theta) * (1.0 - std::exp(-kappa * t)) / kappa);
    };

    auto build = [&](double dt) {
        SimulatedPath path;
        path.d = 1;
        std::vector<double> x{x0}, noise{0.0}, out(1);
        double t = 0.0, D = 0.0;
        path.times.push_back(t);
        path.states.push_back(x[0]);
        path.killing.push_back(cir.killing_at(x));
        path.discount.push_back(D);
        while (t < 1.0 - 1e-12) {
            step(cir, x, dt, noise, out);
            double c_prev = cir.killing_at(x);
            x[0] = out[0];
            double c_new = cir.killing_at(x);
            D += dt * 0.5 * (c_prev + c_new);
            t += dt;
            path.times.push_back(t);
            path.states.push_back(x[0]);
            path.killing.push_back(c_new);
            path.discount.push_back(D);
        }
        return path;
    };

    double err_coarse =
        std::abs(discount_weight(build(0.02), s) - std::exp(-flow_integral(s)));
    double err_fine =
        std::abs(discount_weight(build(0.005), s) - std::exp(-flow_integral(s)));
    CHECK(err_coarse < 5e-4);
    CHECK(err_fine < err_coarse);
    CHECK(err_fine < err_coarse / 4.0); // trapezoid + Euler flow: O(dt^2) overall
}

TEST_CASE("supermartingale constant on the driftless unit model") {
    DiffusionModel m;
    m.d = 1;
    m.m = 1;
    m.beta = 1.0;
    m.drift_d = Coeff1D::zero();
    m.rho = {1.0};
    m.sigma0 = Coeff1D::constant(1.0);
    m.killing = FieldExpr::constant(1.0);
    m.c0 = 1.0;
    m.growth_K = 1.0;
    m.ellipticity_delta = 0.99;

    // with p = c0/2 the objective is (c0/2) x^2 - x, minimized at x = 1/c0
    auto dom = DomainSpec::make_box({{0.0, 4.0}});
    auto res = compute_M(m, dom, 129, 0.5);
    CHECK(res.condition_holds);
    CHECK(res.M == doctest::Approx(0.5).epsilon(0.08));
}

TEST_CASE("sublinear coefficients keep the condition comfortable") {
    DiffusionModel m;
    m.d = 1;
    m.m = 1;
    m.beta = 0.5;
    m.drift_d = Coeff1D::power(0.3, 0.5);
    m.rho = {1.0};
    m.sigma0 = Coeff1D::constant(0.4);
    m.killing = FieldExpr::constant(0.05);
    m.c0 = 0.05;
    m.growth_K = 1.0;
    m.ellipticity_delta = 0.15;
    auto res = compute_M(m, DomainSpec::make_box({{0.0, 8.0}}), 65);
    CHECK(res.condition_holds);
    CHECK(res.M >= 0.0);
}

TEST_CASE("vanishing killing rate violates the condition") {
    auto cir = make_cir1d({1.0, 0.2, 1.0, 0.05});
    cir.killing = FieldExpr::constant(0.0);
    cir.c0 = 0.0;
    CHECK_THROWS_AS(compute_M(cir, DomainSpec::make_box({{0.0, 4.0}}), 33), EngineError);
}
