#include "fkd/fk_estimate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace fkd {

const char* to_string(ProblemKind k) {
    switch (k) {
        case ProblemKind::EllipticBvp: return "elliptic_bvp";
        case ProblemKind::ParabolicBvp: return "parabolic_bvp";
        case ProblemKind::EllipticObstacle: return "elliptic_obstacle";
        case ProblemKind::ParabolicObstacle: return "parabolic_obstacle";
    }
    return "?";
}

const char* to_string(Variant v) { return v == Variant::Tau ? "tau" : "lambda"; }

bool is_parabolic(ProblemKind k) {
    return k == ProblemKind::ParabolicBvp || k == ProblemKind::ParabolicObstacle;
}

bool is_obstacle(ProblemKind k) {
    return k == ProblemKind::EllipticObstacle || k == ProblemKind::ParabolicObstacle;
}

namespace {

// boundary sample points of a truncated box (faces + a few edge midpoints)
std::vector<std::vector<double>> boundary_samples(const DomainSpec& domain, int d, int per_face) {
    std::vector<std::vector<double>> pts;
    const double golden = 0.6180339887498949;
    double u = 0.17;
    auto coord = [&](int axis, double frac) {
        double lo = std::isfinite(domain.box[axis].lo) ? domain.box[axis].lo : -2.0;
        double hi = std::isfinite(domain.box[axis].hi) ? domain.box[axis].hi : 2.0;
        return lo + (hi - lo) * frac;
    };
    for (int axis = 0; axis < d; ++axis) {
        for (int side = 0; side < 2; ++side) {
            bool upper = side == 1;
            double bound = upper ? domain.box[axis].hi : domain.box[axis].lo;
            if (!std::isfinite(bound)) continue;
            for (int s = 0; s < per_face; ++s) {
                std::vector<double> x(d);
                for (int i = 0; i < d; ++i) {
                    u += golden;
                    u -= std::floor(u);
                    x[i] = coord(i, u);
                }
                x[axis] = bound;
                pts.push_back(std::move(x));
            }
        }
    }
    return pts;
}

bool is_gamma0_point(const DomainSpec& domain, std::span<const double> x) {
    (void)domain;
    return x[x.size() - 1] == 0.0;
}

} // namespace

double field_growth_constant(const ScalarField& field, const DomainSpec& domain, int d) {
    if (field.growth_K > 0.0) return field.growth_K;
    double K = 0.0;
    auto pts = boundary_samples(domain, d, 8);
    // add an interior diagonal sweep
    for (int s = 0; s <= 16; ++s) {
        std::vector<double> x(d);
        for (int i = 0; i < d; ++i) {
            double lo = std::isfinite(domain.box[i].lo) ? domain.box[i].lo : -2.0;
            double hi = std::isfinite(domain.box[i].hi) ? domain.box[i].hi : 2.0;
            x[i] = lo + (hi - lo) * (s + 0.5) / 17.0;
        }
        pts.push_back(std::move(x));
    }
    for (const auto& x : pts) {
        double nx = 0.0;
        for (double v : x) nx += v * v;
        K = std::max(K, std::abs(field(0.0, x)) / (1.0 + std::sqrt(nx)));
    }
    return std::max(K, 1e-12);
}

void ProblemSpec::validate(const DiffusionModel& model, const DomainSpec& domain,
                           Scenario scenario) const {
    if (is_obstacle(kind) && !psi)
        fail(ErrorCategory::Compatibility, "obstacle problem requires psi");
    if (!is_obstacle(kind) && psi)
        fail(ErrorCategory::Compatibility, "psi supplied for a non-obstacle problem");
    if (is_parabolic(kind) && !(T > 0.0))
        fail(ErrorCategory::ParamOutOfRange, "parabolic horizon T must be positive");

    if (boundary_mode(scenario) == BoundaryMode::Full && !g.covers_gamma0() &&
        domain.gamma0_nonempty)
        fail(ErrorCategory::BoundaryDataMissing,
             "scenario B with the tau variant requires boundary data g on all of the boundary "
             "(declare the field on the full boundary)");

    // compatibility psi <= g on the declared boundary portion
    if (psi) {
        auto pts = boundary_samples(domain, model.d, 16);
        double T_probe = is_parabolic(kind) ? T : 0.0;
        for (const auto& x : pts) {
            if (!g.covers_gamma0() && is_gamma0_point(domain, x)) continue;
            for (double t : {0.0, 0.5 * T_probe, T_probe}) {
                if ((*psi)(t, x) > g(t, x) + 1e-12)
                    fail(ErrorCategory::Compatibility,
                         "obstacle compatibility psi <= g violated on the boundary");
                if (!is_parabolic(kind)) break;
            }
        }
        // parabolic: terminal slice is boundary data too
        if (is_parabolic(kind)) {
            for (int s = 0; s <= 32; ++s) {
                std::vector<double> x(model.d);
                for (int i = 0; i < model.d; ++i) {
                    double lo = std::isfinite(domain.box[i].lo) ? domain.box[i].lo : -2.0;
                    double hi = std::isfinite(domain.box[i].hi) ? domain.box[i].hi : 2.0;
                    x[i] = lo + (hi - lo) * (s + 0.5) / 33.0;
                }
                if ((*psi)(T, x) > g(T, x) + 1e-12)
                    fail(ErrorCategory::Compatibility,
                         "obstacle compatibility psi <= g violated at the terminal slice");
            }
        }
    }
}

double default_elliptic_horizon(const DiffusionModel& model, double exit_time_estimate) {
    if (!(model.c0 > 0.0))
        fail(ErrorCategory::ParamOutOfRange, "elliptic horizon needs a positive killing floor");
    return std::max(10.0 / model.c0, 5.0 * exit_time_estimate);
}

BatchAccumulator run_batched(long n_samples, int threads,
                             const std::function<double(long)>& body) {
    const long batch_size = 1024;
    const long n_batches = (n_samples + batch_size - 1) / batch_size;
    std::vector<BatchAccumulator> batches(static_cast<std::size_t>(n_batches));

    auto run_batch = [&](long bi) {
        long lo = bi * batch_size;
        long hi = std::min(n_samples, lo + batch_size);
        BatchAccumulator acc;
        for (long i = lo; i < hi; ++i) acc.add(body(i));
        batches[static_cast<std::size_t>(bi)] = acc;
    };

    if (threads <= 1 || n_batches == 1) {
        for (long bi = 0; bi < n_batches; ++bi) run_batch(bi);
    } else {
        std::atomic<long> next{0};
        std::vector<std::thread> pool;
        int n_workers = std::min<long>(threads, n_batches);
        pool.reserve(n_workers);
        for (int w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                for (long bi = next.fetch_add(1); bi < n_batches; bi = next.fetch_add(1))
                    run_batch(bi);
            });
        }
        for (auto& th : pool) th.join();
    }

    BatchAccumulator total;
    for (const auto& b : batches) total.merge(b);
    return total;
}

namespace {

// Per-path estimator state shared by the three entry points.
struct PathValue {
    double value = 0.0;
    bool censored = false;
    bool gamma0_touched = false;
};

struct RunningCostObserver {
    const ScalarField* f;
    double value = 0.0;

    bool segment(double t0, std::span<const double> x0, double D0, double t1,
                 std::span<const double> x1, double D1, bool) {
        double f0 = (*f)(t0, x0);
        double f1 = (*f)(t1, x1);
        value += (t1 - t0) * 0.5 * (std::exp(-D0) * f0 + std::exp(-D1) * f1);
        return true;
    }
};

struct EvalContext {
    const DiffusionModel* model;
    const DomainSpec* domain;
    const ProblemSpec* spec;
    Scenario scenario;
    bool parabolic;
    double t0;
    std::span<const double> x0;
    SimConfig sim;
    bool stop_at_tau;

    // in scenario A the true process never reaches Gamma0: a discrete touch
    // is a scheme diagnostic, not a tau exit (tau = lambda there)
    Gamma0Policy gamma0_policy() const {
        return scenario == Scenario::B ? Gamma0Policy::ExitTau : Gamma0Policy::DiagnosticOnly;
    }
};

PathValue evaluate_path(const EvalContext& ctx, long path_index) {
    PathValue out;
    double sign = 1.0;
    std::uint64_t stream = static_cast<std::uint64_t>(path_index);
    if (ctx.sim.antithetic) {
        sign = (path_index % 2 == 0) ? 1.0 : -1.0;
        stream = static_cast<std::uint64_t>(path_index / 2);
    }
    PathNoise noise(ctx.sim.seed, stream, sign);

    RunningCostObserver obs{&ctx.spec->f};
    auto outcome = walk_path(*ctx.model, *ctx.domain, ctx.x0, ctx.t0, ctx.sim, noise,
                             ctx.stop_at_tau, obs, ctx.gamma0_policy());
    out.gamma0_touched = outcome.gamma0_touches > 0;

    const ExitRecord* exit =
        ctx.stop_at_tau ? (outcome.tau_exit ? &*outcome.tau_exit : nullptr)
                        : (outcome.lambda_exit ? &*outcome.lambda_exit : nullptr);
    if (!exit) fail(ErrorCategory::EvaluationFailure, "path walk returned no exit record");

    out.value = obs.value;
    if (exit->face == ExitFace::Horizon) {
        if (ctx.parabolic) {
            // hard terminal time: g(T, X_T)
            out.value += std::exp(-exit->discount) * ctx.spec->g(ctx.spec->T, exit->point);
        } else {
            out.censored = true; // contributes the running cost only
        }
        return out;
    }
    if (exit->face == ExitFace::Gamma0 && !ctx.spec->g.covers_gamma0())
        fail(ErrorCategory::BoundaryDataMissing,
             "path exited through Gamma0 but g is declared on Gamma1 only "
             "(scenario/variant mismatch)");
    out.value += std::exp(-exit->discount) * ctx.spec->g(exit->time, exit->point);
    return out;
}

Estimate finalize(const BatchAccumulator& acc, long n_paths, double bias_bound,
                  double touch_rate, double censor_rate) {
    Estimate e;
    e.mean = acc.mean;
    e.std_error = acc.std_error();
    e.n_paths = n_paths;
    e.ci95_lo = e.mean - 1.96 * e.std_error;
    e.ci95_hi = e.mean + 1.96 * e.std_error;
    e.truncation_bias_bound = bias_bound;
    e.diagnostics = {touch_rate, censor_rate};
    return e;
}

} // namespace

double elliptic_truncation_bound(const DiffusionModel& model, const DomainSpec& domain,
                                 const ProblemSpec& spec, std::span<const double> x,
                                 double horizon) {
    double K = std::max({model.growth_K, field_growth_constant(spec.g, domain, model.d),
                         field_growth_constant(spec.f, domain, model.d)});
    double M = 0.0;
    try {
        M = compute_M(model, default_domain(model), 17).M;
    } catch (const EngineError&) {
        M = 0.0; // condition check failed; bound falls back to the K-only envelope
    }
    double nx = 0.0;
    for (double v : x) nx += v * v;
    return K * (1.0 + std::sqrt(nx)) * (1.0 + std::sqrt(M / model.c0)) *
           std::exp(-model.c0 * horizon);
}

Estimate estimate_elliptic(const DiffusionModel& model, const DomainSpec& domain,
                           const ProblemSpec& spec, std::span<const double> x,
                           const EstimatorConfig& cfg) {
    if (is_parabolic(spec.kind) || is_obstacle(spec.kind))
        fail(ErrorCategory::ParamOutOfRange, "estimate_elliptic expects an elliptic BVP spec");
    auto scenario = classify_origin(model, default_probe_b(model, domain)).scenario;
    spec.validate(model, domain, scenario);
    cfg.sim.validate(domain);

    EvalContext ctx{&model, &domain, &spec, scenario, false, 0.0, x, cfg.sim,
                    spec.variant == Variant::Tau};

    std::atomic<long> touches{0}, censored{0};
    auto body = [&](long i) {
        long idx = cfg.sim.antithetic ? 2 * i : i;
        PathValue v = evaluate_path(ctx, idx);
        if (cfg.sim.antithetic) {
            PathValue v2 = evaluate_path(ctx, idx + 1);
            v.value = 0.5 * (v.value + v2.value);
            v.censored = v.censored || v2.censored;
            v.gamma0_touched = v.gamma0_touched || v2.gamma0_touched;
        }
        if (v.gamma0_touched) touches.fetch_add(1, std::memory_order_relaxed);
        if (v.censored) censored.fetch_add(1, std::memory_order_relaxed);
        return v.value;
    };

    long n_units = cfg.sim.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
    auto acc = run_batched(n_units, cfg.threads, body);

    double n = static_cast<double>(n_units);
    double bias = elliptic_truncation_bound(model, domain, spec, x, cfg.sim.t_max);
    return finalize(acc, cfg.n_paths, bias, touches.load() / n, censored.load() / n);
}

Estimate estimate_parabolic(const DiffusionModel& model, const DomainSpec& domain,
                            const ProblemSpec& spec, double t, std::span<const double> x,
                            const EstimatorConfig& cfg) {
    if (!is_parabolic(spec.kind) || is_obstacle(spec.kind))
        fail(ErrorCategory::ParamOutOfRange, "estimate_parabolic expects a parabolic BVP spec");
    if (t < 0.0 || t > spec.T)
        fail(ErrorCategory::OutOfRange, "query time must lie in [0, T]");
    auto scenario = classify_origin(model, default_probe_b(model, domain)).scenario;
    spec.validate(model, domain, scenario);

    if (t >= spec.T) {
        Estimate e;
        e.mean = spec.g(spec.T, x);
        e.n_paths = 0;
        e.ci95_lo = e.ci95_hi = e.mean;
        return e;
    }

    SimConfig sim = cfg.sim;
    sim.t_max = spec.T - t;
    sim.dt = std::min(sim.dt, sim.t_max);
    sim.validate(domain);
    EvalContext ctx{&model, &domain, &spec, scenario, true, t, x, sim,
                    spec.variant == Variant::Tau};

    std::atomic<long> touches{0};
    auto body = [&](long i) {
        long idx = sim.antithetic ? 2 * i : i;
        PathValue v = evaluate_path(ctx, idx);
        if (sim.antithetic) {
            PathValue v2 = evaluate_path(ctx, idx + 1);
            v.value = 0.5 * (v.value + v2.value);
            v.gamma0_touched = v.gamma0_touched || v2.gamma0_touched;
        }
        if (v.gamma0_touched) touches.fetch_add(1, std::memory_order_relaxed);
        return v.value;
    };

    long n_units = sim.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
    auto acc = run_batched(n_units, cfg.threads, body);
    return finalize(acc, cfg.n_paths, 0.0, touches.load() / static_cast<double>(n_units), 0.0);
}

Estimate j_functional(const DiffusionModel& model, const DomainSpec& domain,
                      const ProblemSpec& spec, double t, std::span<const double> x,
                      const StoppingRule& rule, const EstimatorConfig& cfg) {
    if (!is_obstacle(spec.kind))
        fail(ErrorCategory::ParamOutOfRange, "j_functional expects an obstacle spec");
    if (!spec.psi) fail(ErrorCategory::Compatibility, "j_functional requires psi");
    auto scenario = classify_origin(model, default_probe_b(model, domain)).scenario;
    spec.validate(model, domain, scenario);

    bool parabolic = is_parabolic(spec.kind);
    SimConfig sim = cfg.sim;
    if (parabolic) {
        if (t < 0.0 || t > spec.T) fail(ErrorCategory::OutOfRange, "query time outside [0, T]");
        sim.t_max = std::max(spec.T - t, sim.dt);
    }
    sim.validate(domain);
    const ScalarField& psi = *spec.psi;
    bool stop_at_tau = spec.variant == Variant::Tau;
    Gamma0Policy g0policy =
        scenario == Scenario::B ? Gamma0Policy::ExitTau : Gamma0Policy::DiagnosticOnly;

    // rule firing at the start point: J = psi(t, x) exactly, zero variance
    if (rule(t, x)) {
        Estimate e;
        e.mean = psi(t, x);
        e.n_paths = cfg.n_paths;
        e.ci95_lo = e.ci95_hi = e.mean;
        return e;
    }

    struct JObserver {
        const ScalarField* f;
        const ScalarField* psi;
        const StoppingRule* rule;
        double t_horizon; // absolute time of the parabolic terminal slice
        bool parabolic;
        double running = 0.0;
        bool stopped = false;
        double stop_value = 0.0;
        double stop_time = 0.0;

        bool segment(double s0, std::span<const double> xa, double D0, double s1,
                     std::span<const double> xb, double D1, bool is_exit) {
            running += (s1 - s0) * 0.5 * (std::exp(-D0) * (*f)(s0, xa) +
                                          std::exp(-D1) * (*f)(s1, xb));
            // ties at the exit or the terminal slice go to the exit payoff
            // (the indicator is theta1 <= theta2)
            bool at_terminal = parabolic && s1 >= t_horizon - 1e-12;
            if (!is_exit && !at_terminal && (*rule)(s1, xb)) {
                stopped = true;
                stop_value = std::exp(-D1) * (*psi)(s1, xb);
                stop_time = s1;
                return false;
            }
            return true;
        }
    };

    std::atomic<long> touches{0}, censored{0};

    auto eval_one = [&](long path_index) {
        double sign = 1.0;
        std::uint64_t stream = static_cast<std::uint64_t>(path_index);
        if (sim.antithetic) {
            sign = (path_index % 2 == 0) ? 1.0 : -1.0;
            stream = static_cast<std::uint64_t>(path_index / 2);
        }
        PathNoise noise(sim.seed, stream, sign);
        JObserver obs{&spec.f, &psi, &rule, t + sim.t_max, parabolic, 0.0, false, 0.0, 0.0};
        auto outcome = walk_path(model, domain, x, t, sim, noise, stop_at_tau, obs, g0policy);
        if (outcome.gamma0_touches > 0) touches.fetch_add(1, std::memory_order_relaxed);

        const ExitRecord* exit =
            stop_at_tau ? (outcome.tau_exit ? &*outcome.tau_exit : nullptr)
                        : (outcome.lambda_exit ? &*outcome.lambda_exit : nullptr);
        // theta2 strictly before theta1: the stopped-at-obstacle term
        if (obs.stopped && (!exit || exit->time > obs.stop_time + 1e-15))
            return obs.running + obs.stop_value;
        if (!exit) fail(ErrorCategory::EvaluationFailure, "path walk returned no exit record");
        if (exit->face == ExitFace::Horizon) {
            if (parabolic)
                return obs.running +
                       std::exp(-exit->discount) * spec.g(spec.T, exit->point);
            censored.fetch_add(1, std::memory_order_relaxed);
            return obs.running;
        }
        if (exit->face == ExitFace::Gamma0 && !spec.g.covers_gamma0())
            fail(ErrorCategory::BoundaryDataMissing,
                 "path exited through Gamma0 but g is declared on Gamma1 only");
        return obs.running + std::exp(-exit->discount) * spec.g(exit->time, exit->point);
    };

    auto body = [&](long i) {
        long idx = sim.antithetic ? 2 * i : i;
        double v = eval_one(idx);
        if (sim.antithetic) v = 0.5 * (v + eval_one(idx + 1));
        return v;
    };

    long n_units = sim.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
    auto acc = run_batched(n_units, cfg.threads, body);

    double n = static_cast<double>(n_units);
    double bias = parabolic ? 0.0 : elliptic_truncation_bound(model, domain, spec, x, sim.t_max);
    return finalize(acc, cfg.n_paths, bias, touches.load() / n, censored.load() / n);
}

} // namespace fkd
