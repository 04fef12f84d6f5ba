#include "fkd/simulate.hpp"

#include <algorithm>
#include <cmath>

namespace fkd {

const char* to_string(ExitFace f) {
    switch (f) {
        case ExitFace::Gamma0: return "Gamma0";
        case ExitFace::Gamma1: return "Gamma1";
        case ExitFace::Horizon: return "horizon";
    }
    return "?";
}

void SimConfig::validate(const DomainSpec& domain) const {
    if (!(dt > 0.0)) fail(ErrorCategory::ParamOutOfRange, "sim.dt must be positive");
    if (!(t_max >= dt)) fail(ErrorCategory::ParamOutOfRange, "sim.t_max must be >= sim.dt");
    if (boundary_tol < 0.0) fail(ErrorCategory::ParamOutOfRange, "sim.boundary_tol must be >= 0");
    if (substep_factor < 1) fail(ErrorCategory::ParamOutOfRange, "sim.substep_factor must be >= 1");
    double ext = domain.min_extent();
    if (std::isfinite(ext) && boundary_tol >= ext / 100.0)
        fail(ErrorCategory::ParamOutOfRange,
             "sim.boundary_tol must be below the smallest domain extent / 100");
}

void step(const DiffusionModel& model, std::span<const double> x, double dt,
          std::span<const double> noise, std::span<double> out) {
    const int d = model.d;
    const int m = model.m;
    double xd = std::max(x[d - 1], 0.0);
    double vol_fac = model.beta == 1.0   ? std::sqrt(xd)
                     : model.beta == 2.0 ? xd
                                         : std::pow(xd, 0.5 * model.beta);

    for (int i = 0; i < d - 1; ++i) {
        double diff = 0.0;
        for (int j = 0; j < m; ++j) diff += model.vol_head[i][j](x) * noise[j];
        out[i] = x[i] + model.drift_head[i](x) * dt + vol_fac * diff;
    }

    double dwd = 0.0;
    for (int j = 0; j < m; ++j) dwd += model.rho[j] * noise[j];
    double xd_new = xd + model.bd(xd) * dt + vol_fac * model.sigma0(xd) * dwd;
    out[d - 1] = std::max(0.0, xd_new); // full truncation at the degenerate face
}

namespace {

struct RecordingObserver {
    SimulatedPath* path;
    const DiffusionModel* model;

    void push(double t, std::span<const double> x, double D) {
        path->times.push_back(t);
        path->states.insert(path->states.end(), x.begin(), x.end());
        path->discount.push_back(D);
        path->killing.push_back(model->killing_at(x));
    }
    bool segment(double, std::span<const double>, double, double t1, std::span<const double> x1,
                 double D1, bool) {
        push(t1, x1, D1);
        return true;
    }
};

} // namespace

SimulatedPath simulate_path(const DiffusionModel& model, const DomainSpec& domain,
                            std::span<const double> x0, double t0, const SimConfig& cfg,
                            std::uint64_t path_index) {
    SimulatedPath path;
    path.d = model.d;

    double sign = 1.0;
    std::uint64_t stream = path_index;
    if (cfg.antithetic) {
        sign = (path_index % 2 == 0) ? 1.0 : -1.0;
        stream = path_index / 2;
    }
    PathNoise noise(cfg.seed, stream, sign);

    RecordingObserver obs{&path, &model};
    obs.push(t0, x0, 0.0);
    auto outcome = walk_path(model, domain, x0, t0, cfg, noise, false, obs);
    path.tau_exit = outcome.tau_exit;
    path.lambda_exit = outcome.lambda_exit;
    path.gamma0_touches = outcome.gamma0_touches;
    return path;
}

double discount_weight(const SimulatedPath& path, double s) {
    if (path.times.empty() || s < path.times.front() - 1e-12 || s > path.times.back() + 1e-12)
        fail(ErrorCategory::OutOfRange, "discount query outside the path time range");
    s = std::clamp(s, path.times.front(), path.times.back());

    auto it = std::upper_bound(path.times.begin(), path.times.end(), s);
    std::size_t k = (it == path.times.begin()) ? 0 : (it - path.times.begin() - 1);
    if (k + 1 >= path.times.size()) return std::exp(-path.discount.back());

    double t0 = path.times[k], t1 = path.times[k + 1];
    double theta = (t1 > t0) ? (s - t0) / (t1 - t0) : 0.0;
    double c_s = path.killing[k] + theta * (path.killing[k + 1] - path.killing[k]);
    double D = path.discount[k] + (s - t0) * 0.5 * (path.killing[k] + c_s);
    return std::exp(-D);
}

SupermartingaleConstant compute_M(const DiffusionModel& model, const DomainSpec& search_box,
                                  int grid_resolution, std::optional<double> p_candidate) {
    const int d = model.d;
    std::vector<double> b(d), sig(static_cast<std::size_t>(d) * model.m);

    auto objective = [&](std::span<const double> x, double p) {
        model.drift_into(x, b);
        model.sigma_into(x, sig);
        double nx2 = 0.0, nb2 = 0.0, ns2 = 0.0;
        for (int i = 0; i < d; ++i) nx2 += x[i] * x[i];
        for (int i = 0; i < d; ++i) nb2 += b[i] * b[i];
        for (double v : sig) ns2 += v * v;
        return model.killing_at(x) * nx2 - (p * nx2 + nb2 / p + ns2);
    };

    std::vector<double> candidates;
    if (p_candidate) {
        candidates.push_back(*p_candidate);
    } else {
        double base = model.c0 > 0.0 ? model.c0 : 0.05;
        candidates = {base / 2.0, base / 4.0, base / 8.0};
    }

    SupermartingaleConstant best;
    best.M = kInf;

    for (double p : candidates) {
        if (!(p > 0.0)) fail(ErrorCategory::ParamOutOfRange, "supermartingale p must be positive");
        double min_obj = kInf;
        std::vector<double> x(d), argmin(d);
        std::vector<int> idx(d, 0);
        while (true) {
            for (int i = 0; i < d; ++i) {
                double lo = std::isfinite(search_box.box[i].lo) ? search_box.box[i].lo : -4.0;
                double hi = std::isfinite(search_box.box[i].hi) ? search_box.box[i].hi : 4.0;
                x[i] = lo + (hi - lo) * (idx[i] + 0.5) / grid_resolution;
            }
            double v = objective(x, p);
            if (v < min_obj) {
                min_obj = v;
                argmin = x;
            }
            int axis = 0;
            while (axis < d && ++idx[axis] == grid_resolution) idx[axis++] = 0;
            if (axis == d) break;
        }

        // tail trend along the expanding ray through the argmin (and the box
        // diagonal): the liminf condition fails if the objective keeps falling
        double prev = min_obj;
        bool falling = true;
        std::vector<double> ray(argmin);
        double nr = 0.0;
        for (int i = 0; i < d; ++i) nr += ray[i] * ray[i];
        if (nr < 1e-12) ray[d - 1] = 1.0;
        for (double scale : {2.0, 4.0, 8.0, 16.0}) {
            for (int i = 0; i < d; ++i) x[i] = ray[i] * scale;
            if (x[d - 1] < 0.0) x[d - 1] = -x[d - 1];
            double v = objective(x, p);
            if (v >= prev) falling = false;
            prev = v;
        }
        bool holds = !(falling && prev < min_obj);

        double M = std::max(0.0, -min_obj) * 1.05; // sampling margin
        if (holds && M < best.M) best = {M, p, true};
        if (!holds && !std::isfinite(best.M) ) best = {std::max(0.0, -min_obj), p, false};
    }

    if (!std::isfinite(best.M) || !best.condition_holds)
        fail(ErrorCategory::ConditionLikelyViolated,
             "supermartingale objective trends to -infinity along the sampled tail");
    return best;
}

} // namespace fkd
