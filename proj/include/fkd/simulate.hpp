#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fkd/model.hpp"
#include "fkd/rng.hpp"

namespace fkd {

struct SimConfig {
    double dt = 0.01;
    double t_max = 1.0;        // horizon (truncation horizon for elliptic runs)
    double boundary_tol = 1e-10;
    int substep_factor = 8;
    std::uint64_t seed = 42;
    bool antithetic = false;

    void validate(const DomainSpec& domain) const;
};

enum class ExitFace { Gamma0, Gamma1, Horizon };

const char* to_string(ExitFace f);

struct ExitRecord {
    double time = 0.0;
    std::vector<double> point;
    ExitFace face = ExitFace::Horizon;
    double discount = 0.0; // integral of c along the path up to the exit
};

// Normal draws scaled by an antithetic sign.
class PathNoise {
public:
    PathNoise(std::uint64_t seed, std::uint64_t stream, double sign = 1.0)
        : stream_(seed, stream), sign_(sign) {}
    double next() { return sign_ * stream_.next(); }

private:
    NormalStream stream_;
    double sign_;
};

// One full-truncation Euler-Maruyama update. noise must hold m draws
// distributed N(0, dt) (already scaled by sqrt(dt)); the update is a pure
// function of (x, dt, noise).
void step(const DiffusionModel& model, std::span<const double> x, double dt,
          std::span<const double> noise, std::span<double> out);

struct PathOutcome {
    std::optional<ExitRecord> tau_exit;    // first of Gamma1 crossing / Gamma0 touch
    std::optional<ExitRecord> lambda_exit; // Gamma1 crossing only (or horizon)
    long gamma0_touches = 0;
    double final_time = 0.0;
    double final_discount = 0.0;
};

// How the walker treats x_d falling to the boundary threshold. In scenario B
// a touch is a genuine tau exit; in scenario A the true process never reaches
// Gamma0, so a touch is a discretization diagnostic and the walk continues.
enum class Gamma0Policy { ExitTau, DiagnosticOnly };

// Streaming path walk: obs.segment(t0, x0, D0, t1, x1, D1, is_exit) is
// invoked for every completed (sub)step including the final partial step to
// an exit point (is_exit = true there); returning false aborts the walk at
// that node. Near-boundary sub-stepping refines dt by substep_factor while
// x_d < 10*sqrt(boundary_tol)*scale. When stop_at_tau is false the walk
// continues through Gamma0 touches until a Gamma1 exit or the horizon (the
// lambda variant under the scheme-selected weak solution).
template <class Obs>
PathOutcome walk_path(const DiffusionModel& model, const DomainSpec& domain,
                      std::span<const double> x0, double t0, const SimConfig& cfg,
                      PathNoise& noise, bool stop_at_tau, Obs&& obs,
                      Gamma0Policy gamma0 = Gamma0Policy::ExitTau);

// Recorded trajectory for diagnostics and path dumps.
struct SimulatedPath {
    int d = 1;
    std::vector<double> times;
    std::vector<double> states;   // row-major, stride d
    std::vector<double> discount; // running integral of c per node
    std::vector<double> killing;  // c(X) per node
    std::optional<ExitRecord> tau_exit;
    std::optional<ExitRecord> lambda_exit;
    long gamma0_touches = 0;

    std::span<const double> state(std::size_t k) const {
        return {states.data() + k * d, static_cast<std::size_t>(d)};
    }
    std::size_t size() const { return times.size(); }
};

SimulatedPath simulate_path(const DiffusionModel& model, const DomainSpec& domain,
                            std::span<const double> x0, double t0, const SimConfig& cfg,
                            std::uint64_t path_index);

// exp(-int_{t0}^{s} c(X_u) du) along a recorded path, trapezoidal with the
// final partial step interpolated.
double discount_weight(const SimulatedPath& path, double s);

// Supermartingale constant M = -inf over the box of
//   c(x)||x||^2 - (p ||x||^2 + ||b(x)||^2 / p + ||sigma(x)||^2),
// clamped at 0, with a sampled tail-trend check of the liminf condition.
struct SupermartingaleConstant {
    double M = 0.0;
    double p = 0.0;
    bool condition_holds = true;
};

SupermartingaleConstant compute_M(const DiffusionModel& model, const DomainSpec& search_box,
                                  int grid_resolution = 33,
                                  std::optional<double> p_candidate = std::nullopt);

// --- template implementation ------------------------------------------------

namespace detail {

inline void project_to_face(std::vector<double>& x, const DomainSpec& domain, int axis,
                            bool upper) {
    x[axis] = upper ? domain.box[axis].hi : domain.box[axis].lo;
}

} // namespace detail

template <class Obs>
PathOutcome walk_path(const DiffusionModel& model, const DomainSpec& domain,
                      std::span<const double> x0, double t0, const SimConfig& cfg,
                      PathNoise& noise, bool stop_at_tau, Obs&& obs, Gamma0Policy gamma0) {
    const int d = model.d;
    const int m = model.m;
    PathOutcome out;

    std::vector<double> x(x0.begin(), x0.end());
    double t = t0;
    double D = 0.0;

    // started on Gamma1: exits immediately
    if (!domain.contains(x) ) {
        if (domain.on_gamma1(x)) {
            ExitRecord rec{t, x, ExitFace::Gamma1, 0.0};
            out.tau_exit = rec;
            out.lambda_exit = rec;
            out.final_time = t;
            return out;
        }
        if (x[d - 1] > cfg.boundary_tol)
            fail(ErrorCategory::OutOfRange, "path start outside the domain closure");
        // starts on Gamma0: a tau exit, lambda continues below
        ++out.gamma0_touches;
        if (gamma0 == Gamma0Policy::ExitTau) {
            out.tau_exit = ExitRecord{t, x, ExitFace::Gamma0, 0.0};
            if (stop_at_tau) {
                out.final_time = t;
                out.final_discount = 0.0;
                return out;
            }
        }
    }

    double scale_d = std::isfinite(domain.gamma1_extent_d()) ? domain.gamma1_extent_d() : 1.0;
    const double substep_below = 10.0 * std::sqrt(cfg.boundary_tol) * scale_d;

    std::vector<double> dw(m), xn(d), xc(d);
    double c_cur = model.killing_at(x);

    const double t_end = t0 + cfg.t_max;
    while (t < t_end - 1e-12 * std::max(1.0, t_end)) {
        double dt_step = std::min(cfg.dt, t_end - t);
        int nsub = (x[d - 1] < substep_below) ? cfg.substep_factor : 1;
        double h = dt_step / nsub;
        double sqh = std::sqrt(h);

        for (int sub = 0; sub < nsub; ++sub) {
            for (int j = 0; j < m; ++j) dw[j] = sqh * noise.next();
            step(model, x, h, dw, xn);

            if (auto cross = domain.first_gamma1_crossing(x, xn)) {
                for (int i = 0; i < d; ++i) xc[i] = x[i] + cross->frac * (xn[i] - x[i]);
                detail::project_to_face(xc, domain, cross->axis, cross->upper);
                if (xc[d - 1] < 0.0) xc[d - 1] = 0.0;
                double tc = t + cross->frac * h;
                double c_exit = model.killing_at(xc);
                double Dc = D + cross->frac * h * 0.5 * (c_cur + c_exit);
                obs.segment(t, std::span<const double>(x), D, tc,
                            std::span<const double>(xc), Dc, true);
                ExitRecord rec{tc, xc, ExitFace::Gamma1, Dc};
                if (!out.tau_exit) out.tau_exit = rec;
                out.lambda_exit = rec;
                out.final_time = tc;
                out.final_discount = Dc;
                return out;
            }

            double c_new = model.killing_at(xn);
            double Dn = D + h * 0.5 * (c_cur + c_new);
            bool keep_going = obs.segment(t, std::span<const double>(x), D, t + h,
                                          std::span<const double>(xn), Dn, false);
            t += h;
            D = Dn;
            c_cur = c_new;
            x.assign(xn.begin(), xn.end());

            if (x[d - 1] <= cfg.boundary_tol && domain.gamma0_nonempty) {
                ++out.gamma0_touches;
                if (gamma0 == Gamma0Policy::ExitTau) {
                    if (!out.tau_exit) {
                        std::vector<double> xg(x);
                        xg[d - 1] = 0.0;
                        out.tau_exit = ExitRecord{t, xg, ExitFace::Gamma0, D};
                    }
                    if (stop_at_tau) {
                        out.final_time = t;
                        out.final_discount = D;
                        return out;
                    }
                }
            }

            if (!keep_going) {
                out.final_time = t;
                out.final_discount = D;
                return out;
            }
        }
    }

    ExitRecord horizon{t, x, ExitFace::Horizon, D};
    if (!out.tau_exit) out.tau_exit = horizon;
    if (!out.lambda_exit) out.lambda_exit = horizon;
    out.final_time = t;
    out.final_discount = D;
    return out;
}

} // namespace fkd
