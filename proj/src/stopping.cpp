#include "fkd/stopping.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>

namespace fkd {

namespace {

// tensor polynomial basis with total degree <= deg, states pre-scaled
void basis_eval(std::span<const double> x, double x_scale, int deg, int d,
                std::vector<double>& out) {
    out.clear();
    if (d == 1) {
        double s = x[0] / x_scale;
        double p = 1.0;
        for (int k = 0; k <= deg; ++k) {
            out.push_back(p);
            p *= s;
        }
        return;
    }
    std::vector<int> alpha(d, 0);
    std::vector<double> scaled(d);
    for (int i = 0; i < d; ++i) scaled[i] = x[i] / x_scale;
    std::function<void(int, int)> rec = [&](int pos, int remaining) {
        if (pos == d - 1) {
            for (int k = 0; k <= remaining; ++k) {
                alpha[pos] = k;
                double v = 1.0;
                for (int i = 0; i < d; ++i) v *= std::pow(scaled[i], alpha[i]);
                out.push_back(v);
            }
            alpha[pos] = 0;
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            alpha[pos] = k;
            rec(pos + 1, remaining - k);
        }
        alpha[pos] = 0;
    };
    rec(0, deg);
}

int basis_size(int deg, int d) {
    if (d == 1) return deg + 1;
    long num = 1, den = 1;
    for (int i = 1; i <= d; ++i) {
        num *= deg + i;
        den *= i;
    }
    return static_cast<int>(num / den);
}

// normal-equation least squares via Cholesky; false on breakdown
bool solve_normal_equations(const std::vector<double>& gram, const std::vector<double>& rhs,
                            int nb, std::vector<double>& coeffs) {
    std::vector<double> L(gram);
    for (int i = 0; i < nb; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = L[i * nb + j];
            for (int k = 0; k < j; ++k) sum -= L[i * nb + k] * L[j * nb + k];
            if (i == j) {
                if (sum <= 1e-12 * std::max(1.0, gram[i * nb + i])) return false;
                L[i * nb + i] = std::sqrt(sum);
            } else {
                L[i * nb + j] = sum / L[j * nb + j];
            }
        }
    }
    coeffs.assign(nb, 0.0);
    for (int i = 0; i < nb; ++i) {
        double sum = rhs[i];
        for (int k = 0; k < i; ++k) sum -= L[i * nb + k] * coeffs[k];
        coeffs[i] = sum / L[i * nb + i];
    }
    for (int i = nb - 1; i >= 0; --i) {
        double sum = coeffs[i];
        for (int k = i + 1; k < nb; ++k) sum -= L[k * nb + i] * coeffs[k];
        coeffs[i] = sum / L[i * nb + i];
    }
    return true;
}

} // namespace

StoppingPolicy StoppingPolicy::immediate() {
    StoppingPolicy p;
    p.kind_ = Kind::Immediate;
    return p;
}

StoppingPolicy StoppingPolicy::never() {
    StoppingPolicy p;
    p.kind_ = Kind::Never;
    return p;
}

StoppingPolicy StoppingPolicy::region(std::shared_ptr<const PdeSolution> solution,
                                      ScalarField psi, double region_tol, bool time_dependent) {
    StoppingPolicy p;
    p.kind_ = Kind::Region;
    p.pde_ = std::move(solution);
    p.psi_ = std::move(psi);
    p.region_tol_ = region_tol;
    p.time_dependent_ = time_dependent;
    p.dim_ = p.pde_->grid.dim;
    if (p.time_dependent_) p.time_grid_ = p.pde_->slab_times;
    return p;
}

StoppingPolicy StoppingPolicy::regression(std::vector<double> time_grid,
                                          std::vector<std::vector<double>> slab_coeffs,
                                          std::vector<int> slab_degrees, ScalarField psi,
                                          int dim, bool itm_only, double x_scale) {
    StoppingPolicy p;
    p.kind_ = Kind::Regression;
    p.time_grid_ = std::move(time_grid);
    p.coeffs_ = std::move(slab_coeffs);
    p.slab_degrees_ = std::move(slab_degrees);
    p.psi_ = std::move(psi);
    p.dim_ = dim;
    p.itm_only_ = itm_only;
    p.x_scale_ = x_scale;
    return p;
}

double StoppingPolicy::continuation_fit(std::size_t slab, std::span<const double> x) const {
    const auto& c = coeffs_[slab];
    if (c.empty()) return kInf; // no regression at this slab: never stop here
    if (c.size() == 1) return c[0];
    std::vector<double> phi;
    basis_eval(x, x_scale_, slab_degrees_[slab], dim_, phi);
    double v = 0.0;
    for (std::size_t i = 0; i < c.size() && i < phi.size(); ++i) v += c[i] * phi[i];
    return v;
}

bool StoppingPolicy::should_stop(double t, std::span<const double> x) const {
    switch (kind_) {
        case Kind::Immediate: return true;
        case Kind::Never: return false;
        case Kind::Region: {
            double u = time_dependent_ ? pde_->value_at(t, x) : pde_->value_at(x);
            return u - psi_(t, x) <= region_tol_;
        }
        case Kind::Regression: {
            if (time_grid_.empty()) return false;
            auto it = std::upper_bound(time_grid_.begin(), time_grid_.end(), t + 1e-12);
            if (it == time_grid_.begin()) return false;
            std::size_t k = static_cast<std::size_t>(it - time_grid_.begin()) - 1;
            if (k >= coeffs_.size()) return false;
            double pv = psi_(t, x);
            if (itm_only_ && pv <= 0.0) return false;
            // continuation values are regressed per unit of discount at the slab
            return pv >= continuation_fit(k, x);
        }
    }
    return false;
}

StoppingRule StoppingPolicy::as_rule() const {
    if (kind_ == Kind::Regression) {
        // gate decisions to a half-slab window after each decision date
        double half = time_grid_.size() > 1 ? 0.5 * (time_grid_[1] - time_grid_[0]) : 0.0;
        return [policy = *this, half](double t, std::span<const double> x) {
            const auto& grid = policy.time_grid();
            auto it = std::upper_bound(grid.begin(), grid.end(), t + 1e-12);
            if (it == grid.begin()) return false;
            if (t - *(it - 1) > half) return false;
            return policy.should_stop(t, x);
        };
    }
    return [policy = *this](double t, std::span<const double> x) {
        return policy.should_stop(t, x);
    };
}

std::vector<std::pair<double, double>> StoppingPolicy::exercise_boundary(double x_lo,
                                                                         double x_hi,
                                                                         int scan) const {
    std::vector<std::pair<double, double>> out;
    if (dim_ != 1) return out;
    auto boundary_at = [&](double t) -> std::optional<double> {
        bool prev = false;
        std::optional<double> last_flip;
        for (int i = 0; i <= scan; ++i) {
            double xq = x_lo + (x_hi - x_lo) * i / scan;
            double xv[1] = {xq};
            bool stop = should_stop(t, std::span<const double>(xv, 1));
            if (i > 0 && stop != prev) last_flip = x_lo + (x_hi - x_lo) * (i - 0.5) / scan;
            prev = stop;
        }
        return last_flip;
    };
    if (!time_grid_.empty()) {
        for (double t : time_grid_)
            if (auto b = boundary_at(t)) out.emplace_back(t, *b);
    } else {
        if (auto b = boundary_at(0.0)) out.emplace_back(0.0, *b);
    }
    return out;
}

StoppingPolicy policy_from_pde(std::shared_ptr<const PdeSolution> solution, ScalarField psi,
                               double region_tol) {
    if (!solution) fail(ErrorCategory::ParamOutOfRange, "policy_from_pde requires a solution");
    bool time_dep = !solution->slabs.empty();
    double scale = 0.0;
    for (double v : solution->values) scale = std::max(scale, std::abs(v));
    double tol = region_tol > 0.0 ? region_tol : 1e-8 * (1.0 + scale);
    return StoppingPolicy::region(std::move(solution), std::move(psi), tol, time_dep);
}

void check_free_boundary_stability(const PdeSolution& coarse, const PdeSolution& fine,
                                   const ScalarField& psi, double region_tol) {
    if (coarse.grid.dim != 1 || fine.grid.dim != 1)
        fail(ErrorCategory::ParamOutOfRange, "free-boundary check supports d = 1 grids");
    double scale = 0.0;
    for (double v : fine.values) scale = std::max(scale, std::abs(v));
    double tol = region_tol > 0.0 ? region_tol : 1e-8 * (1.0 + scale);
    auto locate = [&](const PdeSolution& sol) -> std::optional<double> {
        const auto& ax = sol.grid.axes[0];
        std::optional<double> flip;
        bool prev = false;
        for (std::size_t i = 0; i < ax.size(); ++i) {
            double xv[1] = {ax[i]};
            double slack = sol.values[i] - psi(0.0, std::span<const double>(xv, 1));
            bool active = slack <= tol;
            if (i > 0 && active != prev) flip = 0.5 * (ax[i - 1] + ax[i]);
            prev = active;
        }
        return flip;
    };
    auto bc = locate(coarse);
    auto bf = locate(fine);
    if (!bc || !bf) return; // no contact set on one grid: nothing to compare
    double cell = 0.0;
    const auto& ax = coarse.grid.axes[0];
    for (std::size_t i = 1; i < ax.size(); ++i) cell = std::max(cell, ax[i] - ax[i - 1]);
    if (std::abs(*bc - *bf) > 2.0 * cell)
        fail(ErrorCategory::GridTooCoarse,
             "free boundary moved by more than two cells under refinement");
}

// --- LSMC -------------------------------------------------------------------

namespace {

// slab-crossing bookkeeping shared by training and resimulation walks
struct SlabObserver {
    const std::vector<double>* slab_times;
    const ScalarField* f;
    int d = 1;
    std::size_t next = 1; // slab 0 is the start point

    std::vector<double>* xs = nullptr; // training storage (stride d per slab)
    std::vector<double>* expD = nullptr;
    std::vector<double>* fcost = nullptr; // bucket k covers (t_k, t_{k+1}]

    // resimulation hook: return true to stop the walk at the slab crossing
    std::function<bool(std::size_t, double, std::span<const double>, double)> decide;
    bool stopped = false;

    bool segment(double t0, std::span<const double> xa, double D0, double t1,
                 std::span<const double> xb, double D1, bool) {
        double v0 = std::exp(-D0) * (*f)(t0, xa);
        double v1 = std::exp(-D1) * (*f)(t1, xb);
        double seg_len = t1 - t0;
        double prev_t = t0;
        double prev_v = v0;

        double xq[8];
        while (next < slab_times->size() && (*slab_times)[next] <= t1 + 1e-12) {
            double ts = (*slab_times)[next];
            double theta = seg_len > 0.0 ? std::clamp((ts - t0) / seg_len, 0.0, 1.0) : 0.0;
            for (int i = 0; i < d; ++i) xq[i] = xa[i] + theta * (xb[i] - xa[i]);
            double Ds = D0 + theta * (D1 - D0);
            double vs = v0 + theta * (v1 - v0);
            (*fcost)[next - 1] += (ts - prev_t) * 0.5 * (prev_v + vs);
            prev_t = ts;
            prev_v = vs;

            std::span<const double> xqs(xq, static_cast<std::size_t>(d));
            if (xs) {
                xs->insert(xs->end(), xqs.begin(), xqs.end());
                expD->push_back(std::exp(-Ds));
            }
            if (decide && decide(next, ts, xqs, Ds)) {
                stopped = true;
                ++next;
                return false;
            }
            ++next;
        }
        if (next - 1 < fcost->size())
            (*fcost)[next - 1] += (t1 - prev_t) * 0.5 * (prev_v + v1);
        return true;
    }
};

struct TrainPathData {
    std::vector<double> xs; // recorded slabs, stride d, slab 0 first
    std::vector<double> expD;
    std::vector<double> fcost;
    double exit_cf = 0.0;
    int exit_bucket = -1; // k: exit in (t_k, t_{k+1}]; n_slabs = reached terminal
};

struct LsmcCore {
    const DiffusionModel* model;
    const DomainSpec* domain;
    const ScalarField* f;
    const ScalarField* g;
    std::function<double(std::span<const double>)> terminal;
    const ScalarField* psi;
    double t0;
    std::span<const double> x0;
    Variant variant;
    Scenario scenario;
    SimConfig sim; // t_max spans exactly the slab grid
    std::vector<double> slab_times;

    Gamma0Policy g0policy() const {
        return scenario == Scenario::B ? Gamma0Policy::ExitTau : Gamma0Policy::DiagnosticOnly;
    }

    int n_slabs() const { return static_cast<int>(slab_times.size()) - 1; }

    const ExitRecord& chosen_exit(const PathOutcome& outcome) const {
        if (variant == Variant::Tau && outcome.tau_exit) return *outcome.tau_exit;
        return *outcome.lambda_exit;
    }

    int exit_bucket_of(double exit_time) const {
        double delta = slab_times[1] - slab_times[0];
        int bucket = static_cast<int>(std::floor((exit_time - t0 - 1e-12) / delta));
        return std::clamp(bucket, 0, n_slabs() - 1);
    }

    TrainPathData run_training_path(std::uint64_t stream_index) const {
        TrainPathData out;
        const int d = model->d;
        out.fcost.assign(static_cast<std::size_t>(n_slabs()), 0.0);
        out.xs.reserve(static_cast<std::size_t>(n_slabs() + 1) * d);
        out.xs.insert(out.xs.end(), x0.begin(), x0.end());
        out.expD.push_back(1.0);

        PathNoise noise(sim.seed, stream_index);
        SlabObserver obs;
        obs.slab_times = &slab_times;
        obs.f = f;
        obs.d = d;
        obs.xs = &out.xs;
        obs.expD = &out.expD;
        obs.fcost = &out.fcost;
        auto outcome = walk_path(*model, *domain, x0, t0, sim, noise, variant == Variant::Tau,
                                 obs, g0policy());

        const ExitRecord& exit = chosen_exit(outcome);
        if (exit.face == ExitFace::Horizon) {
            if (static_cast<int>(out.expD.size()) < n_slabs() + 1) {
                out.xs.insert(out.xs.end(), exit.point.begin(), exit.point.end());
                out.expD.push_back(std::exp(-exit.discount));
            }
            out.exit_bucket = n_slabs();
            out.exit_cf = std::exp(-exit.discount) * terminal(exit.point);
        } else {
            if (exit.face == ExitFace::Gamma0 && !g->covers_gamma0())
                fail(ErrorCategory::BoundaryDataMissing,
                     "path exited through Gamma0 but g is declared on Gamma1 only");
            out.exit_bucket = exit_bucket_of(exit.time);
            out.exit_cf = std::exp(-exit.discount) * (*g)(exit.time, exit.point);
        }
        return out;
    }

    // value of one fresh path under a policy (slab-indexed decisions)
    double resimulate_path(const StoppingPolicy& policy, std::uint64_t stream_index,
                           std::uint64_t seed) const {
        const int d = model->d;
        std::vector<double> fcost(static_cast<std::size_t>(n_slabs()), 0.0);
        double stop_value = 0.0;
        bool have_stop = false;

        SimConfig rs = sim;
        rs.seed = seed;
        PathNoise noise(rs.seed, stream_index);
        SlabObserver obs;
        obs.slab_times = &slab_times;
        obs.f = f;
        obs.d = d;
        obs.fcost = &fcost;
        obs.decide = [&](std::size_t slab, double ts, std::span<const double> xq, double Ds) {
            if (slab >= slab_times.size() - 1) return false; // terminal handled by the exit
            if (!policy.should_stop(ts, xq)) return false;
            stop_value = std::exp(-Ds) * (*psi)(ts, xq);
            have_stop = true;
            return true;
        };
        auto outcome = walk_path(*model, *domain, x0, t0, rs, noise, variant == Variant::Tau,
                                 obs, g0policy());

        double total = 0.0;
        for (double v : fcost) total += v;
        if (have_stop) return total + stop_value;

        const ExitRecord& exit = chosen_exit(outcome);
        if (exit.face == ExitFace::Horizon)
            return total + std::exp(-exit.discount) * terminal(exit.point);
        if (exit.face == ExitFace::Gamma0 && !g->covers_gamma0())
            fail(ErrorCategory::BoundaryDataMissing,
                 "path exited through Gamma0 but g is declared on Gamma1 only");
        return total + std::exp(-exit.discount) * (*g)(exit.time, exit.point);
    }
};

LsmcResult run_lsmc(const LsmcCore& core, const LsmcConfig& cfg) {
    LsmcResult result{.estimate = {}, .regression_value = 0.0,
                      .policy = StoppingPolicy::never(), .warnings = {}};
    const int d = core.model->d;
    const int n = core.n_slabs();
    int degree = cfg.basis_degree > 0 ? cfg.basis_degree : (d == 1 ? 5 : 3);

    // --- training pass -----------------------------------------------------
    std::vector<TrainPathData> paths(static_cast<std::size_t>(cfg.n_train));
    double x_scale = 0.0;
    for (long p = 0; p < cfg.n_train; ++p) {
        paths[static_cast<std::size_t>(p)] =
            core.run_training_path(static_cast<std::uint64_t>(p));
        for (double v : paths[static_cast<std::size_t>(p)].xs)
            x_scale = std::max(x_scale, std::abs(v));
    }
    if (x_scale <= 0.0) x_scale = 1.0;

    // --- backward regression over the slab grid ----------------------------
    // V[p]: value from the current decision slab onward, discounted to start
    std::vector<double> V(static_cast<std::size_t>(cfg.n_train), 0.0);
    for (long p = 0; p < cfg.n_train; ++p)
        if (paths[static_cast<std::size_t>(p)].exit_bucket == n)
            V[static_cast<std::size_t>(p)] = paths[static_cast<std::size_t>(p)].exit_cf;

    std::vector<std::vector<double>> slab_coeffs(static_cast<std::size_t>(n));
    std::vector<int> slab_degrees(static_cast<std::size_t>(n), 0);
    std::vector<double> phi, gram, rhs, coeffs, cont(static_cast<std::size_t>(cfg.n_train));
    bool warned = false;

    for (int k = n - 1; k >= 1; --k) {
        double ts = core.slab_times[static_cast<std::size_t>(k)];

        // roll values back across bucket k; collect the regression set
        std::vector<long> alive;
        for (long p = 0; p < cfg.n_train; ++p) {
            const auto& pd = paths[static_cast<std::size_t>(p)];
            if (pd.exit_bucket < k) continue;
            double c = pd.fcost[static_cast<std::size_t>(k)] +
                       (pd.exit_bucket == k ? pd.exit_cf : V[static_cast<std::size_t>(p)]);
            cont[static_cast<std::size_t>(p)] = c;
            alive.push_back(p);
        }
        // whatever the decision outcome, values must cross the bucket
        auto hold = [&] {
            for (long p : alive)
                V[static_cast<std::size_t>(p)] = cont[static_cast<std::size_t>(p)];
        };
        if (alive.empty()) continue;

        int deg_k = degree;
        std::vector<double>& ck = slab_coeffs[static_cast<std::size_t>(k)];
        while (deg_k >= 1) {
            int nb = basis_size(deg_k, d);
            gram.assign(static_cast<std::size_t>(nb) * nb, 0.0);
            rhs.assign(static_cast<std::size_t>(nb), 0.0);
            long used = 0;
            for (long p : alive) {
                const auto& pd = paths[static_cast<std::size_t>(p)];
                std::span<const double> xk(pd.xs.data() + static_cast<std::size_t>(k) * d,
                                           static_cast<std::size_t>(d));
                double pv = (*core.psi)(ts, xk);
                if (cfg.itm_only && pv <= 0.0) continue;
                double w = pd.expD[static_cast<std::size_t>(k)];
                double y = cont[static_cast<std::size_t>(p)] / w; // value at the slab
                basis_eval(xk, x_scale, deg_k, d, phi);
                for (int i = 0; i < nb; ++i) {
                    rhs[static_cast<std::size_t>(i)] += phi[static_cast<std::size_t>(i)] * y;
                    for (int j = 0; j <= i; ++j)
                        gram[static_cast<std::size_t>(i) * nb + j] +=
                            phi[static_cast<std::size_t>(i)] * phi[static_cast<std::size_t>(j)];
                }
                ++used;
            }
            if (used < 2 * nb) {
                --deg_k;
                continue;
            }
            for (int i = 0; i < nb; ++i)
                for (int j = i + 1; j < nb; ++j)
                    gram[static_cast<std::size_t>(i) * nb + j] =
                        gram[static_cast<std::size_t>(j) * nb + i];
            if (solve_normal_equations(gram, rhs, nb, coeffs)) {
                ck = coeffs;
                slab_degrees[static_cast<std::size_t>(k)] = deg_k;
                break;
            }
            --deg_k;
        }
        if (ck.empty()) { // no usable regression: never exercise at this slab
            hold();
            continue;
        }
        if (deg_k < degree && !warned) {
            result.warnings.push_back(
                "regression ill-conditioned at some slabs; basis degree reduced");
            warned = true;
        }

        // apply the decision
        for (long p : alive) {
            const auto& pd = paths[static_cast<std::size_t>(p)];
            std::span<const double> xk(pd.xs.data() + static_cast<std::size_t>(k) * d,
                                       static_cast<std::size_t>(d));
            double pv = (*core.psi)(ts, xk);
            if (cfg.itm_only && pv <= 0.0) {
                V[static_cast<std::size_t>(p)] = cont[static_cast<std::size_t>(p)];
                continue;
            }
            double w = pd.expD[static_cast<std::size_t>(k)];
            basis_eval(xk, x_scale, deg_k, d, phi);
            double fit = 0.0;
            for (std::size_t i = 0; i < ck.size(); ++i) fit += ck[i] * phi[i];
            V[static_cast<std::size_t>(p)] =
                (pv >= fit) ? w * pv : cont[static_cast<std::size_t>(p)];
        }
    }

    // slab 0: every path is at the same state; continuation is a plain mean
    double cont0 = 0.0;
    for (long p = 0; p < cfg.n_train; ++p) {
        const auto& pd = paths[static_cast<std::size_t>(p)];
        cont0 += pd.fcost[0] + (pd.exit_bucket == 0 ? pd.exit_cf : V[static_cast<std::size_t>(p)]);
    }
    cont0 /= static_cast<double>(cfg.n_train);
    double psi0 = (*core.psi)(core.t0, core.x0);
    result.regression_value = std::max(psi0, cont0);
    std::vector<std::vector<double>> policy_coeffs(slab_coeffs);
    policy_coeffs[0] = {cont0};
    slab_degrees[0] = 0;

    result.policy =
        StoppingPolicy::regression(core.slab_times, std::move(policy_coeffs),
                                   std::move(slab_degrees), *core.psi, d, cfg.itm_only, x_scale);

    // --- resimulation under the learned policy (low-biased headline) --------
    if (result.policy.should_stop(core.t0, core.x0)) {
        result.estimate.mean = psi0;
        result.estimate.n_paths = cfg.est.n_paths;
        result.estimate.ci95_lo = result.estimate.ci95_hi = psi0;
        return result;
    }
    std::uint64_t resim_seed = core.sim.seed ^ 0x9e3779b97f4a7c15ull;
    auto acc = run_batched(cfg.est.n_paths, cfg.est.threads, [&](long p) {
        return core.resimulate_path(result.policy, static_cast<std::uint64_t>(p), resim_seed);
    });
    result.estimate.mean = acc.mean;
    result.estimate.std_error = acc.std_error();
    result.estimate.n_paths = cfg.est.n_paths;
    result.estimate.ci95_lo = acc.mean - 1.96 * result.estimate.std_error;
    result.estimate.ci95_hi = acc.mean + 1.96 * result.estimate.std_error;
    return result;
}

LsmcCore make_core(const DiffusionModel& model, const DomainSpec& domain, const ProblemSpec& spec,
                   double t, std::span<const double> x, const LsmcConfig& cfg, double horizon,
                   Scenario scenario) {
    LsmcCore core;
    core.model = &model;
    core.domain = &domain;
    core.f = &spec.f;
    core.g = &spec.g;
    core.psi = &*spec.psi;
    core.t0 = t;
    core.x0 = x;
    core.variant = spec.variant;
    core.scenario = scenario;
    core.sim = cfg.est.sim;
    core.sim.t_max = horizon;
    core.sim.dt = std::min(core.sim.dt, horizon / cfg.n_slabs);
    core.slab_times.resize(static_cast<std::size_t>(cfg.n_slabs) + 1);
    for (int k = 0; k <= cfg.n_slabs; ++k)
        core.slab_times[static_cast<std::size_t>(k)] = t + horizon * k / cfg.n_slabs;
    return core;
}

} // namespace

LsmcResult lsmc_value(const DiffusionModel& model, const DomainSpec& domain,
                      const ProblemSpec& spec, double t, std::span<const double> x,
                      const LsmcConfig& cfg) {
    if (spec.kind != ProblemKind::ParabolicObstacle)
        fail(ErrorCategory::ParamOutOfRange, "lsmc_value expects a parabolic obstacle spec");
    if (!spec.psi) fail(ErrorCategory::Compatibility, "lsmc_value requires psi");
    if (t < 0.0 || t >= spec.T) fail(ErrorCategory::OutOfRange, "query time outside [0, T)");
    auto scenario = classify_origin(model, default_probe_b(model, domain)).scenario;
    spec.validate(model, domain, scenario);

    auto core = make_core(model, domain, spec, t, x, cfg, spec.T - t, scenario);
    core.terminal = [&spec](std::span<const double> xt) { return spec.g(spec.T, xt); };
    return run_lsmc(core, cfg);
}

LsmcResult elliptic_obstacle_value(const DiffusionModel& model, const DomainSpec& domain,
                                   const ProblemSpec& spec, std::span<const double> x,
                                   const LsmcConfig& cfg) {
    if (spec.kind != ProblemKind::EllipticObstacle)
        fail(ErrorCategory::ParamOutOfRange,
             "elliptic_obstacle_value expects an elliptic obstacle spec");
    if (!spec.psi) fail(ErrorCategory::Compatibility, "elliptic obstacle requires psi");
    auto scenario = classify_origin(model, default_probe_b(model, domain)).scenario;
    spec.validate(model, domain, scenario);

    double horizon = cfg.est.sim.t_max;
    auto core = make_core(model, domain, spec, 0.0, x, cfg, horizon, scenario);
    // truncated-horizon reduction: terminal value max(psi, 0); discounting at
    // rate >= c0 certifies the dropped tail
    const ScalarField& psi = *spec.psi;
    core.terminal = [&psi](std::span<const double> xt) {
        return std::max(psi(0.0, xt), 0.0);
    };
    auto result = run_lsmc(core, cfg);
    result.estimate.truncation_bias_bound =
        elliptic_truncation_bound(model, domain, spec, x, horizon);
    return result;
}

Estimate evaluate_policy(const DiffusionModel& model, const DomainSpec& domain,
                         const ProblemSpec& spec, double t, std::span<const double> x,
                         const StoppingPolicy& policy, const EstimatorConfig& cfg) {
    if (!spec.psi) fail(ErrorCategory::Compatibility, "policy evaluation requires psi");
    auto scenario = classify_origin(model, default_probe_b(model, domain)).scenario;

    bool parabolic = is_parabolic(spec.kind);
    double horizon = parabolic ? spec.T - t : cfg.sim.t_max;

    if (policy.kind() == StoppingPolicy::Kind::Regression) {
        LsmcConfig lc;
        lc.est = cfg;
        lc.n_slabs = static_cast<int>(policy.time_grid().size()) - 1;
        auto core = make_core(model, domain, spec, t, x, lc, horizon, scenario);
        if (parabolic) {
            core.terminal = [&spec](std::span<const double> xt) { return spec.g(spec.T, xt); };
        } else {
            const ScalarField& psi = *spec.psi;
            core.terminal = [&psi](std::span<const double> xt) {
                return std::max(psi(0.0, xt), 0.0);
            };
        }
        core.slab_times = policy.time_grid();

        if (policy.should_stop(t, x)) {
            Estimate e;
            e.mean = (*spec.psi)(t, x);
            e.n_paths = cfg.n_paths;
            e.ci95_lo = e.ci95_hi = e.mean;
            return e;
        }
        std::uint64_t resim_seed = cfg.sim.seed ^ 0x9e3779b97f4a7c15ull;
        auto acc = run_batched(cfg.n_paths, cfg.threads, [&](long p) {
            return core.resimulate_path(policy, static_cast<std::uint64_t>(p), resim_seed);
        });
        Estimate e;
        e.mean = acc.mean;
        e.std_error = acc.std_error();
        e.n_paths = cfg.n_paths;
        e.ci95_lo = e.mean - 1.96 * e.std_error;
        e.ci95_hi = e.mean + 1.96 * e.std_error;
        if (!parabolic)
            e.truncation_bias_bound = elliptic_truncation_bound(model, domain, spec, x, horizon);
        return e;
    }

    return j_functional(model, domain, spec, t, x, policy.as_rule(), cfg);
}

} // namespace fkd
