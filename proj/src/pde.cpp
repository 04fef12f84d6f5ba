#include "fkd/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace fkd {

namespace {

std::vector<double> graded_axis(double lo, double hi, int n, double ratio_max,
                                double first_cell_max) {
    if (n < 2) fail(ErrorCategory::ParamOutOfRange, "grid axis needs at least 2 nodes");
    double extent = hi - lo;
    int cells = n - 1;
    double uniform = extent / cells;
    if (uniform <= first_cell_max || ratio_max <= 1.0) {
        std::vector<double> nodes(n);
        for (int i = 0; i < n; ++i) nodes[i] = lo + extent * i / cells;
        nodes.front() = lo;
        nodes.back() = hi;
        return nodes;
    }
    // smallest ratio in (1, ratio_max] whose first cell meets the cap
    auto first_cell = [&](double r) { return extent * (r - 1.0) / (std::pow(r, cells) - 1.0); };
    double r_lo = 1.0 + 1e-9, r_hi = ratio_max;
    double r = ratio_max;
    if (first_cell(r_hi) <= first_cell_max) {
        for (int it = 0; it < 80; ++it) {
            double mid = 0.5 * (r_lo + r_hi);
            if (first_cell(mid) <= first_cell_max)
                r_hi = mid;
            else
                r_lo = mid;
        }
        r = r_hi;
    }
    double h0 = first_cell(r);
    std::vector<double> nodes(n);
    nodes[0] = lo;
    double h = h0;
    for (int i = 1; i < n; ++i) {
        nodes[i] = nodes[i - 1] + h;
        h *= r;
    }
    // normalize the accumulated endpoint exactly onto hi
    double scale = extent / (nodes.back() - lo);
    for (int i = 1; i < n; ++i) nodes[i] = lo + (nodes[i] - lo) * scale;
    nodes.back() = hi;
    return nodes;
}

} // namespace

double Grid::max_cell() const {
    double h = 0.0;
    for (const auto& ax : axes)
        for (std::size_t i = 1; i < ax.size(); ++i) h = std::max(h, ax[i] - ax[i - 1]);
    return h;
}

Grid build_grid(const DomainSpec& domain, const GridSpec& spec) {
    int d = domain.dim();
    if (static_cast<int>(spec.nodes_per_axis.size()) != d)
        fail(ErrorCategory::ParamOutOfRange, "nodes_per_axis size mismatch");

    Grid g;
    g.dim = d;
    g.axes.resize(d);
    std::vector<bool> far_lo(d, false), far_hi(d, false);

    for (int i = 0; i < d; ++i) {
        double lo = domain.box[i].lo;
        double hi = domain.box[i].hi;
        if (!std::isfinite(lo)) {
            lo = (i < static_cast<int>(spec.truncation_lo.size())) ? spec.truncation_lo[i] : -4.0;
            far_lo[i] = true;
        }
        if (!std::isfinite(hi)) {
            hi = (i < static_cast<int>(spec.truncation_hi.size())) ? spec.truncation_hi[i] : 4.0;
            far_hi[i] = true;
        }
        if (i == d - 1) {
            double cap = spec.first_cell_frac * (hi - lo);
            g.axes[i] = graded_axis(lo, hi, spec.nodes_per_axis[i], spec.grading_ratio_max, cap);
        } else {
            g.axes[i] = graded_axis(lo, hi, spec.nodes_per_axis[i], 1.0, kInf);
        }
    }

    g.strides.assign(d, 1);
    for (int i = d - 2; i >= 0; --i)
        g.strides[i] = g.strides[i + 1] * static_cast<long>(g.axes[i + 1].size());
    g.n_nodes = g.strides[0] * static_cast<long>(g.axes[0].size());

    g.node_types.assign(static_cast<std::size_t>(g.n_nodes), NodeType::Interior);
    std::vector<int> idx(d);
    for (long k = 0; k < g.n_nodes; ++k) {
        g.unflatten(k, idx);
        NodeType t = NodeType::Interior;
        bool on_bottom = false;
        for (int i = 0; i < d; ++i) {
            int last = static_cast<int>(g.axes[i].size()) - 1;
            if (idx[i] == 0) {
                if (i == d - 1) {
                    on_bottom = true;
                } else {
                    t = far_lo[i] ? NodeType::FarFieldFace : NodeType::Gamma1Face;
                }
            }
            if (idx[i] == last) {
                NodeType side = far_hi[i] ? NodeType::FarFieldFace : NodeType::Gamma1Face;
                if (t == NodeType::Interior || side == NodeType::Gamma1Face) t = side;
            }
        }
        if (on_bottom && t == NodeType::Interior) t = NodeType::Gamma0Face;
        g.node_types[static_cast<std::size_t>(k)] = t;
    }
    return g;
}

void DiscreteOperator::apply(std::span<const double> u, std::span<double> out) const {
    for (long i = 0; i < n; ++i) {
        double v = 0.0;
        for (long p = row_ptr[i]; p < row_ptr[i + 1]; ++p) v += val[p] * u[col[p]];
        out[i] = v;
    }
}

namespace {

struct RowBuilder {
    std::map<long, double> entries;
    void add(long c, double v) { entries[c] += v; }
};

} // namespace

DiscreteOperator discretize(const DiffusionModel& model, const Grid& grid, Scenario scenario) {
    const int d = grid.dim;
    DiscreteOperator op;
    op.n = grid.n_nodes;
    op.row_ptr.reserve(grid.n_nodes + 1);
    op.row_ptr.push_back(0);

    std::vector<int> idx(d);
    std::vector<double> x(d), b(d), a(static_cast<std::size_t>(d) * d);

    for (long k = 0; k < grid.n_nodes; ++k) {
        grid.unflatten(k, idx);
        grid.point(idx, x);
        NodeType type = grid.node_types[static_cast<std::size_t>(k)];

        RowBuilder row;
        if (type == NodeType::Gamma1Face || type == NodeType::FarFieldFace ||
            (type == NodeType::Gamma0Face && scenario == Scenario::B)) {
            row.add(k, 1.0); // Dirichlet row
        } else {
            bool gamma0 = type == NodeType::Gamma0Face;
            model.drift_into(x, b);
            if (gamma0) {
                std::fill(a.begin(), a.end(), 0.0); // x_d^beta factor vanishes
            } else {
                model.a_into(x, a);
            }
            double cx = model.killing_at(x);
            row.add(k, cx);

            auto h_minus = [&](int ax) {
                return idx[ax] > 0 ? grid.axes[ax][idx[ax]] - grid.axes[ax][idx[ax] - 1] : 0.0;
            };
            auto h_plus = [&](int ax) {
                int last = static_cast<int>(grid.axes[ax].size()) - 1;
                return idx[ax] < last ? grid.axes[ax][idx[ax] + 1] - grid.axes[ax][idx[ax]] : 0.0;
            };

            // diffusion: second differences along each axis
            for (int ax = 0; ax < d; ++ax) {
                double aii = a[ax * d + ax];
                if (aii == 0.0) continue;
                double hm = h_minus(ax), hp = h_plus(ax);
                if (hm == 0.0 || hp == 0.0)
                    fail(ErrorCategory::NonMonotoneStencil,
                         "diffusion stencil reaches outside the grid");
                double wm = 2.0 / (hm * (hm + hp));
                double wp = 2.0 / (hp * (hm + hp));
                row.add(k - grid.strides[ax], -0.5 * aii * wm);
                row.add(k + grid.strides[ax], -0.5 * aii * wp);
                row.add(k, 0.5 * aii * (wm + wp));
            }

            // cross terms: sign-adapted 7-point stencils
            for (int ai = 0; ai < d; ++ai) {
                for (int aj = ai + 1; aj < d; ++aj) {
                    double aij = a[ai * d + aj];
                    if (aij == 0.0) continue;
                    double hmi = h_minus(ai), hpi = h_plus(ai);
                    double hmj = h_minus(aj), hpj = h_plus(aj);
                    if (hmi == 0.0 || hpi == 0.0 || hmj == 0.0 || hpj == 0.0)
                        fail(ErrorCategory::NonMonotoneStencil,
                             "cross stencil reaches outside the grid");
                    long si = grid.strides[ai], sj = grid.strides[aj];
                    // operator carries -a_ij * D_ij (pair counted twice in the trace)
                    if (aij > 0.0) {
                        double wpp = 1.0 / (2.0 * hpi * hpj), wmm = 1.0 / (2.0 * hmi * hmj);
                        row.add(k + si + sj, -aij * wpp);
                        row.add(k - si - sj, -aij * wmm);
                        row.add(k + si, aij * wpp);
                        row.add(k + sj, aij * wpp);
                        row.add(k - si, aij * wmm);
                        row.add(k - sj, aij * wmm);
                        row.add(k, -aij * (wpp + wmm));
                    } else {
                        double wpm = 1.0 / (2.0 * hpi * hmj), wmp = 1.0 / (2.0 * hmi * hpj);
                        row.add(k + si - sj, aij * wpm);
                        row.add(k - si + sj, aij * wmp);
                        row.add(k + si, -aij * wpm);
                        row.add(k - sj, -aij * wpm);
                        row.add(k - si, -aij * wmp);
                        row.add(k + sj, -aij * wmp);
                        row.add(k, aij * (wpm + wmp));
                    }
                }
            }

            // drift: centered where the sign pattern survives, else upwind
            for (int ax = 0; ax < d; ++ax) {
                double bax = b[ax];
                if (bax == 0.0) continue;
                double hm = h_minus(ax), hp = h_plus(ax);
                long s = grid.strides[ax];
                bool can_center = hm > 0.0 && hp > 0.0;
                if (can_center) {
                    double cm = bax * hp / (hm * (hm + hp));
                    double cp = -bax * hm / (hp * (hm + hp));
                    double cc = -bax * (hp - hm) / (hm * hp);
                    double off_m = row.entries.count(k - s) ? row.entries[k - s] : 0.0;
                    double off_p = row.entries.count(k + s) ? row.entries[k + s] : 0.0;
                    if (off_m + cm <= 1e-14 && off_p + cp <= 1e-14) {
                        row.add(k - s, cm);
                        row.add(k + s, cp);
                        row.add(k, cc);
                        continue;
                    }
                }
                if (bax > 0.0) {
                    if (hp == 0.0)
                        fail(ErrorCategory::NonMonotoneStencil, "upwind stencil leaves the grid");
                    row.add(k + s, -bax / hp);
                    row.add(k, bax / hp);
                } else {
                    if (hm == 0.0)
                        fail(ErrorCategory::NonMonotoneStencil, "upwind stencil leaves the grid");
                    row.add(k - s, bax / hm);
                    row.add(k, -bax / hm);
                }
            }

            // monotone-matrix safeguard
            double diag = row.entries.count(k) ? row.entries[k] : 0.0;
            double scale = std::abs(diag);
            for (const auto& [c, v] : row.entries) {
                if (c == k) continue;
                if (v > 1e-12 * std::max(1.0, scale)) {
                    char buf[160];
                    std::snprintf(buf, sizeof(buf),
                                  "positive off-diagonal %.3e at node %ld (x_d=%.5g); refine the "
                                  "grid aspect or reduce the correlation",
                                  v, k, x[d - 1]);
                    fail(ErrorCategory::NonMonotoneStencil, buf);
                }
            }
            if (diag <= 0.0)
                fail(ErrorCategory::NonMonotoneStencil, "non-positive diagonal in assembled row");
        }

        for (const auto& [c, v] : row.entries) {
            op.col.push_back(c);
            op.val.push_back(v);
        }
        op.row_ptr.push_back(static_cast<long>(op.col.size()));
    }
    return op;
}

namespace {

struct AssembledSystem {
    DiscreteOperator op;
    std::vector<double> diag;
    std::vector<std::uint8_t> dirichlet;
};

AssembledSystem assemble(const DiffusionModel& model, const Grid& grid, Scenario scenario) {
    AssembledSystem sys;
    sys.op = discretize(model, grid, scenario);
    sys.diag.assign(static_cast<std::size_t>(sys.op.n), 0.0);
    sys.dirichlet.assign(static_cast<std::size_t>(sys.op.n), 0);
    for (long i = 0; i < sys.op.n; ++i) {
        NodeType t = grid.node_types[static_cast<std::size_t>(i)];
        bool dir = t == NodeType::Gamma1Face || t == NodeType::FarFieldFace ||
                   (t == NodeType::Gamma0Face && scenario == Scenario::B);
        sys.dirichlet[static_cast<std::size_t>(i)] = dir ? 1 : 0;
        for (long p = sys.op.row_ptr[i]; p < sys.op.row_ptr[i + 1]; ++p)
            if (sys.op.col[p] == i) sys.diag[static_cast<std::size_t>(i)] = sys.op.val[p];
    }
    return sys;
}

// Dirichlet data at a face node, honoring the far-field override.
double boundary_value(const ProblemSpec& spec, const SolverOptions& opt, NodeType type, double t,
                      std::span<const double> x) {
    if (type == NodeType::FarFieldFace && opt.far_field) return (*opt.far_field)(t, x);
    return spec.g(t, x);
}

double sor_sweep(const AssembledSystem& sys, std::span<double> u, std::span<const double> rhs,
                 double omega, const double* psi) {
    const auto& op = sys.op;
    double max_delta = 0.0;
    for (long i = 0; i < op.n; ++i) {
        if (sys.dirichlet[static_cast<std::size_t>(i)]) continue;
        double sum = 0.0;
        for (long p = op.row_ptr[i]; p < op.row_ptr[i + 1]; ++p) {
            long c = op.col[p];
            if (c != i) sum += op.val[p] * u[c];
        }
        double gs = (rhs[i] - sum) / sys.diag[static_cast<std::size_t>(i)];
        double unew = u[i] + omega * (gs - u[i]);
        if (psi) unew = std::max(unew, psi[i]); // projection onto the obstacle
        max_delta = std::max(max_delta, std::abs(unew - u[i]));
        u[i] = unew;
    }
    return max_delta;
}

double residual_inf(const AssembledSystem& sys, std::span<const double> u,
                    std::span<const double> rhs, const double* psi) {
    double r = 0.0;
    for (long i = 0; i < sys.op.n; ++i) {
        if (sys.dirichlet[static_cast<std::size_t>(i)]) continue;
        double v = 0.0;
        for (long p = sys.op.row_ptr[i]; p < sys.op.row_ptr[i + 1]; ++p)
            v += sys.op.val[p] * u[sys.op.col[p]];
        double res = v - rhs[i];
        if (psi) res = std::min(res, u[i] - psi[i]); // complementarity residual
        r = std::max(r, std::abs(res));
    }
    return r;
}

struct IterationResult {
    long iterations = 0;
    double residual = 0.0;
};

IterationResult iterate(const AssembledSystem& sys, std::span<double> u,
                        std::span<const double> rhs, const SolverOptions& opt,
                        const double* psi, double rhs_scale) {
    IterationResult out;
    double target = opt.tol * std::max(1.0, rhs_scale);
    double prev_res = kInf;
    for (long it = 1; it <= opt.max_iterations; ++it) {
        double delta = sor_sweep(sys, u, rhs, opt.omega, psi);
        out.iterations = it;
        if (delta < 0.02 * target || it % 64 == 0 || it == opt.max_iterations) {
            double res = residual_inf(sys, u, rhs, psi);
            out.residual = res;
            if (!std::isfinite(res) || res > 1e6 * std::max(1.0, prev_res))
                fail(ErrorCategory::SolverDiverged, "relaxation diverged");
            if (res <= target) return out;
            prev_res = std::min(prev_res, res);
        }
    }
    fail(ErrorCategory::MaxIterations, "relaxation did not reach tolerance within the budget");
}

} // namespace

namespace {

// multilinear interpolation of nodal values over the tensor grid
double interp_values(const Grid& grid, std::span<const double> values,
                     std::span<const double> x) {
    const int d = grid.dim;
    int base[8];
    double w[8];
    for (int i = 0; i < d; ++i) {
        const auto& ax = grid.axes[i];
        double xi = std::clamp(x[i], ax.front(), ax.back());
        auto it = std::upper_bound(ax.begin(), ax.end(), xi);
        int j = static_cast<int>(std::clamp<std::ptrdiff_t>(
            it - ax.begin() - 1, 0, static_cast<std::ptrdiff_t>(ax.size()) - 2));
        base[i] = j;
        w[i] = (xi - ax[j]) / (ax[j + 1] - ax[j]);
    }
    double v = 0.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
        double weight = 1.0;
        long k = 0;
        for (int i = 0; i < d; ++i) {
            bool hi = corner & (1 << i);
            weight *= hi ? w[i] : 1.0 - w[i];
            k += grid.strides[i] * (base[i] + (hi ? 1 : 0));
        }
        v += weight * values[static_cast<std::size_t>(k)];
    }
    return v;
}

} // namespace

double PdeSolution::value_at(std::span<const double> x) const {
    return interp_values(grid, values, x);
}

double PdeSolution::value_at(double t, std::span<const double> x) const {
    if (slabs.empty()) return value_at(x);
    auto it = std::upper_bound(slab_times.begin(), slab_times.end(), t);
    int j = static_cast<int>(std::clamp<std::ptrdiff_t>(
        it - slab_times.begin() - 1, 0, static_cast<std::ptrdiff_t>(slab_times.size()) - 2));
    double t0 = slab_times[j], t1 = slab_times[j + 1];
    double theta = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    double v0 = interp_values(grid, slabs[static_cast<std::size_t>(j)], x);
    double v1 = interp_values(grid, slabs[static_cast<std::size_t>(j) + 1], x);
    return (1.0 - theta) * v0 + theta * v1;
}

PdeSolution solve_elliptic(const DiffusionModel& model, const DomainSpec& domain,
                           const ProblemSpec& spec, const Grid& grid, const SolverOptions& opt) {
    auto scenario = classify_origin(model, default_probe_b(model, domain)).scenario;
    auto sys = assemble(model, grid, scenario);

    PdeSolution sol;
    sol.grid = grid;
    sol.values.assign(static_cast<std::size_t>(grid.n_nodes), 0.0);
    std::vector<double> rhs(static_cast<std::size_t>(grid.n_nodes), 0.0);

    const int d = grid.dim;
    std::vector<int> idx(d);
    std::vector<double> x(d);
    double rhs_scale = 0.0;
    for (long k = 0; k < grid.n_nodes; ++k) {
        grid.unflatten(k, idx);
        grid.point(idx, x);
        NodeType type = grid.node_types[static_cast<std::size_t>(k)];
        if (sys.dirichlet[static_cast<std::size_t>(k)]) {
            double gv = boundary_value(spec, opt, type, 0.0, x);
            rhs[static_cast<std::size_t>(k)] = gv;
            sol.values[static_cast<std::size_t>(k)] = gv; // Dirichlet nodes carry the data exactly
        } else {
            rhs[static_cast<std::size_t>(k)] = spec.f(0.0, x);
        }
        rhs_scale = std::max(rhs_scale, std::abs(rhs[static_cast<std::size_t>(k)]));
    }

    auto it = iterate(sys, sol.values, rhs, opt, nullptr, rhs_scale);
    sol.iterations = it.iterations;
    sol.residual_norm = it.residual;
    return sol;
}

namespace {

PdeSolution march_parabolic(const DiffusionModel& model, const DomainSpec& domain,
                            const ProblemSpec& spec, const Grid& grid, const SolverOptions& opt,
                            bool obstacle) {
    if (opt.theta < 0.5 || opt.theta > 1.0)
        fail(ErrorCategory::ParamOutOfRange, "time scheme theta must lie in [0.5, 1]");
    auto scenario = classify_origin(model, default_probe_b(model, domain)).scenario;
    auto sys = assemble(model, grid, scenario);

    const double T = spec.T;
    const int steps = opt.time_steps;
    const double dt = T / steps;
    const double th = opt.theta;
    const int d = grid.dim;
    const long n = grid.n_nodes;

    PdeSolution sol;
    sol.grid = grid;
    sol.slab_times.resize(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) sol.slab_times[static_cast<std::size_t>(k)] = T * k / steps;
    sol.slabs.assign(static_cast<std::size_t>(steps) + 1,
                     std::vector<double>(static_cast<std::size_t>(n), 0.0));

    std::vector<int> idx(d);
    std::vector<double> x(d);
    std::vector<double> fx_next(static_cast<std::size_t>(n), 0.0),
        fx_cur(static_cast<std::size_t>(n), 0.0), psi_cur, rhs(static_cast<std::size_t>(n), 0.0),
        au(static_cast<std::size_t>(n), 0.0);
    if (obstacle) psi_cur.assign(static_cast<std::size_t>(n), 0.0);

    // the implicit system is (1/dt + theta A) u_k = rhs
    AssembledSystem stepped = sys;
    for (long i = 0; i < n; ++i) {
        if (stepped.dirichlet[static_cast<std::size_t>(i)]) continue;
        for (long p = stepped.op.row_ptr[i]; p < stepped.op.row_ptr[i + 1]; ++p) {
            stepped.op.val[p] *= th;
            if (stepped.op.col[p] == i) stepped.op.val[p] += 1.0 / dt;
        }
        stepped.diag[static_cast<std::size_t>(i)] = stepped.diag[static_cast<std::size_t>(i)] * th + 1.0 / dt;
    }

    // terminal slab
    auto& terminal = sol.slabs[static_cast<std::size_t>(steps)];
    for (long k = 0; k < n; ++k) {
        grid.unflatten(k, idx);
        grid.point(idx, x);
        terminal[static_cast<std::size_t>(k)] = spec.g(T, x);
        if (obstacle)
            terminal[static_cast<std::size_t>(k)] =
                std::max(terminal[static_cast<std::size_t>(k)], (*spec.psi)(T, x));
        fx_next[static_cast<std::size_t>(k)] = spec.f(T, x);
    }

    long total_iters = 0;
    double worst_res = 0.0, worst_comp = 0.0;

    for (int step_i = steps - 1; step_i >= 0; --step_i) {
        double t_cur = sol.slab_times[static_cast<std::size_t>(step_i)];
        const auto& u_next = sol.slabs[static_cast<std::size_t>(step_i) + 1];
        auto& u_cur = sol.slabs[static_cast<std::size_t>(step_i)];
        u_cur = u_next; // warm start

        sys.op.apply(u_next, au);
        double rhs_scale = 0.0;
        for (long k = 0; k < n; ++k) {
            grid.unflatten(k, idx);
            grid.point(idx, x);
            NodeType type = grid.node_types[static_cast<std::size_t>(k)];
            fx_cur[static_cast<std::size_t>(k)] = spec.f(t_cur, x);
            if (obstacle) psi_cur[static_cast<std::size_t>(k)] = (*spec.psi)(t_cur, x);
            if (sys.dirichlet[static_cast<std::size_t>(k)]) {
                double gv = boundary_value(spec, opt, type, t_cur, x);
                if (obstacle) gv = std::max(gv, psi_cur[static_cast<std::size_t>(k)]);
                rhs[static_cast<std::size_t>(k)] = gv;
                u_cur[static_cast<std::size_t>(k)] = gv;
            } else {
                rhs[static_cast<std::size_t>(k)] =
                    u_next[static_cast<std::size_t>(k)] / dt -
                    (1.0 - th) * au[static_cast<std::size_t>(k)] +
                    th * fx_cur[static_cast<std::size_t>(k)] +
                    (1.0 - th) * fx_next[static_cast<std::size_t>(k)];
            }
            rhs_scale = std::max(rhs_scale, std::abs(rhs[static_cast<std::size_t>(k)]));
        }

        auto it = iterate(stepped, u_cur, rhs, opt, obstacle ? psi_cur.data() : nullptr,
                          rhs_scale);
        total_iters += it.iterations;
        worst_res = std::max(worst_res, it.residual);

        if (obstacle) {
            // complementarity on the stationary operator at this slab
            double comp = 0.0;
            sys.op.apply(u_cur, au);
            for (long k = 0; k < n; ++k) {
                if (sys.dirichlet[static_cast<std::size_t>(k)]) continue;
                // -u_t + A u - f with u_t from the backward march
                double dudt = (u_next[static_cast<std::size_t>(k)] -
                               u_cur[static_cast<std::size_t>(k)]) / dt;
                double lhs = -dudt + au[static_cast<std::size_t>(k)] -
                             fx_cur[static_cast<std::size_t>(k)];
                double slack = u_cur[static_cast<std::size_t>(k)] - psi_cur[static_cast<std::size_t>(k)];
                comp = std::max(comp, std::abs(std::min(lhs, slack)));
            }
            worst_comp = std::max(worst_comp, comp);
        }

        fx_next.swap(fx_cur);
    }

    sol.values = sol.slabs.front();
    sol.iterations = total_iters;
    sol.residual_norm = worst_res;
    sol.complementarity_residual = worst_comp;

    if (obstacle) {
        sol.active_set.assign(static_cast<std::size_t>(n), 0);
        for (long k = 0; k < n; ++k) {
            grid.unflatten(k, idx);
            grid.point(idx, x);
            double slack = sol.values[static_cast<std::size_t>(k)] - (*spec.psi)(0.0, x);
            sol.active_set[static_cast<std::size_t>(k)] = slack <= 1e-10 ? 1 : 0;
        }
    }
    return sol;
}

} // namespace

PdeSolution solve_parabolic(const DiffusionModel& model, const DomainSpec& domain,
                            const ProblemSpec& spec, const Grid& grid, const SolverOptions& opt) {
    return march_parabolic(model, domain, spec, grid, opt, false);
}

PdeSolution solve_obstacle(const DiffusionModel& model, const DomainSpec& domain,
                           const ProblemSpec& spec, const Grid& grid, const SolverOptions& opt) {
    if (!spec.psi) fail(ErrorCategory::Compatibility, "obstacle solve requires psi");
    if (is_parabolic(spec.kind)) return march_parabolic(model, domain, spec, grid, opt, true);

    // elliptic obstacle: projected SOR on the stationary system
    auto scenario = classify_origin(model, default_probe_b(model, domain)).scenario;
    auto sys = assemble(model, grid, scenario);

    PdeSolution sol;
    sol.grid = grid;
    const long n = grid.n_nodes;
    sol.values.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<double> rhs(static_cast<std::size_t>(n), 0.0), psi(static_cast<std::size_t>(n), 0.0);

    const int d = grid.dim;
    std::vector<int> idx(d);
    std::vector<double> x(d);
    double rhs_scale = 0.0;
    for (long k = 0; k < n; ++k) {
        grid.unflatten(k, idx);
        grid.point(idx, x);
        psi[static_cast<std::size_t>(k)] = (*spec.psi)(0.0, x);
        NodeType type = grid.node_types[static_cast<std::size_t>(k)];
        if (sys.dirichlet[static_cast<std::size_t>(k)]) {
            double gv = boundary_value(spec, opt, type, 0.0, x);
            rhs[static_cast<std::size_t>(k)] = gv;
            sol.values[static_cast<std::size_t>(k)] = gv;
        } else {
            rhs[static_cast<std::size_t>(k)] = spec.f(0.0, x);
            sol.values[static_cast<std::size_t>(k)] = psi[static_cast<std::size_t>(k)];
        }
        rhs_scale = std::max(rhs_scale, std::abs(rhs[static_cast<std::size_t>(k)]));
    }

    auto it = iterate(sys, sol.values, rhs, opt, psi.data(), rhs_scale);
    sol.iterations = it.iterations;
    sol.residual_norm = it.residual;
    sol.complementarity_residual = it.residual;

    sol.active_set.assign(static_cast<std::size_t>(n), 0);
    for (long k = 0; k < n; ++k)
        sol.active_set[static_cast<std::size_t>(k)] =
            sol.values[static_cast<std::size_t>(k)] - psi[static_cast<std::size_t>(k)] <= 1e-10 ? 1
                                                                                                : 0;
    return sol;
}

} // namespace fkd
