#include "fkd/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fkd {

namespace {

// Smallest eigenvalue of a symmetric d x d matrix (row-major), cyclic Jacobi.
double min_eigenvalue_sym(std::vector<double> a, int d) {
    if (d == 1) return a[0];
    auto at = [&](int i, int j) -> double& { return a[i * d + j]; };
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) off += at(i, j) * at(i, j);
        if (off < 1e-26) break;
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                double apq = at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < d; ++k) {
                    double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    double mn = at(0, 0);
    for (int i = 1; i < d; ++i) mn = std::min(mn, at(i, i));
    return mn;
}

std::string point_str(std::span<const double> x) {
    std::string s = "(";
    char buf[32];
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6g", x[i]);
        s += buf;
        if (i + 1 < x.size()) s += ", ";
    }
    return s + ")";
}

void require(bool ok, ErrorCategory cat, const std::string& msg) {
    if (!ok) fail(cat, msg);
}

} // namespace

// --- DiffusionModel evaluation ------------------------------------------------

void DiffusionModel::drift_into(std::span<const double> x, std::span<double> out) const {
    for (int i = 0; i < d - 1; ++i) out[i] = drift_head[i](x);
    out[d - 1] = drift_d(x[d - 1]);
}

void DiffusionModel::sigma_tilde_into(std::span<const double> x, std::span<double> out) const {
    for (int i = 0; i < d - 1; ++i)
        for (int j = 0; j < m; ++j) out[i * m + j] = vol_head[i][j](x);
    double s0 = sigma0(x[d - 1]);
    for (int j = 0; j < m; ++j) out[(d - 1) * m + j] = rho[j] * s0;
}

void DiffusionModel::sigma_into(std::span<const double> x, std::span<double> out) const {
    sigma_tilde_into(x, out);
    double xd = std::max(x[d - 1], 0.0);
    double fac = std::pow(xd, 0.5 * beta);
    for (int k = 0; k < d * m; ++k) out[k] *= fac;
}

void DiffusionModel::a_into(std::span<const double> x, std::span<double> out) const {
    std::vector<double> sig(static_cast<std::size_t>(d) * m);
    sigma_into(x, sig);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) {
            double v = 0.0;
            for (int j = 0; j < m; ++j) v += sig[i * m + j] * sig[k * m + j];
            out[i * d + k] = v;
        }
}

void DiffusionModel::a_tilde_into(std::span<const double> x, std::span<double> out) const {
    std::vector<double> sig(static_cast<std::size_t>(d) * m);
    sigma_tilde_into(x, sig);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) {
            double v = 0.0;
            for (int j = 0; j < m; ++j) v += sig[i * m + j] * sig[k * m + j];
            out[i * d + k] = v;
        }
}

// --- DomainSpec -----------------------------------------------------------

DomainSpec DomainSpec::half_space(int d) {
    DomainSpec s;
    s.box.resize(d);
    s.box[d - 1] = {0.0, kInf};
    return s;
}

DomainSpec DomainSpec::make_box(std::vector<Interval> b) {
    DomainSpec s;
    s.box = std::move(b);
    require(!s.box.empty(), ErrorCategory::ParamOutOfRange, "empty domain box");
    require(s.box.back().lo == 0.0, ErrorCategory::ParamOutOfRange,
            "the degenerate coordinate's lower bound is fixed at 0");
    for (const auto& iv : s.box)
        require(iv.lo < iv.hi, ErrorCategory::ParamOutOfRange, "degenerate domain interval");
    return s;
}

bool DomainSpec::contains(std::span<const double> x) const {
    for (int i = 0; i < dim(); ++i) {
        if (!(x[i] > box[i].lo && x[i] < box[i].hi)) return false;
    }
    return true;
}

bool DomainSpec::on_gamma1(std::span<const double> x, double tol) const {
    bool on_face = false;
    for (int i = 0; i < dim(); ++i) {
        bool last = (i == dim() - 1);
        if (std::isfinite(box[i].hi) && std::abs(x[i] - box[i].hi) <= tol) on_face = true;
        if (std::isfinite(box[i].lo) && std::abs(x[i] - box[i].lo) <= tol) {
            if (last) return false; // bottom face is Gamma0
            on_face = true;
        }
        if (x[i] < box[i].lo - tol || x[i] > box[i].hi + tol) return false;
    }
    return on_face;
}

bool DomainSpec::has_gamma1() const {
    for (int i = 0; i < dim(); ++i) {
        if (std::isfinite(box[i].hi)) return true;
        if (i != dim() - 1 && std::isfinite(box[i].lo)) return true;
    }
    return false;
}

double DomainSpec::min_extent() const {
    double e = kInf;
    for (const auto& iv : box)
        if (std::isfinite(iv.lo) && std::isfinite(iv.hi)) e = std::min(e, iv.hi - iv.lo);
    return e;
}

std::optional<DomainSpec::Crossing> DomainSpec::first_gamma1_crossing(
    std::span<const double> from, std::span<const double> to) const {
    std::optional<Crossing> best;
    for (int i = 0; i < dim(); ++i) {
        double delta = to[i] - from[i];
        if (std::isfinite(box[i].hi) && to[i] >= box[i].hi && delta > 0.0) {
            double frac = (box[i].hi - from[i]) / delta;
            if (!best || frac < best->frac) best = Crossing{std::clamp(frac, 0.0, 1.0), i, true};
        }
        if (i != dim() - 1 && std::isfinite(box[i].lo) && to[i] <= box[i].lo && delta < 0.0) {
            double frac = (box[i].lo - from[i]) / delta;
            if (!best || frac < best->frac) best = Crossing{std::clamp(frac, 0.0, 1.0), i, false};
        }
    }
    return best;
}

// --- presets ------------------------------------------------------------------

namespace {

// Orthonormal driver split realizing correlation corr between the first row
// and the degenerate row while keeping both rho weights strictly positive:
//   p = (sqrt((1+corr)/2),  sqrt((1-corr)/2))   (degenerate row weights)
//   q = (sqrt((1+corr)/2), -sqrt((1-corr)/2))   (first row), <q, p> = corr.
void correlated_split(double corr, double& p1, double& p2, double& q1, double& q2) {
    p1 = std::sqrt(0.5 * (1.0 + corr));
    p2 = std::sqrt(0.5 * (1.0 - corr));
    q1 = p1;
    q2 = -p2;
}

} // namespace

DiffusionModel make_heston(const HestonParams& p) {
    require(p.kappa > 0.0 && p.theta > 0.0 && p.sigma_v > 0.0, ErrorCategory::ParamOutOfRange,
            "heston: kappa, theta, sigma_v must be positive");
    require(std::abs(p.rho) < 1.0, ErrorCategory::ParamOutOfRange, "heston: |rho| < 1 required");
    require(p.r > 0.0, ErrorCategory::ParamOutOfRange, "heston: r must be positive");

    DiffusionModel mdl;
    mdl.name = "heston";
    mdl.d = 2;
    mdl.m = 2;
    mdl.beta = 1.0;

    // coordinates: x1 = log-price, x2 = variance
    mdl.drift_head = {FieldExpr::linear(p.r, {0.0, -0.5})};
    mdl.drift_d = Coeff1D::affine(p.kappa * p.theta, -p.kappa);

    double p1, p2, q1, q2;
    correlated_split(p.rho, p1, p2, q1, q2);
    mdl.vol_head = {{FieldExpr::constant(q1), FieldExpr::constant(q2)}};
    mdl.rho = {p1, p2};
    mdl.sigma0 = Coeff1D::constant(p.sigma_v);
    mdl.sigma0_locally_constant = true;

    mdl.killing = FieldExpr::constant(p.r);
    mdl.c0 = p.r;

    double sv2 = p.sigma_v * p.sigma_v;
    double tr = 1.0 + sv2;
    double disc = std::sqrt((1.0 - sv2) * (1.0 - sv2) + 4.0 * p.rho * p.rho * sv2);
    mdl.ellipticity_delta = 0.999 * 0.5 * (tr - disc);

    double frob = std::sqrt(1.0 + sv2);
    mdl.growth_K = std::max({p.r + p.kappa * p.theta, 0.5 + p.kappa, frob});
    mdl.holder = HolderData{1.0, p.kappa, 0.5};
    return mdl;
}

DiffusionModel make_cir1d(const Cir1dParams& p) {
    require(p.kappa > 0.0 && p.theta >= 0.0 && p.sigma > 0.0 && p.r > 0.0,
            ErrorCategory::ParamOutOfRange, "cir1d: parameters out of range");
    DiffusionModel mdl;
    mdl.name = "cir1d";
    mdl.d = 1;
    mdl.m = 1;
    mdl.beta = 1.0;
    mdl.d1_reduction = true;
    mdl.drift_d = Coeff1D::affine(p.kappa * p.theta, -p.kappa);
    mdl.rho = {1.0};
    mdl.sigma0 = Coeff1D::constant(p.sigma);
    mdl.sigma0_locally_constant = true;
    mdl.killing = FieldExpr::constant(p.r);
    mdl.c0 = p.r;
    mdl.ellipticity_delta = 0.999 * p.sigma * p.sigma;
    mdl.growth_K = std::max({p.kappa * p.theta, p.kappa, p.sigma});
    mdl.holder = HolderData{1.0, p.kappa, 0.5};
    return mdl;
}

DiffusionModel make_gbm1d(const Gbm1dParams& p) {
    require(p.sigma > 0.0 && p.r > 0.0, ErrorCategory::ParamOutOfRange,
            "gbm1d: sigma and r must be positive");
    DiffusionModel mdl;
    mdl.name = "gbm1d";
    mdl.d = 1;
    mdl.m = 1;
    mdl.beta = 2.0;
    mdl.d1_reduction = true;
    mdl.drift_d = Coeff1D::power(p.mu, 1.0);
    mdl.rho = {1.0};
    mdl.sigma0 = Coeff1D::constant(p.sigma);
    mdl.sigma0_locally_constant = true;
    mdl.killing = FieldExpr::constant(p.r);
    mdl.c0 = p.r;
    mdl.ellipticity_delta = 0.999 * p.sigma * p.sigma;
    mdl.growth_K = std::max(std::abs(p.mu), p.sigma);
    mdl.holder = HolderData{1.0, std::abs(p.mu), 0.5};
    return mdl;
}

DiffusionModel make_cev(const CevParams& p) {
    require(p.sigma > 0.0 && p.r > 0.0, ErrorCategory::ParamOutOfRange,
            "cev: sigma and r must be positive");
    require(p.beta > 0.0 && p.beta < 2.0, ErrorCategory::ParamOutOfRange,
            "cev: beta must lie in (0, 2)");
    DiffusionModel mdl;
    mdl.name = "cev";
    mdl.d = 1;
    mdl.m = 1;
    mdl.beta = p.beta;
    mdl.d1_reduction = true;
    mdl.drift_d = Coeff1D::power(p.mu, 1.0);
    mdl.rho = {1.0};
    mdl.sigma0 = Coeff1D::constant(p.sigma);
    mdl.sigma0_locally_constant = true;
    mdl.killing = FieldExpr::constant(p.r);
    mdl.c0 = p.r;
    mdl.ellipticity_delta = 0.999 * p.sigma * p.sigma;
    mdl.growth_K = std::max(std::abs(p.mu), p.sigma);
    mdl.holder = HolderData{1.0, std::abs(p.mu), 0.5};
    return mdl;
}

DiffusionModel make_sabr(const SabrParams& p) {
    require(p.nu > 0.0 && p.r > 0.0, ErrorCategory::ParamOutOfRange,
            "sabr: nu and r must be positive");
    require(p.f_exponent >= 0.0 && p.f_exponent <= 1.0, ErrorCategory::ParamOutOfRange,
            "sabr: forward exponent must lie in [0, 1]");
    require(std::abs(p.rho) < 1.0, ErrorCategory::ParamOutOfRange, "sabr: |rho| < 1 required");

    // Normal form puts the volatility process in the degenerate slot:
    // coordinates: x1 = forward, x2 = volatility, beta = 2.
    DiffusionModel mdl;
    mdl.name = "sabr";
    mdl.d = 2;
    mdl.m = 2;
    mdl.beta = 2.0;
    mdl.drift_head = {FieldExpr::constant(0.0)};
    mdl.drift_d = Coeff1D::zero();

    double p1, p2, q1, q2;
    correlated_split(p.rho, p1, p2, q1, q2);
    mdl.vol_head = {{FieldExpr::power(0, q1, p.f_exponent), FieldExpr::power(0, q2, p.f_exponent)}};
    mdl.rho = {p1, p2};
    mdl.sigma0 = Coeff1D::constant(p.nu);
    mdl.sigma0_locally_constant = true;
    mdl.killing = FieldExpr::constant(p.r);
    mdl.c0 = p.r;
    mdl.holder = HolderData{1.0, 0.0, 0.5};

    // at(x) depends on the forward; the declared constants hold on the default
    // (bounded) domain, which is where validation samples them.
    DomainSpec dom = DomainSpec::make_box({{0.25, 4.0}, {0.0, 2.0}});
    double min_eig = kInf, max_ratio = 0.0;
    std::vector<double> at(4);
    for (int i = 0; i <= 16; ++i) {
        double f = 0.25 + (4.0 - 0.25) * i / 16.0;
        double fb = std::pow(f, p.f_exponent);
        at[0] = fb * fb;
        at[1] = at[2] = p.rho * p.nu * fb;
        at[3] = p.nu * p.nu;
        min_eig = std::min(min_eig, min_eigenvalue_sym(at, 2));
        // ||sigma(x)||_F = x2 * sqrt(fb^2 + nu^2) on this slice
        double norm_ratio = 2.0 * std::sqrt(fb * fb + p.nu * p.nu) / (1.0 + f);
        max_ratio = std::max(max_ratio, norm_ratio);
    }
    mdl.ellipticity_delta = 0.999 * min_eig;
    mdl.growth_K = 1.05 * std::max(max_ratio, p.nu * 2.0);
    return mdl;
}

DiffusionModel preset(const std::string& name,
                      const std::vector<std::pair<std::string, double>>& params) {
    auto get = [&](const std::string& key, double dflt) {
        for (const auto& [k, v] : params)
            if (k == key) return v;
        return dflt;
    };
    auto check_keys = [&](std::initializer_list<const char*> allowed) {
        for (const auto& [k, v] : params) {
            (void)v;
            bool ok = false;
            for (const char* a : allowed)
                if (k == a) ok = true;
            if (!ok) fail(ErrorCategory::ParamOutOfRange, "unknown parameter '" + k + "' for preset " + name);
        }
    };

    if (name == "heston") {
        check_keys({"kappa", "theta", "sigma_v", "rho", "r"});
        return make_heston({get("kappa", 2.0), get("theta", 0.09), get("sigma_v", 0.3),
                            get("rho", -0.5), get("r", 0.05)});
    }
    if (name == "cev") {
        check_keys({"mu", "sigma", "beta", "r"});
        return make_cev({get("mu", 0.05), get("sigma", 0.3), get("beta", 0.5), get("r", 0.05)});
    }
    if (name == "sabr") {
        check_keys({"f_exponent", "nu", "rho", "r"});
        return make_sabr({get("f_exponent", 0.5), get("nu", 0.4), get("rho", 0.0), get("r", 0.05)});
    }
    if (name == "cir1d") {
        check_keys({"kappa", "theta", "sigma", "r"});
        return make_cir1d({get("kappa", 1.0), get("theta", 0.2), get("sigma", 1.0), get("r", 0.05)});
    }
    if (name == "gbm1d") {
        check_keys({"mu", "sigma", "r"});
        return make_gbm1d({get("mu", 0.05), get("sigma", 0.2), get("r", 0.05)});
    }
    fail(ErrorCategory::UnknownPreset, "no preset named '" + name + "'");
}

DomainSpec default_domain(const DiffusionModel& model) {
    if (model.name == "heston") return DomainSpec::make_box({{-3.0, 3.0}, {0.0, 2.0}});
    if (model.name == "sabr") return DomainSpec::make_box({{0.25, 4.0}, {0.0, 2.0}});
    if (model.name == "gbm1d") return DomainSpec::make_box({{0.0, 4.0}});
    if (model.d == 1) return DomainSpec::make_box({{0.0, 3.0}});
    std::vector<DomainSpec::Interval> b(model.d, {-2.0, 2.0});
    b.back() = {0.0, 2.0};
    return DomainSpec::make_box(std::move(b));
}

// --- validation ------------------------------------------------------------

ValidationGrid default_validation_grid(const DiffusionModel& model) {
    ValidationGrid g;
    g.box = default_domain(model);
    g.points_per_axis = model.d <= 2 ? 64 : 16;
    g.boundary_samples = 32;
    return g;
}

namespace {

// Deterministic interior + boundary sample set over a finite box.
std::vector<std::vector<double>> sample_points(const ValidationGrid& grid) {
    const auto& box = grid.box.box;
    int d = static_cast<int>(box.size());
    int n = grid.points_per_axis;

    std::vector<std::vector<double>> pts;
    std::vector<int> idx(d, 0);
    auto coord = [&](int axis, int j) {
        double lo = std::isfinite(box[axis].lo) ? box[axis].lo : -2.0;
        double hi = std::isfinite(box[axis].hi) ? box[axis].hi : 2.0;
        return lo + (hi - lo) * (j + 0.5) / n;
    };
    while (true) {
        std::vector<double> x(d);
        for (int i = 0; i < d; ++i) x[i] = coord(i, idx[i]);
        pts.push_back(std::move(x));
        int axis = 0;
        while (axis < d && ++idx[axis] == n) idx[axis++] = 0;
        if (axis == d) break;
    }

    // boundary samples: spread over faces, golden-ratio spacing along each
    const double golden = 0.6180339887498949;
    double u = 0.37;
    for (int s = 0; s < grid.boundary_samples; ++s) {
        int axis = s % d;
        bool upper = (s / d) % 2 == 0;
        std::vector<double> x(d);
        for (int i = 0; i < d; ++i) {
            u += golden;
            u -= std::floor(u);
            x[i] = coord(i, static_cast<int>(u * n) % n);
        }
        double lo = std::isfinite(box[axis].lo) ? box[axis].lo : -2.0;
        double hi = std::isfinite(box[axis].hi) ? box[axis].hi : 2.0;
        x[axis] = upper ? hi : lo;
        pts.push_back(std::move(x));
    }
    return pts;
}

} // namespace

ValidationReport validate_model(const DiffusionModel& model, const ValidationGrid& grid,
                                bool throw_on_failure) {
    ValidationReport report;
    if (grid.box.box.empty())
        fail(ErrorCategory::ParamOutOfRange, "validation grid must be nonempty");

    auto pts = sample_points(grid);

    auto add = [&](AssumptionCheck c) { report.checks.push_back(std::move(c)); };

    // rho vector: strictly positive entries, unit norm
    {
        AssumptionCheck c{.name = "rho-norm", .hard = true};
        double norm2 = 0.0;
        bool positive = !model.rho.empty();
        for (double r : model.rho) {
            norm2 += r * r;
            if (!(r > 0.0)) positive = false;
        }
        c.worst_value = std::abs(std::sqrt(norm2) - 1.0);
        c.passed = positive && c.worst_value <= 1e-12;
        if (!positive) c.detail = "rho entries must be strictly positive";
        add(c);
    }

    // b_d(0) >= 0
    {
        AssumptionCheck c{.name = "drift-nonnegative-at-origin", .hard = true};
        c.worst_value = model.drift_d(0.0);
        c.passed = c.worst_value >= 0.0;
        add(c);
    }

    int d = model.d;
    std::vector<double> b(d), at(static_cast<std::size_t>(d) * d),
        sig(static_cast<std::size_t>(d) * model.m), sig2(static_cast<std::size_t>(d) * model.m);

    AssumptionCheck killing{.name = "killing-floor", .hard = true, .passed = true,
                            .worst_value = kInf};
    AssumptionCheck elliptic{.name = "uniform-ellipticity", .hard = true, .passed = true,
                             .worst_value = kInf};
    AssumptionCheck growth{.name = "linear-growth", .hard = true, .passed = true,
                           .worst_value = -kInf};
    AssumptionCheck factor{.name = "sigma-factorization", .hard = true, .passed = true,
                           .worst_value = 0.0};
    AssumptionCheck separable{.name = "drift-d-depends-on-xd-only", .hard = true, .passed = true,
                              .worst_value = 0.0};

    try {
        for (const auto& x : pts) {
            double cx = model.killing_at(x);
            if (cx - model.c0 < killing.worst_value) {
                killing.worst_value = cx - model.c0;
                killing.worst_point = x;
            }

            model.a_tilde_into(x, at);
            double eig = min_eigenvalue_sym(at, d);
            if (eig < elliptic.worst_value) {
                elliptic.worst_value = eig;
                elliptic.worst_point = x;
            }

            model.drift_into(x, b);
            model.sigma_into(x, sig);
            double nx = 0.0, nb = 0.0, ns = 0.0;
            for (int i = 0; i < d; ++i) {
                nx += x[i] * x[i];
                nb += b[i] * b[i];
            }
            for (double v : sig) ns += v * v;
            double bound = model.growth_K * (1.0 + std::sqrt(nx));
            double excess = std::max(std::sqrt(nb), std::sqrt(ns)) - bound;
            if (excess > growth.worst_value) {
                growth.worst_value = excess;
                growth.worst_point = x;
            }

            // sigma = x_d^{beta/2} * sigma_tilde, exactly
            model.sigma_tilde_into(x, sig2);
            double fac = std::pow(std::max(x[d - 1], 0.0), 0.5 * model.beta);
            double mismatch = 0.0;
            for (int k = 0; k < d * model.m; ++k)
                mismatch = std::max(mismatch, std::abs(sig[k] - fac * sig2[k]));
            if (mismatch > factor.worst_value) {
                factor.worst_value = mismatch;
                factor.worst_point = x;
            }

            if (d >= 2) {
                std::vector<double> x2(x);
                x2[0] = x[0] + 0.731; // same x_d, different leading coordinate
                double diff = std::abs(model.drift_d(x[d - 1]) - model.drift_d(x2[d - 1]));
                separable.worst_value = std::max(separable.worst_value, diff);
            }
        }
    } catch (const EngineError&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorCategory::EvaluationFailure, std::string("coefficient evaluator faulted: ") + e.what());
    }

    killing.passed = killing.worst_value >= -1e-12 && model.c0 > 0.0;
    if (model.c0 <= 0.0) killing.detail = "declared killing floor c0 must be positive";
    elliptic.passed = elliptic.worst_value >= model.ellipticity_delta - 1e-12 &&
                      model.ellipticity_delta > 0.0;
    growth.passed = growth.worst_value <= 1e-9;
    factor.passed = factor.worst_value == 0.0;
    separable.passed = separable.worst_value == 0.0;

    add(killing);
    add(elliptic);
    add(growth);
    add(factor);
    add(separable);

    // soft advisory: Holder data should accompany a strictly positive b_d(0)
    {
        AssumptionCheck c{.name = "holder-data-present", .hard = false};
        bool needed = model.drift_d.value_at_zero() > 0.0 && model.beta >= 1.0;
        c.passed = !needed || model.holder.has_value();
        add(c);
    }

    report.accepted = std::all_of(report.checks.begin(), report.checks.end(),
                                  [](const AssumptionCheck& c) { return c.passed || !c.hard; });

    if (!report.accepted && throw_on_failure) {
        for (const auto& c : report.checks) {
            if (c.hard && !c.passed) {
                std::string where =
                    c.worst_point.empty() ? "" : " at " + point_str(c.worst_point);
                fail(ErrorCategory::AssumptionViolation,
                     c.name + " failed" + where + (c.detail.empty() ? "" : " (" + c.detail + ")"));
            }
        }
    }
    return report;
}

// --- generator --------------------------------------------------------------

SmoothField SmoothField::from_value(std::function<double(std::span<const double>)> v, double h) {
    SmoothField f;
    f.value = std::move(v);
    f.fd_step = h;
    return f;
}

double apply_generator(const DiffusionModel& model, const SmoothField& u,
                       std::span<const double> x) {
    int d = model.d;
    if (x[d - 1] <= 0.0)
        fail(ErrorCategory::BoundaryPoint, "generator evaluation requires x_d > 0");

    std::vector<double> grad(d), hess(static_cast<std::size_t>(d) * d);

    if (u.gradient) {
        u.gradient(x, grad);
    } else {
        std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
        for (int i = 0; i < d; ++i) {
            double h = u.fd_step;
            if (i == d - 1) h = std::min(h, 0.5 * x[i]);
            xp[i] = x[i] + h;
            xm[i] = x[i] - h;
            grad[i] = (u.value(xp) - u.value(xm)) / (2.0 * h);
            xp[i] = xm[i] = x[i];
        }
    }

    if (u.hessian) {
        u.hessian(x, hess);
    } else {
        std::vector<double> xa(x.begin(), x.end());
        double u0 = u.value(x);
        auto step_of = [&](int i) {
            return (i == d - 1) ? std::min(u.fd_step, 0.5 * x[i]) : u.fd_step;
        };
        for (int i = 0; i < d; ++i) {
            double hi = step_of(i);
            xa[i] = x[i] + hi;
            double up = u.value(xa);
            xa[i] = x[i] - hi;
            double um = u.value(xa);
            xa[i] = x[i];
            hess[i * d + i] = (up - 2.0 * u0 + um) / (hi * hi);
            for (int j = i + 1; j < d; ++j) {
                double hj = step_of(j);
                xa[i] = x[i] + hi; xa[j] = x[j] + hj;
                double upp = u.value(xa);
                xa[j] = x[j] - hj;
                double upm = u.value(xa);
                xa[i] = x[i] - hi;
                double umm = u.value(xa);
                xa[j] = x[j] + hj;
                double ump = u.value(xa);
                xa[i] = x[i]; xa[j] = x[j];
                double v = (upp - upm - ump + umm) / (4.0 * hi * hj);
                hess[i * d + j] = hess[j * d + i] = v;
            }
        }
    }

    std::vector<double> a(static_cast<std::size_t>(d) * d), b(d);
    model.a_into(x, a);
    model.drift_into(x, b);

    double tr = 0.0, adv = 0.0;
    for (int i = 0; i < d; ++i) {
        adv += b[i] * grad[i];
        for (int j = 0; j < d; ++j) tr += a[i * d + j] * hess[i * d + j];
    }
    return -0.5 * tr - adv + model.killing_at(x) * u.value(x);
}

} // namespace fkd
