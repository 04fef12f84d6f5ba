#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fkd/coeffs.hpp"

namespace fkd {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Local Holder data of b_d at the origin: |b_d(y) - b_d(0)| <= L*y^gamma on [0, kappa].
struct HolderData {
    double gamma = 1.0; // in (0, 1]
    double L = 0.0;
    double kappa = 0.5; // in (0, 1)
};

// Degenerate diffusion on the closed upper half-space: the generator is
//   A u = -1/2 tr(a D^2 u) - <b, Du> + c u,      a(x) = x_d^beta * at(x),
// with the last drift component depending on x_d only and the last row of the
// reduced volatility equal to rho_j * sigma0(x_d).
struct DiffusionModel {
    int d = 1;
    int m = 1;
    double beta = 1.0;

    std::vector<FieldExpr> drift_head; // b_1..b_{d-1}
    Coeff1D drift_d;                   // b_d(x_d)
    std::vector<std::vector<FieldExpr>> vol_head; // reduced-vol rows 1..d-1, each of size m
    std::vector<double> rho;           // size m, positive, unit 2-norm
    Coeff1D sigma0;                    // sigma0(x_d)
    FieldExpr killing;                 // c(x)

    double c0 = 0.0;                // killing floor
    double growth_K = 0.0;          // linear-growth constant for b, sigma
    double ellipticity_delta = 0.0; // lower bound on eigenvalues of at(x)
    std::optional<HolderData> holder;
    bool sigma0_locally_constant = false;

    std::string name;
    // d == 1 drives the degenerate coordinate alone; the full model form is
    // d >= 2, so such runs are flagged in reports
    bool d1_reduction = false;

    // --- evaluation helpers ---------------------------------------------
    double bd(double y) const { return drift_d(y); }
    double sigma0_at(double y) const { return sigma0(y); }
    // eta^2(y) = y^beta * sigma0^2(y), the squared volatility of X^(d)
    double eta2(double y) const {
        double s = sigma0(y);
        double yb = beta == 1.0   ? y
                    : beta == 2.0 ? y * y
                    : beta == 0.5 ? std::sqrt(y)
                                  : std::pow(y, beta);
        return yb * s * s;
    }

    void drift_into(std::span<const double> x, std::span<double> out) const;
    // row-major d x m
    void sigma_tilde_into(std::span<const double> x, std::span<double> out) const;
    void sigma_into(std::span<const double> x, std::span<double> out) const;
    // a(x) = sigma sigma^T, row-major d x d
    void a_into(std::span<const double> x, std::span<double> out) const;
    void a_tilde_into(std::span<const double> x, std::span<double> out) const;
    double killing_at(std::span<const double> x) const { return killing(x); }
};

// Axis-aligned open box inside the half-space; coordinate d has lower bound 0.
// Gamma1 is the part of the boundary inside the open half-space (finite faces
// other than {x_d = 0}); Gamma0 is the bottom face.
struct DomainSpec {
    struct Interval {
        double lo = -kInf;
        double hi = kInf;
    };
    std::vector<Interval> box;
    bool gamma0_nonempty = true;

    static DomainSpec half_space(int d);
    static DomainSpec make_box(std::vector<Interval> b);

    int dim() const { return static_cast<int>(box.size()); }
    bool contains(std::span<const double> x) const;
    bool on_gamma1(std::span<const double> x, double tol = 1e-12) const;
    bool has_gamma1() const;
    double gamma1_extent_d() const { return box.empty() ? kInf : box.back().hi; }
    // smallest finite face-to-face extent, used to sanity-check boundary_tol
    double min_extent() const;

    struct Crossing {
        double frac;   // in (0, 1]
        int axis;
        bool upper;
    };
    // First Gamma1 face crossed by the segment from -> to; the bottom face is
    // excluded (Gamma0 touches are detected by the x_d threshold instead).
    std::optional<Crossing> first_gamma1_crossing(std::span<const double> from,
                                                  std::span<const double> to) const;
};

// --- presets -------------------------------------------------------------

struct HestonParams {
    double kappa = 2.0, theta = 0.09, sigma_v = 0.3, rho = -0.5, r = 0.05;
};
struct CevParams {
    double mu = 0.05, sigma = 0.3, beta = 0.5, r = 0.05;
};
struct SabrParams {
    double f_exponent = 0.5, nu = 0.4, rho = 0.0, r = 0.05;
};
struct Cir1dParams {
    double kappa = 1.0, theta = 0.2, sigma = 1.0, r = 0.05;
};
struct Gbm1dParams {
    double mu = 0.05, sigma = 0.2, r = 0.05;
};

DiffusionModel make_heston(const HestonParams& p);
DiffusionModel make_cev(const CevParams& p);
DiffusionModel make_sabr(const SabrParams& p);
DiffusionModel make_cir1d(const Cir1dParams& p);
DiffusionModel make_gbm1d(const Gbm1dParams& p);

// Name + parameter-map entry point used by the config layer.
DiffusionModel preset(const std::string& name,
                      const std::vector<std::pair<std::string, double>>& params);

// Default truncated box used for validation grids and oracle defaults.
DomainSpec default_domain(const DiffusionModel& model);

// --- validation ------------------------------------------------------------

struct ValidationGrid {
    DomainSpec box;          // finite truncation of the domain
    int points_per_axis = 64;
    int boundary_samples = 32;
};

ValidationGrid default_validation_grid(const DiffusionModel& model);

struct AssumptionCheck {
    std::string name;
    bool hard = true;
    bool passed = false;
    double worst_value = 0.0;
    std::vector<double> worst_point;
    std::string detail;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    bool accepted = false;
};

// Samples every standing assumption on the grid; throws AssumptionViolation
// for the first hard failure unless throw_on_failure is false.
ValidationReport validate_model(const DiffusionModel& model, const ValidationGrid& grid,
                                bool throw_on_failure = true);

// --- generator ---------------------------------------------------------------

// Twice-differentiable scalar field: analytic derivatives when provided,
// central differences with step h otherwise.
struct SmoothField {
    std::function<double(std::span<const double>)> value;
    std::function<void(std::span<const double>, std::span<double>)> gradient;  // optional
    std::function<void(std::span<const double>, std::span<double>)> hessian;   // optional, row-major
    double fd_step = 1e-5;

    static SmoothField from_value(std::function<double(std::span<const double>)> v,
                                  double h = 1e-5);
};

// A u(x) = -1/2 tr(a D^2 u) - <b, Du> + c u at an interior point (x_d > 0).
double apply_generator(const DiffusionModel& model, const SmoothField& u,
                       std::span<const double> x);

} // namespace fkd
