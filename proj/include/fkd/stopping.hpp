#pragma once

#include <memory>
#include <string>

#include "fkd/pde.hpp"

namespace fkd {

// Exercise policy: immediate/never, a continuation-region membership test
// interpolated from a PDE solution, or per-slab regression coefficients from
// least-squares Monte Carlo.
class StoppingPolicy {
public:
    enum class Kind { Immediate, Never, Region, Regression };

    static StoppingPolicy immediate();
    static StoppingPolicy never();
    static StoppingPolicy region(std::shared_ptr<const PdeSolution> solution, ScalarField psi,
                                 double region_tol, bool time_dependent);
    static StoppingPolicy regression(std::vector<double> time_grid,
                                     std::vector<std::vector<double>> slab_coeffs,
                                     std::vector<int> slab_degrees, ScalarField psi, int dim,
                                     bool itm_only, double x_scale);

    Kind kind() const { return kind_; }
    const std::vector<double>& time_grid() const { return time_grid_; }

    // Decision at a point; regression policies index the nearest slab at or
    // before t.
    bool should_stop(double t, std::span<const double> x) const;

    // Per-node rule for j_functional; regression decisions are gated to a
    // half-slab window after each decision date.
    StoppingRule as_rule() const;

    // d = 1: (t_k, x*_k) exercise-boundary polyline (or a single x* for
    // stationary region policies). Empty when no boundary is found.
    std::vector<std::pair<double, double>> exercise_boundary(double x_lo, double x_hi,
                                                             int scan = 256) const;

private:
    Kind kind_ = Kind::Never;
    std::shared_ptr<const PdeSolution> pde_;
    ScalarField psi_;
    double region_tol_ = 0.0;
    bool time_dependent_ = false;
    std::vector<double> time_grid_;
    std::vector<std::vector<double>> coeffs_;
    std::vector<int> slab_degrees_;
    int dim_ = 1;
    bool itm_only_ = true;
    double x_scale_ = 1.0;

    double continuation_fit(std::size_t slab, std::span<const double> x) const;
    friend struct PolicyAccess;
};

struct LsmcConfig {
    EstimatorConfig est;       // resimulation paths + sim settings
    long n_train = 20000;      // regression paths
    int n_slabs = 50;          // decision dates
    int basis_degree = 0;      // 0 = default (3, or 5 when d == 1)
    bool itm_only = true;
};

struct LsmcResult {
    Estimate estimate;         // low-biased resimulated value (headline)
    double regression_value = 0.0; // high-biased training value (diagnostic)
    StoppingPolicy policy;
    std::vector<std::string> warnings;
};

// Backward regression over a time grid for the parabolic obstacle problem;
// the headline estimate comes from fresh paths driven by the learned policy.
LsmcResult lsmc_value(const DiffusionModel& model, const DomainSpec& domain,
                      const ProblemSpec& spec, double t, std::span<const double> x,
                      const LsmcConfig& cfg);

// Elliptic obstacle value via the truncated-horizon parabolic reduction on
// [0, t_max] with terminal value max(psi, 0); the discount floor c >= c0
// certifies the tail.
LsmcResult elliptic_obstacle_value(const DiffusionModel& model, const DomainSpec& domain,
                                   const ProblemSpec& spec, std::span<const double> x,
                                   const LsmcConfig& cfg);

// Region policy from an obstacle PDE solution: the continuation region is
// {u - psi > region_tol} with multilinear membership interpolation.
StoppingPolicy policy_from_pde(std::shared_ptr<const PdeSolution> solution, ScalarField psi,
                               double region_tol = 0.0);

// Free-boundary stability across one refinement: the d = 1 boundary location
// must not move by more than two cells of the coarse grid.
void check_free_boundary_stability(const PdeSolution& coarse, const PdeSolution& fine,
                                   const ScalarField& psi, double region_tol = 0.0);

// J-functional evaluation under a policy (resimulation with fresh paths).
Estimate evaluate_policy(const DiffusionModel& model, const DomainSpec& domain,
                         const ProblemSpec& spec, double t, std::span<const double> x,
                         const StoppingPolicy& policy, const EstimatorConfig& cfg);

} // namespace fkd
