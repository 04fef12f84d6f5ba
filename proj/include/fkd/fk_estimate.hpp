#pragma once

#include <functional>
#include <optional>

#include "fkd/boundary.hpp"
#include "fkd/simulate.hpp"

namespace fkd {

enum class ProblemKind { EllipticBvp, ParabolicBvp, EllipticObstacle, ParabolicObstacle };
enum class Variant { Tau, Lambda };

const char* to_string(ProblemKind k);
const char* to_string(Variant v);

bool is_parabolic(ProblemKind k);
bool is_obstacle(ProblemKind k);

enum class BoundaryMode { Partial, Full };

// Problem data for the representation formulas. g must cover the full
// boundary for the tau variant under scenario B (the full Dirichlet
// condition); under scenario A, or for the lambda variant, data on Gamma1 is
// enough. Obstacle problems additionally require psi <= g on the declared
// boundary portion.
struct ProblemSpec {
    ProblemKind kind = ProblemKind::EllipticBvp;
    Variant variant = Variant::Tau;
    ScalarField f;
    ScalarField g;
    std::optional<ScalarField> psi;
    double T = 1.0; // parabolic horizon

    BoundaryMode boundary_mode(Scenario scenario) const {
        return (scenario == Scenario::B && variant == Variant::Tau) ? BoundaryMode::Full
                                                                    : BoundaryMode::Partial;
    }

    // Sampled structural validation (compatibility, data coverage); throws.
    void validate(const DiffusionModel& model, const DomainSpec& domain,
                  Scenario scenario) const;
};

struct Diagnostics {
    double gamma0_touch_rate = 0.0;
    double horizon_censor_rate = 0.0;
};

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n_paths = 0;
    double ci95_lo = 0.0;
    double ci95_hi = 0.0;
    double truncation_bias_bound = 0.0;
    Diagnostics diagnostics;
};

struct EstimatorConfig {
    SimConfig sim;
    long n_paths = 10000;
    int threads = 1;
};

// Default elliptic truncation horizon: max(10/c0, 5 * exit-time estimate).
double default_elliptic_horizon(const DiffusionModel& model, double exit_time_estimate = 0.0);

// Monte Carlo value of the elliptic boundary-value representation at x:
// discounted boundary payoff at the tau/lambda exit plus the discounted
// running cost, with horizon-censored paths contributing the running cost
// only and inflating the certified truncation bias bound.
Estimate estimate_elliptic(const DiffusionModel& model, const DomainSpec& domain,
                           const ProblemSpec& spec, std::span<const double> x,
                           const EstimatorConfig& cfg);

// Parabolic analogue with hard terminal time T (no truncation bias).
Estimate estimate_parabolic(const DiffusionModel& model, const DomainSpec& domain,
                            const ProblemSpec& spec, double t, std::span<const double> x,
                            const EstimatorConfig& cfg);

// Per-step stopping predicate; theta2 is the first node (or start point)
// where it fires.
using StoppingRule = std::function<bool(double t, std::span<const double> x)>;

// The two-stopping-time functional: discounted psi when the rule stops
// strictly before the exit, discounted g when the exit comes first, plus the
// running cost up to the earlier of the two.
Estimate j_functional(const DiffusionModel& model, const DomainSpec& domain,
                      const ProblemSpec& spec, double t, std::span<const double> x,
                      const StoppingRule& rule, const EstimatorConfig& cfg);

// Shared batch-mean accumulator: per-batch Welford statistics merged in batch
// order, so results are independent of thread scheduling.
struct BatchAccumulator {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double v) {
        ++n;
        double delta = v - mean;
        mean += delta / n;
        m2 += delta * (v - mean);
    }
    void merge(const BatchAccumulator& o) {
        if (o.n == 0) return;
        if (n == 0) { *this = o; return; }
        double delta = o.mean - mean;
        long total = n + o.n;
        m2 += o.m2 + delta * delta * (static_cast<double>(n) * o.n / total);
        mean += delta * o.n / total;
        n = total;
    }
    double std_error() const {
        if (n < 2) return 0.0;
        return std::sqrt(m2 / (static_cast<double>(n) * (n - 1)));
    }
};

// Runs body(path_index) -> sample value over n samples in fixed-size batches,
// optionally on several threads; reduction order is deterministic.
BatchAccumulator run_batched(long n_samples, int threads,
                             const std::function<double(long)>& body);

double field_growth_constant(const ScalarField& field, const DomainSpec& domain, int d);

// Certified envelope on the truncated elliptic tail:
//   K (1 + ||x||) (1 + sqrt(M / c0)) exp(-c0 * horizon)
// with K the largest declared/derived growth constant and M the
// supermartingale constant.
double elliptic_truncation_bound(const DiffusionModel& model, const DomainSpec& domain,
                                 const ProblemSpec& spec, std::span<const double> x,
                                 double horizon);

} // namespace fkd
