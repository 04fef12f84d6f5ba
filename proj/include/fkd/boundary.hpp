#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fkd/model.hpp"
#include "fkd/quadrature.hpp"

namespace fkd {

// Value of an improper integral near the degenerate endpoint, together with
// the evidence that produced the verdict (partial integrals over [2^-k b, b]).
struct ExtendedReal {
    enum class Kind { Finite, Divergent, Inconclusive };
    Kind kind = Kind::Inconclusive;
    double value = 0.0;
    double error_bound = 0.0;
    std::vector<double> partials;

    bool finite() const { return kind == Kind::Finite; }
    bool divergent() const { return kind == Kind::Divergent; }

    static ExtendedReal from(const ImproperResult& r);
};

enum class BoundaryLabel { Regular, Exit, Entrance, NaturalAttracting, NaturalNonAttracting };
enum class Scenario { A, B };
enum class AnalyticCase { a, b, c, d, e, unmatched };

const char* to_string(BoundaryLabel l);
const char* to_string(Scenario s);
const char* to_string(AnalyticCase c);

struct BoundaryClassification {
    std::optional<ExtendedReal> S0b, M0b, Sigma0, N0;
    BoundaryLabel label = BoundaryLabel::Regular;
    Scenario scenario = Scenario::B;
    AnalyticCase analytic_case = AnalyticCase::unmatched;
    double probe_b = 1.0;
};

// Result of the closed-form case analysis; scenario may be unknown when the
// model falls outside both the standard case table and the catalog extension.
struct AnalyticClassification {
    AnalyticCase which = AnalyticCase::unmatched;
    std::optional<Scenario> scenario;
    bool extension = false; // concluded via the b_d(0) = 0 power-law extension
};

// Scale density s(y) normalized to s(y0) = 1; the exponent integral is closed
// form whenever sigma0^2 is a single power term (all presets), and adaptive
// quadrature otherwise.
double scale_density(const DiffusionModel& model, double y, double y0);

// Speed density m(y) = 1 / (eta^2(y) s(y)).
double speed_density(const DiffusionModel& model, double y, double y0);

enum class LimitIntegral { S, M, Sigma, N };

// Improper integrals S(0,b], M(0,b], Sigma(0,b), N(0,b) by geometric endpoint
// refinement. Sigma and N use the iterated forms with a proper inner integral:
//   Sigma(0,y) = int_0^y M[xi,y] s(xi) dxi,   N(0,y) = int_0^y S[xi,y] m(xi) dxi.
ExtendedReal limit_integral(LimitIntegral which, const DiffusionModel& model, double probe_b);

double default_probe_b(const DiffusionModel& model, const DomainSpec& domain);

// Decision-graph classification of the origin for X^(d). Computes the minimal
// set of integrals unless compute_all is set (the CLI report computes all four
// and cross-checks the finiteness implications).
BoundaryClassification classify_origin(const DiffusionModel& model, double probe_b,
                                       bool compute_all = false);

AnalyticClassification classify_analytic(const DiffusionModel& model);

// w_{a,b}(y) = P^y(T_b < T_a) = S[a,y] / S[a,b],  0 < a < y < b.
double hitting_prob(const DiffusionModel& model, double a, double y, double b);

// v_{a,b}(y) = E^y[T_a ^ T_b] via the scale/speed representation.
double expected_exit_time(const DiffusionModel& model, double a, double y, double b);

// Monte Carlo oracle for the two-barrier exit experiment on X^(d):
// Euler stepping with per-step Brownian-bridge crossing tests so the barrier
// bias is O(dt) rather than O(sqrt(dt)). Used to validate the quadrature path.
struct ExitSampleStats {
    double prob_hit_upper = 0.0;
    double prob_stderr = 0.0;
    double mean_exit_time = 0.0;
    double time_stderr = 0.0;
    long n_paths = 0;
};

ExitSampleStats sample_exit_mc(const DiffusionModel& model, double a, double y, double b,
                               long n_paths, double dt, std::uint64_t seed,
                               double t_cap = 1e4);

} // namespace fkd
