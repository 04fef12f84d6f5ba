#pragma once

#include <functional>
#include <vector>

#include "fkd/errors.hpp"

namespace fkd {

struct QuadOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    int max_subdivisions = 2000;
};

// Adaptive Gauss-Kronrod (G7,K15) on [a, b]. Throws QuadratureFailure when the
// tolerance is unreachable within the subdivision budget.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadOptions& opt = {});

// Same integral computed in the log variable u = ln(y): integrands behaving
// like power laws near 0 become smooth exponentials. Requires 0 < a < b.
double integrate_log(const std::function<double(double)>& f, double a, double b,
                     const QuadOptions& opt = {});

// Improper integral of a nonnegative integrand toward the left endpoint 0,
// evaluated as partial integrals over [b*2^-k, b], k = 1..k_max.
//
// The verdict is an explicit decidable proxy for finiteness. Declared finite
// when successive panel increments fall below the tail tolerance (the
// extrapolated geometric tail is then added to the value), or divergent when
// partials exceed divergence_threshold while growing monotonically for >= 4
// consecutive refinements. Because the panels are geometric, an integrand
// behaving like y^e near 0 produces increments with constant ratio 2^-(1+e);
// a sustained ratio >= ratio_divergent therefore also declares divergence
// (this is what catches logarithmic divergence, whose partials grow like
// k*ln2 and would never reach any absolute threshold), and a sustained ratio
// <= ratio_finite with a negligible extrapolated tail declares finiteness.
// Anything else within k_max panels is Inconclusive: reported, never coerced.
// Before any finite verdict, the integrand is scouted several octaves below
// the current endpoint: coefficient transients (e.g. strong mean reversion)
// can make increments dip below tolerance long before the asymptotic power
// law takes over, and the scouts catch the regrowth.
struct ImproperOptions {
    double tail_abs_tol = 1e-9;
    double tail_rel_tol = 1e-6;
    double divergence_threshold = 1e9;
    int divergence_run = 4;
    double ratio_divergent = 0.999;
    int ratio_divergent_run = 8;
    double ratio_finite = 0.97;
    int ratio_finite_run = 6;
    double ratio_extrap_rel = 3e-4;   // extrapolated-tail share accepted outright
    double ratio_extrap_loose = 5e-2; // accepted when the ratio is ultra-stable
    int small_run = 4;
    double scout_factor = 8.0;
    int k_max = 60;
    QuadOptions panel{1e-10, 1e-16, 2000};
};

struct ImproperResult {
    enum class Verdict { Finite, Divergent, Inconclusive };
    Verdict verdict = Verdict::Inconclusive;
    double value = 0.0;       // last partial integral
    double error_bound = 0.0; // tail estimate when finite
    std::vector<double> partials;
};

// panel_f(lo, hi) must return the integral of the integrand over [lo, hi] and
// is called on contiguous descending panels; scout_f(y), when provided, must
// return an increment-scale estimate near y (the integral over [y, 2y], or a
// proxy) without disturbing panel_f's state.
ImproperResult improper_left_limit(const std::function<double(double, double)>& panel_f,
                                   double b, const ImproperOptions& opt = {},
                                   const std::function<double(double)>& scout_f = nullptr);

// Convenience wrapper for plain integrands: panels near 0 are integrated in
// the log variable.
ImproperResult improper_left_limit_f(const std::function<double(double)>& f, double b,
                                     const ImproperOptions& opt = {});

} // namespace fkd
