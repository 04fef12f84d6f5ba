#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fkd/errors.hpp"

namespace fkd {

// One-dimensional coefficient in the degenerate coordinate, represented as a
// finite sum of power terms  sum_i  a_i * y^{p_i}  with p_i >= 0.
//
// Keeping the closed form (rather than an opaque callable) is what makes the
// analytic boundary classification and the closed-form scale exponents
// possible: the leading behaviour at y = 0 can be read off exactly.
class Coeff1D {
public:
    struct Term {
        double coeff = 0.0;
        double exponent = 0.0; // >= 0 so the coefficient extends continuously to y = 0
    };

    Coeff1D() = default;
    explicit Coeff1D(std::vector<Term> terms);

    static Coeff1D constant(double v) { return Coeff1D({{v, 0.0}}); }
    // a + b*y
    static Coeff1D affine(double a, double b) { return Coeff1D({{a, 0.0}, {b, 1.0}}); }
    // a * y^p
    static Coeff1D power(double a, double p) { return Coeff1D({{a, p}}); }
    static Coeff1D zero() { return Coeff1D(); }

    double operator()(double y) const {
        double v = 0.0;
        for (const auto& t : terms_) {
            v += (t.exponent == 0.0) ? t.coeff : t.coeff * std::pow(y, t.exponent);
        }
        return v;
    }

    double value_at_zero() const;

    // Dominant term as y -> 0+ (smallest exponent with a nonzero coefficient);
    // nullopt for the identically-zero coefficient.
    std::optional<Term> leading_term_at_zero() const;

    bool is_identically_zero() const;
    bool is_constant() const; // only exponent-0 terms

    // Single power term, possibly constant (fast path for scale exponents).
    std::optional<Term> as_single_term() const;

    const std::vector<Term>& terms() const { return terms_; }

    // Pointwise square, still a power sum.
    Coeff1D squared() const;

    // Sup of |coeff|(1+y)^{-1}|...| proxy: max |value| over [0, y_hi] sampled.
    double sampled_max_abs(double y_hi, int n = 128) const;

private:
    std::vector<Term> terms_;
};

// Scalar field from a small closed-form catalog, evaluated at (t, x).
// Time-independent kinds ignore t. Fields are pure and safe to share.
class FieldExpr {
public:
    enum class Kind {
        Constant,     // a
        Linear,       // a + <coeffs, x>
        Power,        // a * x[coord]^p
        Sum,
        Product,
        PutPayoff,    // max(strike - x[coord], 0)
        CallPayoff,   // max(x[coord] - strike, 0)
        TimeDiscounted, // exp(-rate*(T - t)) * inner(x)
    };

    FieldExpr() : kind_(Kind::Constant), a_(0.0) {}

    static FieldExpr constant(double v);
    static FieldExpr linear(double intercept, std::vector<double> coeffs);
    static FieldExpr power(int coord, double coeff, double exponent);
    static FieldExpr sum(std::vector<FieldExpr> terms);
    static FieldExpr product(std::vector<FieldExpr> factors);
    static FieldExpr put_payoff(int coord, double strike);
    static FieldExpr call_payoff(int coord, double strike);
    static FieldExpr time_discounted(double rate, double horizon, FieldExpr inner);
    static FieldExpr from_coeff1d(const Coeff1D& c, int coord);

    double operator()(double t, std::span<const double> x) const;
    double operator()(std::span<const double> x) const { return (*this)(0.0, x); }

    bool time_dependent() const;

    Kind kind() const { return kind_; }
    double a() const { return a_; }
    double b() const { return b_; }
    int coord() const { return coord_; }
    const std::vector<double>& coeffs() const { return coeffs_; }
    const std::vector<FieldExpr>& children() const { return children_; }

private:
    Kind kind_;
    double a_ = 0.0; // value / coeff / strike / rate
    double b_ = 0.0; // exponent / horizon
    int coord_ = 0;
    std::vector<double> coeffs_;
    std::vector<FieldExpr> children_;
};

// A field plus the metadata the estimators and validators need: where it is
// declared (interior, boundary, ...) and its linear-growth constant.
enum class FieldDomain { Interior, Gamma1, FullBoundary, ParabolicPartial, ParabolicFull };

struct ScalarField {
    FieldExpr expr;
    FieldDomain domain = FieldDomain::Interior;
    double growth_K = 0.0; // 0 = derive from samples at validation time

    double operator()(double t, std::span<const double> x) const { return expr(t, x); }
    double operator()(std::span<const double> x) const { return expr(x); }
    bool covers_gamma0() const {
        return domain == FieldDomain::FullBoundary || domain == FieldDomain::ParabolicFull;
    }
};

} // namespace fkd
