#include "fkd/coeffs.hpp"

#include <algorithm>
#include <cmath>

namespace fkd {

Coeff1D::Coeff1D(std::vector<Term> terms) : terms_(std::move(terms)) {
    for (const auto& t : terms_) {
        if (t.exponent < 0.0)
            fail(ErrorCategory::ParamOutOfRange,
                 "coefficient exponents must be >= 0 for continuity at the boundary");
        if (!std::isfinite(t.coeff) || !std::isfinite(t.exponent))
            fail(ErrorCategory::ParamOutOfRange, "non-finite coefficient term");
    }
    std::erase_if(terms_, [](const Term& t) { return t.coeff == 0.0; });
}

double Coeff1D::value_at_zero() const {
    double v = 0.0;
    for (const auto& t : terms_)
        if (t.exponent == 0.0) v += t.coeff;
    return v;
}

std::optional<Coeff1D::Term> Coeff1D::leading_term_at_zero() const {
    std::optional<Term> lead;
    for (const auto& t : terms_) {
        if (!lead || t.exponent < lead->exponent) lead = t;
    }
    return lead;
}

bool Coeff1D::is_identically_zero() const { return terms_.empty(); }

bool Coeff1D::is_constant() const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [](const Term& t) { return t.exponent == 0.0; });
}

std::optional<Coeff1D::Term> Coeff1D::as_single_term() const {
    if (terms_.size() == 1) return terms_[0];
    if (terms_.empty()) return Term{0.0, 0.0};
    return std::nullopt;
}

Coeff1D Coeff1D::squared() const {
    std::vector<Term> out;
    for (const auto& s : terms_)
        for (const auto& t : terms_) out.push_back({s.coeff * t.coeff, s.exponent + t.exponent});
    // merge equal exponents
    std::sort(out.begin(), out.end(), [](const Term& a, const Term& b) { return a.exponent < b.exponent; });
    std::vector<Term> merged;
    for (const auto& t : out) {
        if (!merged.empty() && merged.back().exponent == t.exponent)
            merged.back().coeff += t.coeff;
        else
            merged.push_back(t);
    }
    return Coeff1D(std::move(merged));
}

double Coeff1D::sampled_max_abs(double y_hi, int n) const {
    double m = std::abs((*this)(0.0));
    for (int i = 1; i <= n; ++i) {
        double y = y_hi * static_cast<double>(i) / n;
        m = std::max(m, std::abs((*this)(y)));
    }
    return m;
}

FieldExpr FieldExpr::constant(double v) {
    FieldExpr e;
    e.kind_ = Kind::Constant;
    e.a_ = v;
    return e;
}

FieldExpr FieldExpr::linear(double intercept, std::vector<double> coeffs) {
    FieldExpr e;
    e.kind_ = Kind::Linear;
    e.a_ = intercept;
    e.coeffs_ = std::move(coeffs);
    return e;
}

FieldExpr FieldExpr::power(int coord, double coeff, double exponent) {
    FieldExpr e;
    e.kind_ = Kind::Power;
    e.coord_ = coord;
    e.a_ = coeff;
    e.b_ = exponent;
    return e;
}

FieldExpr FieldExpr::sum(std::vector<FieldExpr> terms) {
    FieldExpr e;
    e.kind_ = Kind::Sum;
    e.children_ = std::move(terms);
    return e;
}

FieldExpr FieldExpr::product(std::vector<FieldExpr> factors) {
    FieldExpr e;
    e.kind_ = Kind::Product;
    e.children_ = std::move(factors);
    return e;
}

FieldExpr FieldExpr::put_payoff(int coord, double strike) {
    FieldExpr e;
    e.kind_ = Kind::PutPayoff;
    e.coord_ = coord;
    e.a_ = strike;
    return e;
}

FieldExpr FieldExpr::call_payoff(int coord, double strike) {
    FieldExpr e;
    e.kind_ = Kind::CallPayoff;
    e.coord_ = coord;
    e.a_ = strike;
    return e;
}

FieldExpr FieldExpr::time_discounted(double rate, double horizon, FieldExpr inner) {
    FieldExpr e;
    e.kind_ = Kind::TimeDiscounted;
    e.a_ = rate;
    e.b_ = horizon;
    e.children_.push_back(std::move(inner));
    return e;
}

FieldExpr FieldExpr::from_coeff1d(const Coeff1D& c, int coord) {
    std::vector<FieldExpr> terms;
    for (const auto& t : c.terms()) terms.push_back(power(coord, t.coeff, t.exponent));
    if (terms.empty()) return constant(0.0);
    if (terms.size() == 1) return terms[0];
    return sum(std::move(terms));
}

double FieldExpr::operator()(double t, std::span<const double> x) const {
    switch (kind_) {
        case Kind::Constant:
            return a_;
        case Kind::Linear: {
            double v = a_;
            for (std::size_t i = 0; i < coeffs_.size() && i < x.size(); ++i) v += coeffs_[i] * x[i];
            return v;
        }
        case Kind::Power: {
            if (coord_ < 0 || static_cast<std::size_t>(coord_) >= x.size())
                fail(ErrorCategory::EvaluationFailure, "field coordinate out of range");
            double base = x[coord_];
            if (b_ == 0.0) return a_;
            if (b_ == 1.0) return a_ * base;
            if (b_ == 2.0) return a_ * base * base;
            return a_ * std::pow(base, b_);
        }
        case Kind::Sum: {
            double v = 0.0;
            for (const auto& c : children_) v += c(t, x);
            return v;
        }
        case Kind::Product: {
            double v = 1.0;
            for (const auto& c : children_) v *= c(t, x);
            return v;
        }
        case Kind::PutPayoff: {
            double v = a_ - x[coord_];
            return v > 0.0 ? v : 0.0;
        }
        case Kind::CallPayoff: {
            double v = x[coord_] - a_;
            return v > 0.0 ? v : 0.0;
        }
        case Kind::TimeDiscounted:
            return std::exp(-a_ * (b_ - t)) * children_[0](t, x);
    }
    return 0.0;
}

bool FieldExpr::time_dependent() const {
    if (kind_ == Kind::TimeDiscounted) return true;
    for (const auto& c : children_)
        if (c.time_dependent()) return true;
    return false;
}

} // namespace fkd
