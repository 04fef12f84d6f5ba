#include <doctest.h>

#include <cmath>

#include "fkd/quadrature.hpp"

using namespace fkd;

TEST_CASE("adaptive panels reproduce analytic integrals") {
    CHECK(integrate([](double x) { return x * x; }, 0.0, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(integrate([](double x) { return std::sin(x); }, 0.0, M_PI) ==
          doctest::Approx(2.0).epsilon(1e-12));
    // integrable endpoint behaviour handled by splitting
    CHECK(integrate([](double x) { return 1.0 / std::sqrt(x); }, 1e-12, 1.0) ==
          doctest::Approx(2.0 - 2e-6).epsilon(1e-8));
}

TEST_CASE("log-variable integration matches the plain panels away from 0") {
    auto f = [](double x) { return std::exp(-x) / x; };
    double direct = integrate(f, 0.5, 4.0);
    double logged = integrate_log(f, 0.5, 4.0);
    CHECK(direct == doctest::Approx(logged).epsilon(1e-10));
}

TEST_CASE("power-law verdicts near the endpoint") {
    // exponent > -1: finite with the exact value
    auto r1 = improper_left_limit_f([](double y) { return std::pow(y, -0.4); }, 1.0);
    REQUIRE(r1.verdict == ImproperResult::Verdict::Finite);
    CHECK(r1.value == doctest::Approx(1.0 / 0.6).epsilon(1e-5));

    // exponent -1: logarithmic divergence (constant panel increments)
    auto r2 = improper_left_limit_f([](double y) { return 1.0 / y; }, 1.0);
    CHECK(r2.verdict == ImproperResult::Verdict::Divergent);

    // exponent < -1: blow-up divergence
    auto r3 = improper_left_limit_f([](double y) { return std::pow(y, -2.0); }, 1.0);
    CHECK(r3.verdict == ImproperResult::Verdict::Divergent);

    // constant integrand: exact unit mass
    auto r4 = improper_left_limit_f([](double) { return 1.0; }, 1.0);
    REQUIRE(r4.verdict == ImproperResult::Verdict::Finite);
    CHECK(r4.value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r4.error_bound >= 0.0);
}

TEST_CASE("dip transients do not fool the finite verdict") {
    // a deep exponential dip followed by power-law regrowth toward 0
    auto f = [](double y) { return std::pow(y, -3.0) * std::exp(-40.0 * (1.0 - y)); };
    auto r = improper_left_limit_f(f, 1.0);
    CHECK(r.verdict == ImproperResult::Verdict::Divergent);
}

TEST_CASE("partial-integral evidence is monotone for nonnegative integrands") {
    auto r = improper_left_limit_f([](double y) { return std::pow(y, -0.7); }, 1.0);
    REQUIRE(r.verdict == ImproperResult::Verdict::Finite);
    for (std::size_t i = 1; i < r.partials.size(); ++i) CHECK(r.partials[i] >= r.partials[i - 1]);
}
