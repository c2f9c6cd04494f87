#include "doctest.h"
#include "tvt/coefficients.hpp"

using namespace tvt;

TEST_CASE("select_xi: midpoint, equal case, and dissipation conditions") {
    // interval (0.5, 1.5), midpoint tau*mu1
    CHECK(select_xi(2.0, 1.0, 0.5) == doctest::Approx(1.0));
    CHECK(select_xi(1.0, 1.0, 0.5) == doctest::Approx(0.5));
    CHECK_THROWS_AS(select_xi(1.0, 2.0, 0.5), outside_theorem_error);

    // both dissipation coefficients nonnegative at the midpoint
    const Real mu1 = 2.0, mu2 = 1.0, tau = 0.5;
    const Real xi = select_xi(mu1, mu2, tau);
    CHECK(mu1 - xi / (2.0 * tau) - mu2 / 2.0 == doctest::Approx(0.5));
    CHECK(xi / (2.0 * tau) - mu2 / 2.0 == doctest::Approx(0.5));
}

TEST_CASE("build_theorem_coeffs: derived constants and failure modes") {
    const auto kernel = RelaxationKernel::exponential(1.0, 2.0);  // mass 1/2

    const auto c = build_theorem_coeffs(1, 1, 1, 1, 2, 2, 2, 1, 0.5, kernel);
    CHECK(c.gamma == doctest::Approx(1.0));
    CHECK(c.beta == doctest::Approx(1.0));
    CHECK(c.lambda == doctest::Approx(1.5));
    CHECK(c.xi == doctest::Approx(1.0));
    CHECK(c.theorem_mode);

    // re-validating the output passes
    CHECK_NOTHROW(validate(c));

    // gamma = b rho1/K - rho2 = 0 at the boundary
    CHECK_THROWS_AS(build_theorem_coeffs(1, 1, 1, 1, 1, 2, 2, 1, 0.5, kernel),
                    structural_condition_error);
    // lambda <= 0: kernel mass 2 exceeds delta - K rho3/rho1 margin
    CHECK_THROWS_AS(build_theorem_coeffs(1, 1, 1, 1, 2, 1.4, 2, 1, 0.5,
                                         RelaxationKernel::exponential(2.0, 1.0)),
                    hypothesis_error);
    CHECK_THROWS_AS(build_theorem_coeffs(-1, 1, 1, 1, 2, 2, 2, 1, 0.5, kernel),
                    invalid_coefficient_error);
}

TEST_CASE("m0: minimum of the two dissipation coefficients") {
    const auto kernel = RelaxationKernel::exponential(1.0, 2.0);
    auto c = build_theorem_coeffs(1, 1, 1, 1, 2, 2, 2, 1, 0.5, kernel);
    CHECK(m0(c) == doctest::Approx(0.5));

    // equal weights collapse both braces to zero
    auto ce = build_theorem_coeffs(1, 1, 1, 1, 2, 2, 1, 1, 0.5, kernel);
    CHECK(m0(ce) == doctest::Approx(0.0));

    // linear in beta: delta = 3 gives beta = 2 with the same mus
    auto c2 = build_theorem_coeffs(1, 1, 1, 1, 2, 3, 2, 1, 0.5, kernel);
    CHECK(m0(c2) == doctest::Approx(2.0 * m0(c) / c.beta).epsilon(1e-12));
}

TEST_CASE("exploratory coefficients: mu2 > mu1 allowed with fallback xi") {
    const auto kernel = RelaxationKernel::exponential(1.0, 2.0);
    const auto c = build_exploratory_coeffs(1, 1, 1, 1, 2, 1, 1, 2, 1.0, 2.0, 0.5, kernel);
    CHECK(c.exploratory);
    CHECK_FALSE(c.theorem_mode);
    CHECK(c.xi == doctest::Approx(0.5 * 2.0));  // tau * mu2

    // mu2 = 0 is admissible (no delayed feedback)
    const auto c0 = build_theorem_coeffs(1, 1, 1, 1, 2, 2, 2, 0.0, 0.5, kernel);
    CHECK(c0.xi == doctest::Approx(0.5 * 2.0));  // midpoint of (0, 2 tau mu1)
}

TEST_CASE("validate: xi interval and structural relations") {
    const auto kernel = RelaxationKernel::exponential(1.0, 2.0);
    auto c = build_theorem_coeffs(1, 1, 1, 1, 2, 2, 2, 1, 0.5, kernel);

    auto bad = c;
    bad.xi = 2.0;  // outside (0.5, 1.5)
    CHECK_THROWS_AS(validate(bad), invalid_coefficient_error);

    bad = c;
    bad.gamma = 1.5;  // breaks b rho1/K - rho2 = gamma
    CHECK_THROWS_AS(validate(bad), structural_condition_error);

    bad = c;
    bad.mu2 = 3.0;
    CHECK_THROWS_AS(validate(bad), outside_theorem_error);
}
