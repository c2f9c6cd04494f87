#include "tvt/coefficients.hpp"

#include <cmath>
#include <limits>

namespace tvt {

namespace {

constexpr Real kEqTol = 1e-12;  // relative tolerance for the structural relations

void require_positive(Real v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw invalid_coefficient_error(std::string(name) + " must be > 0");
}

void require_nonnegative(Real v, const char* name) {
    if (v < 0.0 || !std::isfinite(v))
        throw invalid_coefficient_error(std::string(name) + " must be >= 0");
}

bool rel_equal(Real a, Real b) {
    return std::abs(a - b) <= kEqTol * std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace

Real select_xi(Real mu1, Real mu2, Real tau) {
    require_positive(mu1, "mu1");
    require_nonnegative(mu2, "mu2");
    require_positive(tau, "tau");
    if (mu2 > mu1)
        throw outside_theorem_error("select_xi requires mu2 <= mu1");
    if (mu2 == mu1) return tau * mu2;
    // midpoint of (tau mu2, tau (2 mu1 - mu2)); equalizes the two dissipation
    // coefficients mu1 - xi/(2 tau) - mu2/2 and xi/(2 tau) - mu2/2
    return tau * mu1;
}

Coefficients build_theorem_coeffs(Real rho1, Real rho2, Real rho3, Real K, Real b, Real delta,
                                  Real mu1, Real mu2, Real tau, const RelaxationKernel& kernel) {
    require_positive(rho1, "rho1");
    require_positive(rho2, "rho2");
    require_positive(rho3, "rho3");
    require_positive(K, "K");
    require_positive(b, "b");
    require_positive(delta, "delta");
    require_positive(mu1, "mu1");
    require_nonnegative(mu2, "mu2");
    require_positive(tau, "tau");

    Coefficients c;
    c.rho1 = rho1;
    c.rho2 = rho2;
    c.rho3 = rho3;
    c.K = K;
    c.b = b;
    c.delta = delta;
    c.mu1 = mu1;
    c.mu2 = mu2;
    c.tau = tau;
    c.gamma = b * rho1 / K - rho2;
    c.beta = delta - K * rho3 / rho1;
    if (c.gamma <= 0.0)
        throw structural_condition_error("derived gamma = b rho1/K - rho2 is not positive");
    if (c.beta <= 0.0)
        throw structural_condition_error("derived beta = delta - K rho3/rho1 is not positive");
    c.lambda = delta - kernel.mass();
    if (c.lambda <= 0.0)
        throw hypothesis_error("lambda = delta - gbar must be positive");
    c.xi = select_xi(mu1, mu2, tau);
    c.theorem_mode = true;
    c.exploratory = false;
    validate(c);
    return c;
}

Coefficients build_exploratory_coeffs(Real rho1, Real rho2, Real rho3, Real K, Real b, Real beta,
                                      Real gamma, Real delta, Real mu1, Real mu2, Real tau,
                                      const RelaxationKernel& kernel) {
    require_positive(rho1, "rho1");
    require_positive(rho2, "rho2");
    require_positive(rho3, "rho3");
    require_positive(K, "K");
    require_positive(b, "b");
    require_positive(delta, "delta");
    require_nonnegative(beta, "beta");
    require_nonnegative(gamma, "gamma");
    require_nonnegative(mu1, "mu1");
    require_nonnegative(mu2, "mu2");
    require_positive(tau, "tau");

    Coefficients c;
    c.rho1 = rho1;
    c.rho2 = rho2;
    c.rho3 = rho3;
    c.K = K;
    c.b = b;
    c.beta = beta;
    c.gamma = gamma;
    c.delta = delta;
    c.mu1 = mu1;
    c.mu2 = mu2;
    c.tau = tau;
    c.lambda = kernel.has_mass() ? delta - kernel.mass() : std::numeric_limits<Real>::quiet_NaN();
    if (mu1 == 0.0)
        c.xi = tau * mu2;  // undamped probe; the delay-energy weight is inert
    else
        c.xi = mu2 <= mu1 ? select_xi(mu1, mu2, tau) : tau * mu2;
    c.theorem_mode = false;
    c.exploratory = true;
    return c;
}

Real m0(const Coefficients& c) {
    const Real a = c.mu1 - c.xi / (2.0 * c.tau) - c.mu2 / 2.0;
    const Real b = c.xi / (2.0 * c.tau) - c.mu2 / 2.0;
    return c.beta * std::min(a, b);
}

void validate(const Coefficients& c) {
    require_positive(c.rho1, "rho1");
    require_positive(c.rho2, "rho2");
    require_positive(c.rho3, "rho3");
    require_positive(c.K, "K");
    require_positive(c.b, "b");
    require_positive(c.delta, "delta");
    require_nonnegative(c.mu1, "mu1");
    require_nonnegative(c.mu2, "mu2");
    require_positive(c.tau, "tau");
    require_nonnegative(c.xi, "xi");
    if (!c.theorem_mode) return;
    require_positive(c.mu1, "mu1");
    require_positive(c.xi, "xi");

    require_positive(c.gamma, "gamma");
    require_positive(c.beta, "beta");
    if (!rel_equal(c.b * c.rho1 / c.K - c.rho2, c.gamma))
        throw structural_condition_error("gamma does not match b rho1/K - rho2");
    if (!rel_equal(c.delta - c.K * c.rho3 / c.rho1, c.beta))
        throw structural_condition_error("beta does not match delta - K rho3/rho1");
    if (c.mu2 > c.mu1) throw outside_theorem_error("theorem mode requires mu2 <= mu1");
    if (!(c.lambda > 0.0)) throw hypothesis_error("theorem mode requires lambda > 0");
    if (c.mu2 < c.mu1) {
        if (!(c.tau * c.mu2 < c.xi && c.xi < c.tau * (2.0 * c.mu1 - c.mu2)))
            throw invalid_coefficient_error("xi outside (tau mu2, tau (2 mu1 - mu2))");
    } else if (c.xi != c.tau * c.mu2) {
        throw invalid_coefficient_error("equal weights require xi = tau mu2");
    }
    // both dissipation coefficients must be nonnegative
    if (c.mu1 - c.xi / (2.0 * c.tau) - c.mu2 / 2.0 < 0.0 ||
        c.xi / (2.0 * c.tau) - c.mu2 / 2.0 < 0.0)
        throw invalid_coefficient_error("xi fails the dissipation-coefficient conditions");
}

}  // namespace tvt
