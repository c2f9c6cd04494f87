#ifndef TVT_COEFFICIENTS_HPP
#define TVT_COEFFICIENTS_HPP

#include "tvt/kernels.hpp"

namespace tvt {

/// Physical constants of the coupled system plus the derived delay weight xi
/// and the effective stiffness margin lambda = delta - gbar.
///
/// theorem_mode marks sets that satisfy the structural relations
///   b rho1 / K - rho2 = gamma,   delta - K rho3 / rho1 = beta
/// together with mu2 <= mu1 and lambda > 0; only those carry the guaranteed
/// decay machinery. exploratory sets are merely simulation-valid.
struct Coefficients {
    Real rho1 = 1, rho2 = 1, rho3 = 1;
    Real K = 1, b = 1, beta = 1, gamma = 1, delta = 1;
    Real mu1 = 1, mu2 = 1;
    Real tau = 1;
    Real xi = 1;
    Real lambda = 0;
    bool theorem_mode = false;
    bool exploratory = false;

    bool equal_weights() const { return mu1 == mu2; }
};

/// Midpoint of the admissible interval (tau mu2, tau (2 mu1 - mu2)) when
/// mu2 < mu1; tau mu2 when equal. Throws outside_theorem_error for mu2 > mu1.
Real select_xi(Real mu1, Real mu2, Real tau);

/// Derives gamma, beta, lambda, xi from the primitive constants and validates
/// every positivity condition of the decay theorem.
Coefficients build_theorem_coeffs(Real rho1, Real rho2, Real rho3, Real K, Real b, Real delta,
                                  Real mu1, Real mu2, Real tau, const RelaxationKernel& kernel);

/// Accepts an explicit constant set without the structural relations; mu2 may
/// exceed mu1 (xi then falls back to tau mu2 and the set is flagged).
Coefficients build_exploratory_coeffs(Real rho1, Real rho2, Real rho3, Real K, Real b, Real beta,
                                      Real gamma, Real delta, Real mu1, Real mu2, Real tau,
                                      const RelaxationKernel& kernel);

/// min{beta (mu1 - xi/(2 tau) - mu2/2), beta (xi/(2 tau) - mu2/2)}.
Real m0(const Coefficients& c);

/// Re-checks every invariant of an already-built set.
void validate(const Coefficients& c);

}  // namespace tvt

#endif
