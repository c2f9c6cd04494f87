#ifndef TVT_FUNCTIONALS_HPP
#define TVT_FUNCTIONALS_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "tvt/integrator.hpp"

namespace tvt {

/// Constants of the weighted Lyapunov combination, selected by the recipe in
/// select_constants() and post-verified through evaluate_braces().
struct LyapunovConstants {
    enum class Case { strict, equal };
    Case weight_case = Case::strict;
    Real N = 0, N1 = 0, N2 = 0, N5 = 0, N6 = 1, N7 = 0;
    Real eps1 = 0, eps2 = 0, eps4 = 0, eps7 = 0;
    Real eta1 = 0, eta2 = 0;
    Real upsilon = 0;   // min(gamma, beta)
    Real Cp = 0;        // sharp Poincare constant 1/pi^2
    Real g0_cut = 0;    // cumulative kernel mass at the burn-in time
    Real c_lem = 0;     // exp(-2 tau), the I6 drain constant
};

/// Coefficients multiplying each quadratic term in the dissipation estimate of
/// the Lyapunov derivative. Every member except gcirc must be nonnegative for
/// the decay argument to close; gcirc is the (g o theta_x) gain.
struct BraceValues {
    Real phi_t = 0, psi_t = 0, shear = 0, psi_x = 0, theta_t = 0, theta_x = 0, z1 = 0;
    Real gprime = 0;   // multiplies (g' o theta_x) <= 0
    Real gcirc = 0;    // multiplies +(g o theta_x)
    Real i6_coeff = 0; // drains I6 (2 in the strict case, 2 N6 in the equal case)

    /// Most negative among the sign-constrained entries.
    std::pair<std::string, Real> worst() const;
};

/// Follows the dependency order of the selection recipe, instantiating each
/// "sufficiently large" threshold at margin_large times its bound and each
/// "sufficiently small" ceiling at margin_small times its bound, then
/// re-evaluates every brace; throws selection_failure_error when one is
/// negative. The equal-weight case additionally needs t0 with positive
/// cumulative mass.
LyapunovConstants select_constants(const Coefficients& c, const RelaxationKernel& kernel,
                                   Real t0, Real margin_large = 1.05, Real margin_small = 0.5);

BraceValues evaluate_braces(const LyapunovConstants& lc, const Coefficients& c,
                            const RelaxationKernel& kernel);

/// E-comparable drift coefficients reconstructed from the braces:
/// dL/dt <= -C E + C3 (g o theta_x).
struct DecayCoefficients {
    Real C = 0, C3 = 0;
};
DecayCoefficients decay_coefficients(const LyapunovConstants& lc, const BraceValues& braces,
                                     const Coefficients& c);

/// The energy and every auxiliary functional at one instant.
struct FunctionalComponents {
    Real E = 0;
    Real I1 = 0, I2 = 0, I3 = 0, I4 = 0, I5 = 0, I6 = 0, I7 = 0;
    Real J1 = 0, J2 = 0;
    Real gcirc = 0;  // integral of (g o theta_x) over x
};

/// Weighted energy of the coupled system, Parseval-exact in the modal
/// coefficients; throws hypothesis_error when delta - G(t) turns negative.
Real energy(const ModalState& state, const DelayField& delay, const HistoryTrace& hist,
            const Coefficients& c, const RelaxationKernel& kernel);

/// Energy evaluated directly from a recorded row.
Real energy_of_row(const RecordedRow& row, const Coefficients& c, const RelaxationKernel& kernel);

/// Endpoint values of the derivative fields (cosine-series sums at x = 0, 1).
/// Diagnostic only: the boundary terms these feed are absorbed by J1 and J2
/// and never appear as standalone columns.
struct BoundaryTraces {
    Real phi_x0 = 0, phi_x1 = 0;
    Real psi_x0 = 0, psi_x1 = 0;
    Real theta_t0 = 0, theta_t1 = 0;
};
BoundaryTraces boundary_traces(const RecordedRow& row);

FunctionalComponents lyapunov_components(const ModalState& state, const DelayField& delay,
                                         const HistoryTrace& hist, const Coefficients& c,
                                         const RelaxationKernel& kernel,
                                         int collocation_points = 129);

Real lyapunov_L(const FunctionalComponents& fc, const LyapunovConstants& lc,
                const Coefficients& c);

/// Row-indexed functional columns over a recorded trace.
struct FunctionalTrace {
    std::vector<Real> t, E, dEdt, balance_residual, bound_slack;
    std::vector<Real> I1, I2, I3, I4, I5, I6, I7, J1, J2, L, L_over_E;
    std::vector<Real> gcirc;      // not part of the CSV schema
    std::vector<Real> rhs_exact;  // exact balance right-hand side
};

FunctionalTrace instrument(const RunTrace& trace, const Coefficients& c,
                           const RelaxationKernel& kernel,
                           const LyapunovConstants* lc = nullptr,
                           int collocation_points = 129);

/// |centered dE/dt - exact balance RHS| at an interior recorded row.
Real energy_rate_residual(const RunTrace& trace, const Coefficients& c,
                          const RelaxationKernel& kernel, std::size_t mid);

/// Dissipation-bound RHS minus centered dE/dt at an interior recorded row;
/// nonnegative (up to discretization) along admissible trajectories.
Real dissipation_bound_slack(const RunTrace& trace, const Coefficients& c,
                             const RelaxationKernel& kernel, std::size_t mid);

struct EquivalenceEstimate {
    Real m_hat = 0, M_hat = 0;
};
EquivalenceEstimate equivalence_estimate(const FunctionalTrace& ft);

struct DecayFit {
    Real A = 0;
    Real omega = 0;
    Real r2 = 0;
    Real t0 = 0;
};

/// Least-squares fit of log E against the zeta integral from t0.
DecayFit fit_decay(const std::vector<Real>& times, const std::vector<Real>& energies,
                   const RelaxationKernel& kernel, Real t0);

/// Rows where E rises by more than slack_per_step * E(0) per elementary step.
int count_monotone_violations(const FunctionalTrace& ft, Real dt, Real slack_per_step = 1e-6);

}  // namespace tvt

#endif
