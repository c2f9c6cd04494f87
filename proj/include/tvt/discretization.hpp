#ifndef TVT_DISCRETIZATION_HPP
#define TVT_DISCRETIZATION_HPP

#include <functional>

#include "tvt/coefficients.hpp"
#include "tvt/kernels.hpp"

namespace tvt {

// Bases on (0,1):
//   Dirichlet fields (Phi, Psi):  s_k(x) = sqrt(2) sin(k pi x),  k = 1..n
//   Neumann field (theta):        c_0(x) = 1, c_k(x) = sqrt(2) cos(k pi x)
// d/dx s_k = (k pi) c_k and d/dx c_k = -(k pi) s_k, so every first-derivative
// coupling pairs wavenumber k with wavenumber k across the two bases and the
// semidiscrete system splits into independent per-mode blocks (see rhs()).

/// Modal coefficients of (Phi, Psi, theta) and their velocities.
struct ModalState {
    int n = 0;
    Vec phi, phi_t;      // length n, sine basis
    Vec psi, psi_t;      // length n, sine basis
    Vec theta, theta_t;  // length n+1, cosine basis (entry 0 = mean mode)
    Real t = 0.0;

    static ModalState zero(int n);
    void require_consistent() const;
    bool finite() const;
};

enum class DelayBackend { transport, ringbuffer };

/// Lagged velocity field z(x, rho, t) = theta_t(x, t - rho tau) in modal form.
///
/// ringbuffer: column j holds the theta_t coefficients at time t - j dt,
///             j = 0..lag with lag = tau/dt (exact integer).
/// transport:  column i holds the rho_i = i/m_rho slice, advected by upwind.
struct DelayField {
    DelayBackend backend = DelayBackend::ringbuffer;
    Real tau = 1.0;
    Real dt = 0.0;  // step the field is advanced with
    int lag = 0;    // ringbuffer depth
    int m_rho = 0;  // transport cells
    Real t = 0.0;   // field time

    Mat slices;  // (n+1) x cols
    int head = 0;  // ringbuffer: physical column of logical slot 0

    int cols() const { return int(slices.cols()); }
    /// Logical slot j (ringbuffer) or rho index i (transport).
    Eigen::Ref<const Eigen::VectorXd> slot(int j) const;

    /// z(., rho = 1, query_t) for query_t in [t, t + dt].
    Vec at_rho1(Real query_t) const;

    /// Integral of z^2 over x and rho (Parseval in x, trapezoid in rho).
    Real z_square_integral() const;
    /// Same with weight exp(-decay * rho).
    Real weighted_square_integral(Real decay) const;
};

/// Pushes the new boundary slice theta_t(t + dt) into the field.
/// Transport backend: first-order upwind step in rho (exact shift at unit
/// Courant number); throws step_size_error when dt > tau * drho.
void advect_z(DelayField& delay, const Vec& theta_t_new, Real dt);
/// Backend-dispatching advance (ringbuffer rotate or advect_z).
void advance_delay(DelayField& delay, const Vec& theta_t_new, Real dt);

/// z(., 1, t) modal coefficients; t must lie within [field time, field time + dt].
Vec delay_value(const DelayField& delay, Real t);

/// Time-stamped modal snapshots of theta and theta_t on the uniform step grid,
/// feeding convolution quadrature. For exponential kernels the trace also
/// carries O(1) recursive accumulators of (g*theta_k) and (g*theta_k^2).
struct HistoryTrace {
    Real dt = 0.0;
    Eigen::Index count = 0;
    Mat theta, theta_t;  // (n+1) x capacity, column i at time i dt

    bool exp_path = false;
    Real exp_g0 = 0.0, exp_rate = 0.0;
    Vec conv_theta, conv_theta_sq;  // accumulators at the last committed time
    Real conv_one = 0.0;            // grid-trapezoid cumulative mass of g

    Real t_last() const { return dt * Real(count - 1); }
    void init(int n, Real step, const Vec& theta0, const Vec& theta_t0);
    void enable_exponential(const RelaxationKernel& kernel);
    void append(const Vec& th, const Vec& th_t);
};

enum class KernelDerivative { none, first };

/// (g * theta_k)(tq) for every cosine mode, trapezoid over the trace grid with
/// a partial final interval up to tq; theta_at_tq supplies the endpoint value
/// (tq may exceed the last committed time by at most one step). Set `which`
/// to KernelDerivative::first for the g' kernel, `squared` for theta_k^2.
Vec modal_convolution(const HistoryTrace& hist, const RelaxationKernel& kernel, Real tq,
                      const Vec& theta_at_tq, KernelDerivative which = KernelDerivative::none,
                      bool squared = false);

/// Cumulative kernel mass under the same grid trapezoid as modal_convolution;
/// pairing this with the convolutions keeps the circle expansion exact.
Real grid_mass(const HistoryTrace& hist, const RelaxationKernel& kernel, Real tq,
               KernelDerivative which = KernelDerivative::none);

/// Initial data as callables on [0,1]; f0(x, s) supplies theta_t for s < 0 and
/// may be null, which holds theta1 over the whole lag window.
struct InitialData {
    std::function<Real(Real)> phi0, phi1, psi0, psi1, theta0, theta1;
    std::function<Real(Real, Real)> f0;
};

struct ProjectionResult {
    ModalState state;
    DelayField delay;
    HistoryTrace hist;
};

/// L2 projection of the initial data onto the bases (composite Simpson with
/// 4(n+1) intervals) plus delay-field and history initialization.
/// m_rho = 0 picks the unit-Courant transport grid tau/dt.
ProjectionResult project_initial(const InitialData& data, int n, DelayBackend backend, Real tau,
                                 Real dt, int m_rho = 0);

Vec project_sine(const std::function<Real(Real)>& f, int n);
Vec project_cosine(const std::function<Real(Real)>& f, int n);

/// Modal accelerations of the per-mode blocks. For wavenumber k (w = k pi):
///
///   rho1 phi_tt   = -K w^2 phi - K w psi
///   rho2 psi_tt   = -b w^2 psi - K (w phi + psi) + beta w theta_t
///   rho3 theta_tt = -delta w^2 theta + w^2 (g*theta) - gamma w psi_t
///                   - mu1 theta_t - mu2 z1
///   mean mode:      rho3 theta_tt_0 = -mu1 theta_t_0 - mu2 z1_0
///
/// z1 and conv_theta are the delay slice and (g*theta_k) at the state time.
struct Accelerations {
    Vec phi_tt, psi_tt, theta_tt;
};

Accelerations rhs(const ModalState& s, const Vec& z1, const Vec& conv_theta,
                  const Coefficients& c);
Accelerations rhs(const ModalState& s, const DelayField& delay, const HistoryTrace& hist,
                  const Coefficients& c, const RelaxationKernel& kernel);

/// Solution of -w_xx = Psi_x, w(0) = w(1) = 0: cosine particular part plus a
/// linear correction alpha x + beta0.
struct WSolution {
    Vec cosine_coeffs;  // length n+1, mean entry zero
    Real alpha = 0.0;
    Real beta0 = 0.0;

    Real value(Real x) const;
    Real derivative(Real x) const;
};

WSolution solve_w(const Vec& psi);

/// Quadrature collocation on [0,1] with precomputed basis tables.
struct Collocation {
    Vec x, w;    // nodes and weights
    Mat sine;    // nodes x n
    Mat cosine;  // nodes x (n+1)

    /// Composite Simpson with the given (even) number of intervals.
    Collocation(int n, int intervals);
    /// Midpoint rule with m cells; exact modal extraction for wavenumbers < 2m.
    static Collocation midpoint(int n, int cells);

    Vec eval_sine(const Vec& coeffs) const { return (sine * coeffs.matrix()).array(); }
    Vec eval_cosine(const Vec& coeffs) const { return (cosine * coeffs.matrix()).array(); }
    Real integrate(const Vec& values) const { return (w * values).sum(); }
    Vec project_sine(const Vec& values) const { return (sine.transpose() * (w * values).matrix()).array(); }
    Vec project_cosine(const Vec& values) const { return (cosine.transpose() * (w * values).matrix()).array(); }

private:
    Collocation() = default;
};

/// Cosine coefficients of d/dx applied to a sine series (mean entry zero).
Vec dirichlet_derivative_coeffs(const Vec& sine_coeffs);
/// Sine coefficients of d/dx applied to a cosine series.
Vec neumann_derivative_coeffs(const Vec& cosine_coeffs);

}  // namespace tvt

#endif
