#ifndef TVT_INTEGRATOR_HPP
#define TVT_INTEGRATOR_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "tvt/discretization.hpp"

namespace tvt {

struct SimConfig {
    int n = 16;
    Real dt = 1e-3;
    Real t_end = 10.0;
    DelayBackend backend = DelayBackend::ringbuffer;
    int m_rho = 0;  // transport cells, 0 = unit-Courant grid tau/dt
    int record_stride = 10;
    std::uint64_t seed = 0;
    Real progress_every = 0.0;  // stderr cadence in sim time, 0 = silent
};

/// Largest dt the RK4 step tolerates for the stiffest retained wavenumber.
Real stability_dt_bound(const SimConfig& sim, const Coefficients& c);

/// Checks tau/dt integrality, CFL, and the stability probe; throws
/// step_size_error with a suggestion when violated.
void validate_sim(const SimConfig& sim, const Coefficients& c);

/// One recorded instant: modal snapshot plus every kernel- and delay-weighted
/// quantity the functional columns are built from.
struct RecordedRow {
    Real t = 0.0;
    Vec phi, phi_t, psi, psi_t, theta, theta_t;
    Vec z1;             // z(., 1, t)
    Vec conv_theta;     // (g  * theta_k)(t)
    Vec conv_theta_sq;  // (g  * theta_k^2)(t)
    Vec convp_theta;    // (g' * theta_k)(t)
    Vec convp_theta_sq; // (g' * theta_k^2)(t)
    Real G_q = 0.0;           // grid-trapezoid cumulative mass of g
    Real Gp_q = 0.0;          // same for g'
    Real z_sq = 0.0;          // integral of z^2 over x and rho
    Real z_sq_weighted = 0.0; // same with weight exp(-2 tau rho)
};

struct RunTrace {
    SimConfig sim;
    std::vector<RecordedRow> rows;
    bool diverged = false;
    Real divergence_time = 0.0;
};

/// Classical RK4 step of the first-order modal system. Memory and delay terms
/// at stage times come from the committed history (trapezoid tail up to the
/// stage time) and the interpolated delay field; both are appended only at
/// full steps, so the observed order is limited to two.
void step(ModalState& state, DelayField& delay, HistoryTrace& hist, const Coefficients& c,
          const RelaxationKernel& kernel, Real dt);

/// Extracts a row from live objects (shared by run() and the tests).
RecordedRow snapshot_row(const ModalState& state, const DelayField& delay,
                         const HistoryTrace& hist, const Coefficients& c,
                         const RelaxationKernel& kernel);

using RecordCallback = std::function<void(const RecordedRow&)>;

/// Runs to t_end, recording every record_stride-th step (plus the initial
/// instant). Deterministic for fixed inputs. On divergence the partial trace
/// is returned with the error marker set.
RunTrace run(const SimConfig& sim, const Coefficients& c, const RelaxationKernel& kernel,
             const InitialData& data, const RecordCallback& on_record = nullptr);

}  // namespace tvt

#endif
