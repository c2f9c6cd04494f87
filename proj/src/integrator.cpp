#include "tvt/integrator.hpp"

#include <cmath>

namespace tvt {

namespace {

constexpr Real kDivergenceCap = 1e14;

// conv_theta at a stage time t_last + rem: stage-independent base plus
// coeff * theta_stage from the partial trapezoid over [t_last, t_last + rem].
struct MemoryStage {
    Vec base;
    Real coeff = 0.0;

    Vec operator()(const Vec& theta_stage) const {
        if (coeff == 0.0) return base;
        return base + coeff * theta_stage;
    }
};

MemoryStage make_memory_stage(const HistoryTrace& hist, const RelaxationKernel& kernel,
                              Real rem) {
    MemoryStage ms;
    if (hist.exp_path) {
        if (rem == 0.0) {
            ms.base = hist.conv_theta;
            return ms;
        }
        const Real decay = std::exp(-hist.exp_rate * rem);
        const Vec last = hist.theta.col(hist.count - 1).array();
        ms.base = decay * hist.conv_theta + 0.5 * rem * hist.exp_g0 * decay * last;
        ms.coeff = 0.5 * rem * hist.exp_g0;
        return ms;
    }
    if (rem == 0.0) {
        ms.base = modal_convolution(hist, kernel, hist.t_last(),
                                    hist.theta.col(hist.count - 1));
        return ms;
    }
    // committed trapezoid with kernel arguments shifted by rem, plus the
    // stage-side half weight of the partial interval [t_last, t_last + rem]
    const Real tq = hist.t_last() + rem;
    const auto used = hist.count;
    const Real dt = hist.dt;
    if (used >= 2) {
        Eigen::VectorXd gv(used);
        for (Eigen::Index i = 0; i < used; ++i) gv[i] = dt * kernel.g(tq - dt * Real(i));
        gv[0] *= 0.5;
        gv[used - 1] *= 0.5;
        ms.base = (hist.theta.leftCols(used) * gv).array();
    } else {
        ms.base = Vec::Zero(hist.theta.rows());
    }
    const Vec last = hist.theta.col(hist.count - 1).array();
    ms.base += 0.5 * rem * kernel.g(rem) * last;
    ms.coeff = 0.5 * rem * kernel.g(0.0);
    return ms;
}

struct Deriv {
    Vec phi, phi_t, psi, psi_t, theta, theta_t;
};

Deriv eval_deriv(const ModalState& s, const Vec& z1, const MemoryStage& ms,
                 const Coefficients& c) {
    Accelerations a = rhs(s, z1, ms(s.theta), c);
    return {s.phi_t, std::move(a.phi_tt), s.psi_t, std::move(a.psi_tt),
            s.theta_t, std::move(a.theta_tt)};
}

ModalState advanced(const ModalState& s, const Deriv& d, Real h, Real t) {
    ModalState r;
    r.n = s.n;
    r.phi = s.phi + h * d.phi;
    r.phi_t = s.phi_t + h * d.phi_t;
    r.psi = s.psi + h * d.psi;
    r.psi_t = s.psi_t + h * d.psi_t;
    r.theta = s.theta + h * d.theta;
    r.theta_t = s.theta_t + h * d.theta_t;
    r.t = t;
    return r;
}

void check_finite(const ModalState& s, Real t_ok) {
    if (!s.finite()) throw divergence_error(t_ok);
    const Real peak = std::max({s.phi.abs().maxCoeff(), s.psi.abs().maxCoeff(),
                                s.theta.abs().maxCoeff(), s.phi_t.abs().maxCoeff(),
                                s.psi_t.abs().maxCoeff(), s.theta_t.abs().maxCoeff()});
    if (peak > kDivergenceCap) throw divergence_error(t_ok);
}

}  // namespace

Real stability_dt_bound(const SimConfig& sim, const Coefficients& c) {
    const Real pi = 3.14159265358979323846;
    const Real speed = std::sqrt(std::max({c.K / c.rho1, c.b / c.rho2, c.delta / c.rho3}));
    const Real omega_max = pi * Real(sim.n) * speed;
    return 2.5 / omega_max;
}

void validate_sim(const SimConfig& sim, const Coefficients& c) {
    if (sim.n < 1) throw config_error("sim.n must be >= 1");
    if (!(sim.dt > 0.0)) throw config_error("sim.dt must be > 0");
    if (sim.t_end < 0.0) throw config_error("sim.t_end must be >= 0");
    if (sim.record_stride < 1) throw config_error("sim.record_stride must be >= 1");

    const auto lag = std::llround(c.tau / sim.dt);
    if (lag < 1 || std::abs(c.tau - Real(lag) * sim.dt) > 1e-9 * c.tau) {
        const auto near = std::max<long long>(1, lag);
        throw step_size_error("tau/dt must be an integer; nearest admissible dt = " +
                              std::to_string(c.tau / Real(near)));
    }
    if (sim.backend == DelayBackend::transport && sim.m_rho > 0) {
        const Real drho = 1.0 / Real(sim.m_rho);
        if (sim.dt > c.tau * drho * (1.0 + 1e-12))
            throw step_size_error("transport CFL: require dt <= tau/m_rho");
    }
    const Real bound = stability_dt_bound(sim, c);
    if (sim.dt > bound)
        throw step_size_error("dt exceeds the stability probe bound " + std::to_string(bound));
}

void step(ModalState& state, DelayField& delay, HistoryTrace& hist, const Coefficients& c,
          const RelaxationKernel& kernel, Real dt) {
    const Real t = state.t;

    const MemoryStage mem0 = make_memory_stage(hist, kernel, 0.0);
    const MemoryStage mem_half = make_memory_stage(hist, kernel, 0.5 * dt);
    const MemoryStage mem_full = make_memory_stage(hist, kernel, dt);
    const Vec z1_0 = delay.at_rho1(t);
    const Vec z1_half = delay.at_rho1(t + 0.5 * dt);
    const Vec z1_full = delay.at_rho1(t + dt);

    const Deriv k1 = eval_deriv(state, z1_0, mem0, c);
    ModalState s2 = advanced(state, k1, 0.5 * dt, t + 0.5 * dt);
    check_finite(s2, t);
    const Deriv k2 = eval_deriv(s2, z1_half, mem_half, c);
    ModalState s3 = advanced(state, k2, 0.5 * dt, t + 0.5 * dt);
    check_finite(s3, t);
    const Deriv k3 = eval_deriv(s3, z1_half, mem_half, c);
    ModalState s4 = advanced(state, k3, dt, t + dt);
    check_finite(s4, t);
    const Deriv k4 = eval_deriv(s4, z1_full, mem_full, c);

    const Real h6 = dt / 6.0;
    state.phi += h6 * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi);
    state.phi_t += h6 * (k1.phi_t + 2.0 * k2.phi_t + 2.0 * k3.phi_t + k4.phi_t);
    state.psi += h6 * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi);
    state.psi_t += h6 * (k1.psi_t + 2.0 * k2.psi_t + 2.0 * k3.psi_t + k4.psi_t);
    state.theta += h6 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta);
    state.theta_t += h6 * (k1.theta_t + 2.0 * k2.theta_t + 2.0 * k3.theta_t + k4.theta_t);
    state.t = t + dt;
    check_finite(state, t);

    hist.append(state.theta, state.theta_t);
    advance_delay(delay, state.theta_t, dt);
}

RecordedRow snapshot_row(const ModalState& state, const DelayField& delay,
                         const HistoryTrace& hist, const Coefficients& c,
                         const RelaxationKernel& kernel) {
    RecordedRow row;
    row.t = state.t;
    row.phi = state.phi;
    row.phi_t = state.phi_t;
    row.psi = state.psi;
    row.psi_t = state.psi_t;
    row.theta = state.theta;
    row.theta_t = state.theta_t;
    row.z1 = delay.at_rho1(state.t);
    if (hist.exp_path) {
        row.conv_theta = hist.conv_theta;
        row.conv_theta_sq = hist.conv_theta_sq;
        row.convp_theta = -hist.exp_rate * hist.conv_theta;
        row.convp_theta_sq = -hist.exp_rate * hist.conv_theta_sq;
        row.G_q = hist.conv_one;
        row.Gp_q = -hist.exp_rate * hist.conv_one;
    } else {
        row.conv_theta = modal_convolution(hist, kernel, state.t, state.theta);
        row.conv_theta_sq =
            modal_convolution(hist, kernel, state.t, state.theta, KernelDerivative::none, true);
        row.convp_theta =
            modal_convolution(hist, kernel, state.t, state.theta, KernelDerivative::first);
        row.convp_theta_sq =
            modal_convolution(hist, kernel, state.t, state.theta, KernelDerivative::first, true);
        row.G_q = grid_mass(hist, kernel, state.t);
        row.Gp_q = grid_mass(hist, kernel, state.t, KernelDerivative::first);
    }
    row.z_sq = delay.z_square_integral();
    row.z_sq_weighted = delay.weighted_square_integral(2.0 * c.tau);
    return row;
}

RunTrace run(const SimConfig& sim, const Coefficients& c, const RelaxationKernel& kernel,
             const InitialData& data, const RecordCallback& on_record) {
    validate_sim(sim, c);

    ProjectionResult pr = project_initial(data, sim.n, sim.backend, c.tau, sim.dt, sim.m_rho);
    if (kernel.family() == KernelFamily::exponential) pr.hist.enable_exponential(kernel);

    RunTrace trace;
    trace.sim = sim;
    const auto steps = std::llround(sim.t_end / sim.dt);
    trace.rows.reserve(size_t(steps / sim.record_stride) + 2);

    auto record = [&]() {
        trace.rows.push_back(snapshot_row(pr.state, pr.delay, pr.hist, c, kernel));
        if (on_record) on_record(trace.rows.back());
    };
    record();

    for (long long i = 1; i <= steps; ++i) {
        try {
            step(pr.state, pr.delay, pr.hist, c, kernel, sim.dt);
        } catch (const divergence_error& e) {
            trace.diverged = true;
            trace.divergence_time = e.last_finite_time;
            return trace;
        }
        if (i % sim.record_stride == 0) record();
    }
    return trace;
}

}  // namespace tvt
