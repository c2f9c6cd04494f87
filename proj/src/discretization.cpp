#include "tvt/discretization.hpp"

#include <cmath>

namespace tvt {

namespace {

constexpr Real kPi = 3.14159265358979323846;
constexpr Real kTimeTol = 1e-9;

Vec wavenumbers(int n) {
    Vec w(n);
    for (int k = 1; k <= n; ++k) w[k - 1] = kPi * Real(k);
    return w;
}

}  // namespace

ModalState ModalState::zero(int n) {
    ModalState s;
    s.n = n;
    s.phi = Vec::Zero(n);
    s.phi_t = Vec::Zero(n);
    s.psi = Vec::Zero(n);
    s.psi_t = Vec::Zero(n);
    s.theta = Vec::Zero(n + 1);
    s.theta_t = Vec::Zero(n + 1);
    return s;
}

void ModalState::require_consistent() const {
    if (n < 1 || phi.size() != n || phi_t.size() != n || psi.size() != n || psi_t.size() != n ||
        theta.size() != n + 1 || theta_t.size() != n + 1)
        throw error("ModalState: array lengths inconsistent with n");
}

bool ModalState::finite() const {
    return phi.allFinite() && phi_t.allFinite() && psi.allFinite() && psi_t.allFinite() &&
           theta.allFinite() && theta_t.allFinite();
}

Eigen::Ref<const Eigen::VectorXd> DelayField::slot(int j) const {
    const int c = cols();
    if (j < 0 || j >= c) throw out_of_range_error("DelayField: slot index out of range");
    const int phys = backend == DelayBackend::ringbuffer ? (head + j) % c : j;
    return slices.col(phys);
}

Vec DelayField::at_rho1(Real query_t) const {
    const Real offset = query_t - t;
    if (offset < -kTimeTol * std::max(1.0, std::abs(t)) || offset > dt + kTimeTol)
        throw out_of_range_error("delay lookup outside [t, t + dt]");
    const Real frac = std::clamp(offset / dt, 0.0, 1.0);

    if (backend == DelayBackend::ringbuffer) {
        if (frac == 0.0) return slot(lag).array();
        return ((1.0 - frac) * slot(lag) + frac * slot(lag - 1)).array();
    }
    // transport: z(rho* = 1 - offset/tau) between grid columns
    const Real q = frac * dt * Real(m_rho) / tau;  // cells below rho = 1
    int lo = int(std::floor(q));
    Real fq = q - Real(lo);
    if (lo >= m_rho) {
        lo = m_rho - 1;
        fq = 1.0;
    }
    if (fq == 0.0) return slot(m_rho - lo).array();
    return ((1.0 - fq) * slot(m_rho - lo) + fq * slot(m_rho - lo - 1)).array();
}

Real DelayField::z_square_integral() const { return weighted_square_integral(0.0); }

Real DelayField::weighted_square_integral(Real decay) const {
    const int m = cols() - 1;
    const Real drho = 1.0 / Real(m);
    Real acc = 0.0;
    for (int j = 0; j <= m; ++j) {
        const Real rho = drho * Real(j);
        const Real tw = (j == 0 || j == m) ? 0.5 * drho : drho;
        const Real weight = decay == 0.0 ? 1.0 : std::exp(-decay * rho);
        acc += tw * weight * slot(j).squaredNorm();
    }
    return acc;
}

void advect_z(DelayField& d, const Vec& theta_t_new, Real dt) {
    if (d.backend != DelayBackend::transport)
        throw error("advect_z applies to the transport backend");
    const Real drho = 1.0 / Real(d.m_rho);
    const Real courant = dt / (d.tau * drho);
    if (courant > 1.0 + 1e-12)
        throw step_size_error("transport CFL violated: require dt <= tau * drho");
    if (std::abs(courant - 1.0) <= 1e-12) {
        for (int i = d.m_rho; i >= 1; --i) d.slices.col(i) = d.slices.col(i - 1);
    } else {
        for (int i = d.m_rho; i >= 1; --i)
            d.slices.col(i) -= courant * (d.slices.col(i) - d.slices.col(i - 1));
    }
    d.slices.col(0) = theta_t_new.matrix();
    d.t += dt;
    d.dt = dt;
}

void advance_delay(DelayField& d, const Vec& theta_t_new, Real dt) {
    if (d.backend == DelayBackend::transport) {
        advect_z(d, theta_t_new, dt);
        return;
    }
    if (std::abs(dt - d.dt) > kTimeTol)
        throw step_size_error("ringbuffer delay requires the construction step");
    d.head = (d.head - 1 + d.cols()) % d.cols();
    d.slices.col(d.head) = theta_t_new.matrix();
    d.t += dt;
}

Vec delay_value(const DelayField& d, Real t) { return d.at_rho1(t); }

void HistoryTrace::init(int n, Real step, const Vec& theta0, const Vec& theta_t0) {
    dt = step;
    const Eigen::Index cap = 256;
    theta.resize(n + 1, cap);
    theta_t.resize(n + 1, cap);
    theta.col(0) = theta0.matrix();
    theta_t.col(0) = theta_t0.matrix();
    count = 1;
    conv_theta = Vec::Zero(n + 1);
    conv_theta_sq = Vec::Zero(n + 1);
    conv_one = 0.0;
}

void HistoryTrace::enable_exponential(const RelaxationKernel& kernel) {
    if (kernel.family() != KernelFamily::exponential)
        throw error("recursive accumulators require an exponential kernel");
    exp_path = true;
    exp_g0 = kernel.initial_value();
    exp_rate = kernel.rate();
    conv_theta.setZero();
    conv_theta_sq.setZero();
    conv_one = 0.0;
}

void HistoryTrace::append(const Vec& th, const Vec& th_t) {
    if (count == theta.cols()) {
        theta.conservativeResize(Eigen::NoChange, 2 * theta.cols());
        theta_t.conservativeResize(Eigen::NoChange, 2 * theta_t.cols());
    }
    if (exp_path) {
        const Real decay = std::exp(-exp_rate * dt);
        const Vec prev = theta.col(count - 1).array();
        conv_theta = decay * conv_theta + 0.5 * dt * exp_g0 * (decay * prev + th);
        conv_theta_sq =
            decay * conv_theta_sq + 0.5 * dt * exp_g0 * (decay * prev.square() + th.square());
        conv_one = decay * conv_one + 0.5 * dt * exp_g0 * (decay + 1.0);
    }
    theta.col(count) = th.matrix();
    theta_t.col(count) = th_t.matrix();
    ++count;
}

Vec modal_convolution(const HistoryTrace& hist, const RelaxationKernel& kernel, Real tq,
                      const Vec& theta_at_tq, KernelDerivative which, bool squared) {
    const Real dt = hist.dt;
    const Real t_last = hist.t_last();
    if (tq < -kTimeTol) throw out_of_range_error("convolution time must be >= 0");
    if (tq > t_last + dt + kTimeTol)
        throw out_of_range_error("convolution time more than one step past the history");

    const auto rows = hist.theta.rows();
    auto grid = Eigen::Index(std::llround(tq / dt));
    const bool on_grid =
        grid < hist.count && std::abs(tq - dt * Real(grid)) <= kTimeTol * std::max(1.0, tq);

    const Eigen::Index used = on_grid ? grid + 1 : hist.count;
    Vec out = Vec::Zero(rows);
    auto kval = [&](Real u) {
        return which == KernelDerivative::none ? kernel.g(u) : kernel.gprime(u);
    };
    if (used >= 2) {
        Eigen::VectorXd gv(used);
        for (Eigen::Index i = 0; i < used; ++i) gv[i] = dt * kval(tq - dt * Real(i));
        gv[0] *= 0.5;
        gv[used - 1] *= 0.5;
        if (!squared)
            out = (hist.theta.leftCols(used) * gv).array();
        else
            out = (hist.theta.leftCols(used).array().square().matrix() * gv).array();
    }
    if (!on_grid) {
        const Real rem = tq - dt * Real(hist.count - 1);
        if (rem > kTimeTol) {
            const Vec last = hist.theta.col(hist.count - 1).array();
            if (!squared)
                out += 0.5 * rem * (kval(rem) * last + kval(0.0) * theta_at_tq);
            else
                out += 0.5 * rem * (kval(rem) * last.square() + kval(0.0) * theta_at_tq.square());
        }
    }
    return out;
}

Real grid_mass(const HistoryTrace& hist, const RelaxationKernel& kernel, Real tq,
               KernelDerivative which) {
    const Real dt = hist.dt;
    if (tq < -kTimeTol) throw out_of_range_error("grid_mass: time must be >= 0");
    auto grid = Eigen::Index(std::llround(tq / dt));
    const bool on_grid =
        grid < hist.count && std::abs(tq - dt * Real(grid)) <= kTimeTol * std::max(1.0, tq);
    const Eigen::Index used = on_grid ? grid + 1 : hist.count;
    auto kval = [&](Real u) {
        return which == KernelDerivative::none ? kernel.g(u) : kernel.gprime(u);
    };
    Real acc = 0.0;
    if (used >= 2) {
        for (Eigen::Index i = 0; i < used; ++i) {
            const Real w = (i == 0 || i == used - 1) ? 0.5 * dt : dt;
            acc += w * kval(tq - dt * Real(i));
        }
    }
    if (!on_grid) {
        const Real rem = tq - dt * Real(hist.count - 1);
        if (rem > kTimeTol) acc += 0.5 * rem * (kval(rem) + kval(0.0));
    }
    return acc;
}

Vec project_sine(const std::function<Real(Real)>& f, int n) {
    if (!f) return Vec::Zero(n);
    Collocation table(n, 4 * (n + 1));
    Vec values(table.x.size());
    for (Eigen::Index i = 0; i < table.x.size(); ++i) values[i] = f(table.x[i]);
    return table.project_sine(values);
}

Vec project_cosine(const std::function<Real(Real)>& f, int n) {
    if (!f) return Vec::Zero(n + 1);
    Collocation table(n, 4 * (n + 1));
    Vec values(table.x.size());
    for (Eigen::Index i = 0; i < table.x.size(); ++i) values[i] = f(table.x[i]);
    return table.project_cosine(values);
}

ProjectionResult project_initial(const InitialData& data, int n, DelayBackend backend, Real tau,
                                 Real dt, int m_rho) {
    if (n < 1) throw error("project_initial: n must be >= 1");
    if (!(dt > 0.0) || !(tau > 0.0)) throw error("project_initial: dt and tau must be > 0");
    const auto lag = int(std::llround(tau / dt));
    if (lag < 1 || std::abs(tau - Real(lag) * dt) > kTimeTol * tau)
        throw step_size_error("tau/dt must be a positive integer");

    ProjectionResult r;
    r.state.n = n;
    r.state.t = 0.0;
    r.state.phi = project_sine(data.phi0, n);
    r.state.phi_t = project_sine(data.phi1, n);
    r.state.psi = project_sine(data.psi0, n);
    r.state.psi_t = project_sine(data.psi1, n);
    r.state.theta = project_cosine(data.theta0, n);
    r.state.theta_t = project_cosine(data.theta1, n);

    DelayField& d = r.delay;
    d.backend = backend;
    d.tau = tau;
    d.dt = dt;
    d.lag = lag;
    d.m_rho = backend == DelayBackend::transport ? (m_rho > 0 ? m_rho : lag) : 0;
    d.t = 0.0;
    d.head = 0;
    const int cols = backend == DelayBackend::ringbuffer ? lag + 1 : d.m_rho + 1;
    d.slices.resize(n + 1, cols);
    // slot 0 carries theta_t(0) itself; earlier slots come from f0 (held
    // theta1 when no f0 is given)
    d.slices.col(0) = r.state.theta_t.matrix();
    for (int j = 1; j < cols; ++j) {
        const Real s = backend == DelayBackend::ringbuffer ? -Real(j) * dt
                                                           : -Real(j) / Real(cols - 1) * tau;
        Vec coeffs = data.f0 ? project_cosine([&](Real x) { return data.f0(x, s); }, n)
                             : r.state.theta_t;
        d.slices.col(j) = coeffs.matrix();
    }

    r.hist.init(n, dt, r.state.theta, r.state.theta_t);
    return r;
}

Accelerations rhs(const ModalState& s, const Vec& z1, const Vec& conv_theta,
                  const Coefficients& c) {
    s.require_consistent();
    if (z1.size() != s.n + 1 || conv_theta.size() != s.n + 1)
        throw error("rhs: z1/conv_theta length must be n + 1");
    const int n = s.n;
    const Vec w = wavenumbers(n);

    Accelerations a;
    a.phi_tt = -(c.K / c.rho1) * (w.square() * s.phi + w * s.psi);
    a.psi_tt = (-c.b * w.square() * s.psi - c.K * (w * s.phi + s.psi) +
                c.beta * w * s.theta_t.tail(n)) /
               c.rho2;
    a.theta_tt = Vec(n + 1);
    a.theta_tt[0] = (-c.mu1 * s.theta_t[0] - c.mu2 * z1[0]) / c.rho3;
    a.theta_tt.tail(n) = (-c.delta * w.square() * s.theta.tail(n) +
                          w.square() * conv_theta.tail(n) - c.gamma * w * s.psi_t -
                          c.mu1 * s.theta_t.tail(n) - c.mu2 * z1.tail(n)) /
                         c.rho3;
    return a;
}

Accelerations rhs(const ModalState& s, const DelayField& delay, const HistoryTrace& hist,
                  const Coefficients& c, const RelaxationKernel& kernel) {
    const Vec z1 = delay.at_rho1(s.t);
    const Vec conv = modal_convolution(hist, kernel, s.t, s.theta);
    return rhs(s, z1, conv, c);
}

Real WSolution::value(Real x) const {
    Real acc = alpha * x + beta0;
    const Real s2 = std::sqrt(2.0);
    for (Eigen::Index k = 1; k < cosine_coeffs.size(); ++k)
        acc += cosine_coeffs[k] * s2 * std::cos(kPi * Real(k) * x);
    return acc;
}

Real WSolution::derivative(Real x) const {
    Real acc = alpha;
    const Real s2 = std::sqrt(2.0);
    for (Eigen::Index k = 1; k < cosine_coeffs.size(); ++k)
        acc -= cosine_coeffs[k] * kPi * Real(k) * s2 * std::sin(kPi * Real(k) * x);
    return acc;
}

WSolution solve_w(const Vec& psi) {
    const auto n = psi.size();
    WSolution w;
    w.cosine_coeffs = Vec::Zero(n + 1);
    const Real s2 = std::sqrt(2.0);
    Real p0 = 0.0, p1 = 0.0;
    for (Eigen::Index k = 1; k <= n; ++k) {
        const Real a = psi[k - 1] / (kPi * Real(k));
        w.cosine_coeffs[k] = a;
        p0 += a * s2;
        p1 += a * s2 * (k % 2 == 0 ? 1.0 : -1.0);
    }
    w.beta0 = -p0;
    w.alpha = p0 - p1;
    return w;
}

Collocation::Collocation(int n, int intervals) {
    if (intervals < 2 || intervals % 2 != 0)
        throw error("Collocation: Simpson needs an even interval count");
    const int m = intervals;
    const Real h = 1.0 / Real(m);
    x = Vec::LinSpaced(m + 1, 0.0, 1.0);
    w = Vec(m + 1);
    for (int i = 0; i <= m; ++i)
        w[i] = (i == 0 || i == m) ? h / 3.0 : (i % 2 == 1 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);

    const int rows = m + 1;
    sine.resize(rows, n);
    cosine.resize(rows, n + 1);
    const Real s2 = std::sqrt(2.0);
    for (int i = 0; i < rows; ++i) {
        cosine(i, 0) = 1.0;
        for (int k = 1; k <= n; ++k) {
            sine(i, k - 1) = s2 * std::sin(kPi * Real(k) * x[i]);
            cosine(i, k) = s2 * std::cos(kPi * Real(k) * x[i]);
        }
    }
}

Collocation Collocation::midpoint(int n, int cells) {
    if (cells < 1) throw error("Collocation: need at least one midpoint cell");
    Collocation c;
    const Real h = 1.0 / Real(cells);
    c.x = Vec(cells);
    for (int i = 0; i < cells; ++i) c.x[i] = h * (Real(i) + 0.5);
    c.w = Vec::Constant(cells, h);
    c.sine.resize(cells, n);
    c.cosine.resize(cells, n + 1);
    const Real s2 = std::sqrt(2.0);
    for (int i = 0; i < cells; ++i) {
        c.cosine(i, 0) = 1.0;
        for (int k = 1; k <= n; ++k) {
            c.sine(i, k - 1) = s2 * std::sin(kPi * Real(k) * c.x[i]);
            c.cosine(i, k) = s2 * std::cos(kPi * Real(k) * c.x[i]);
        }
    }
    return c;
}

Vec dirichlet_derivative_coeffs(const Vec& sine_coeffs) {
    const auto n = sine_coeffs.size();
    Vec out = Vec::Zero(n + 1);
    for (Eigen::Index k = 1; k <= n; ++k) out[k] = kPi * Real(k) * sine_coeffs[k - 1];
    return out;
}

Vec neumann_derivative_coeffs(const Vec& cosine_coeffs) {
    const auto n = cosine_coeffs.size() - 1;
    Vec out = Vec::Zero(n);
    for (Eigen::Index k = 1; k <= n; ++k) out[k - 1] = -kPi * Real(k) * cosine_coeffs[k];
    return out;
}

}  // namespace tvt
