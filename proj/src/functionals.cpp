#include "tvt/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tvt {

namespace {

constexpr Real kPi = 3.14159265358979323846;
const Real kNan = std::numeric_limits<Real>::quiet_NaN();

Vec wavenumbers(Eigen::Index n) {
    Vec w(n);
    for (Eigen::Index k = 1; k <= n; ++k) w[k - 1] = kPi * Real(k);
    return w;
}

struct RowNorms {
    Real phi_t2 = 0, psi_t2 = 0, theta_t2 = 0, shear2 = 0, psi_x2 = 0, theta_x2 = 0;
    Real z1sq = 0, dot_tz = 0;
    Real G = 0, Gq = 0, g_t = 0;
    Real gcirc = 0, gpcirc = 0;
    Real E = 0;
};

RowNorms row_norms(const RecordedRow& r, const Coefficients& c, const RelaxationKernel& k) {
    const auto n = r.phi.size();
    const Vec w = wavenumbers(n);
    RowNorms m;
    m.phi_t2 = r.phi_t.square().sum();
    m.psi_t2 = r.psi_t.square().sum();
    m.theta_t2 = r.theta_t.square().sum();
    m.shear2 = (w * r.phi + r.psi).square().sum();
    m.psi_x2 = (w * r.psi).square().sum();
    const Vec th = r.theta.tail(n);
    m.theta_x2 = (w * th).square().sum();
    m.z1sq = r.z1.square().sum();
    m.dot_tz = (r.theta_t * r.z1).sum();
    m.G = k.cumulative(r.t);
    m.Gq = r.G_q;
    m.g_t = k.g(r.t);

    m.gcirc = (w.square() *
               (m.Gq * th.square() - 2.0 * th * r.conv_theta.tail(n) + r.conv_theta_sq.tail(n)))
                  .sum();
    m.gpcirc = (w.square() * (r.Gp_q * th.square() - 2.0 * th * r.convp_theta.tail(n) +
                              r.convp_theta_sq.tail(n)))
                   .sum();

    const Real stiffness = c.delta - m.G;
    if (stiffness < 0.0)
        throw hypothesis_error("delta - G(t) turned negative: kernel mass exceeds delta");
    m.E = 0.5 * c.gamma * (c.rho1 * m.phi_t2 + c.rho2 * m.psi_t2 + c.K * m.shear2 +
                           c.b * m.psi_x2) +
          0.5 * c.beta * (c.rho3 * m.theta_t2 + stiffness * m.theta_x2 + m.gcirc +
                          c.xi * r.z_sq);
    return m;
}

Real balance_rhs(const RowNorms& m, const Coefficients& c) {
    return -0.5 * c.beta * m.g_t * m.theta_x2 + 0.5 * c.beta * m.gpcirc -
           c.beta * c.mu1 * m.theta_t2 - c.beta * c.mu2 * m.dot_tz +
           (c.beta * c.xi / (2.0 * c.tau)) * (m.theta_t2 - m.z1sq);
}

Real bound_rhs(const RowNorms& m, const Coefficients& c) {
    const Real base = -0.5 * c.beta * m.g_t * m.theta_x2 + 0.5 * c.beta * m.gpcirc;
    if (c.equal_weights()) return base;
    return base - c.beta * (c.mu1 - c.xi / (2.0 * c.tau) - c.mu2 / 2.0) * m.theta_t2 -
           c.beta * (c.xi / (2.0 * c.tau) - c.mu2 / 2.0) * m.z1sq;
}

FunctionalComponents components_from_row(const RecordedRow& r, const RowNorms& m,
                                         const Coefficients& c, const RelaxationKernel& k,
                                         const Collocation& q) {
    const auto n = r.phi.size();
    const Vec w = wavenumbers(n);
    const Vec th = r.theta.tail(n);

    FunctionalComponents fc;
    fc.E = m.E;
    fc.gcirc = m.gcirc;

    // node evaluations (cross-basis and weighted products go through Simpson)
    const Vec phi_t_n = q.eval_sine(r.phi_t);
    const Vec psi_t_n = q.eval_sine(r.psi_t);
    const Vec phi_x_n = q.eval_cosine(dirichlet_derivative_coeffs(r.phi));
    const Vec psi_x_n = q.eval_cosine(dirichlet_derivative_coeffs(r.psi));
    const Vec theta_t_n = q.eval_cosine(r.theta_t);
    const Vec theta_x_n = q.eval_sine(neumann_derivative_coeffs(r.theta));
    const Vec conv_x_n = q.eval_sine(neumann_derivative_coeffs(r.conv_theta));
    const Vec qweight = 2.0 - 4.0 * q.x;

    const WSolution wsol = solve_w(r.psi);
    const Vec w_n = q.eval_cosine(wsol.cosine_coeffs) + wsol.alpha * q.x + wsol.beta0;

    Vec theta_int_coeffs(n);
    for (Eigen::Index j = 1; j <= n; ++j) theta_int_coeffs[j - 1] = r.theta_t[j] / w[j - 1];
    const Vec theta_int_n = q.eval_sine(theta_int_coeffs) + r.theta_t[0] * q.x;

    fc.I1 = c.rho2 * (r.psi_t * r.psi).sum() + c.rho1 * q.integrate(phi_t_n * w_n) +
            c.beta * ((-w * th) * r.psi).sum();
    fc.I2 = c.rho3 * (r.theta_t * r.theta).sum() + c.gamma * (w * r.psi * th).sum() +
            0.5 * c.mu1 * r.theta.square().sum();
    fc.I3 = -c.rho1 * (r.phi_t * r.phi).sum() - c.rho2 * (r.psi_t * r.psi).sum();
    fc.I4 = c.rho2 * (q.integrate(psi_t_n * phi_x_n) + (r.psi_t * r.psi).sum()) +
            (c.rho2 + c.gamma) * q.integrate(psi_x_n * phi_t_n) +
            c.rho3 * q.integrate(theta_t_n * phi_t_n) +
            (c.K * c.rho3 / c.rho1 + c.beta) * q.integrate(theta_x_n * phi_x_n) -
            q.integrate(conv_x_n * phi_x_n);
    fc.I5 = c.rho2 * c.rho3 * q.integrate(theta_int_n * psi_t_n);
    fc.I6 = r.z_sq_weighted;
    fc.I7 = -c.rho3 * (r.theta_t * (m.Gq * r.theta - r.conv_theta)).sum();
    fc.J1 = c.rho1 * q.integrate(qweight * phi_t_n * phi_x_n);
    fc.J2 = c.gamma * c.rho2 * c.b * q.integrate(qweight * psi_t_n * psi_x_n) +
            (c.beta * c.b / c.delta) *
                q.integrate((c.rho3 * theta_t_n + c.gamma * psi_x_n) * qweight *
                            (c.delta * theta_x_n - conv_x_n));
    return fc;
}

Real lyapunov_from(const FunctionalComponents& fc, const LyapunovConstants& lc,
                   const Coefficients& c) {
    const Real wJ1 =
        lc.upsilon * lc.eps4 * (1.0 / c.K + c.rho3 * c.K / (c.rho1 * c.rho1 * c.b));
    const Real wI6 = lc.weight_case == LyapunovConstants::Case::strict ? 1.0 : lc.N6;
    Real L = lc.N * fc.E + lc.N1 * fc.I1 + lc.N2 * fc.I2 + 0.25 * lc.upsilon * fc.I3 +
             lc.upsilon * fc.I4 + lc.N5 * fc.I5 + wI6 * fc.I6 + wJ1 * fc.J1 +
             (0.5 / lc.eps4) * fc.J2;
    if (lc.weight_case == LyapunovConstants::Case::equal) L += lc.N7 * fc.I7;
    return L;
}

}  // namespace

std::pair<std::string, Real> BraceValues::worst() const {
    std::pair<std::string, Real> out{"phi_t", phi_t};
    auto probe = [&](const char* name, Real v) {
        if (v < out.second) out = {name, v};
    };
    probe("psi_t", psi_t);
    probe("shear", shear);
    probe("psi_x", psi_x);
    probe("theta_t", theta_t);
    probe("theta_x", theta_x);
    probe("z1", z1);
    probe("gprime", gprime);
    return out;
}

LyapunovConstants select_constants(const Coefficients& c, const RelaxationKernel& kernel,
                                   Real t0, Real margin_large, Real margin_small) {
    if (!c.theorem_mode)
        throw outside_theorem_error("constant selection requires a theorem-mode coefficient set");
    if (margin_large <= 1.0 || margin_small <= 0.0 || margin_small >= 1.0)
        throw error("select_constants: margins must satisfy margin_large > 1, 0 < margin_small < 1");

    LyapunovConstants lc;
    lc.weight_case =
        c.equal_weights() ? LyapunovConstants::Case::equal : LyapunovConstants::Case::strict;
    lc.Cp = 1.0 / (kPi * kPi);
    lc.upsilon = std::min(c.gamma, c.beta);
    lc.c_lem = std::exp(-2.0 * c.tau);
    lc.g0_cut = kernel.cumulative(t0);

    const Real Cp = lc.Cp;
    const Real ups = lc.upsilon;
    const Real gbar = kernel.mass();
    const Real g0v = kernel.initial_value();
    const Real lambda = c.lambda;
    const Real A = 1.0 / c.K + c.rho3 * c.K / (c.rho1 * c.rho1 * c.b);

    lc.eps4 = std::min(c.rho1 / 16.0 / (1.0 + c.rho1 * A),
                       (3.0 * ups * c.K / 8.0) /
                           (6.0 * ups * c.K * A + 2.0 * ups + c.K * c.K / 2.0));
    lc.N1 = margin_large * (2.0 / c.b) *
            ((0.5 / lc.eps4) * (2.0 * c.b * c.b * c.gamma +
                                c.gamma * c.gamma * c.b * c.b / (4.0 * lc.eps4 * lc.eps4) +
                                lc.eps4) +
             lc.eps4 * c.K * ups * (1.0 + 6.0 * Cp) * A + 3.0 * c.b * ups / 8.0 +
             lc.eps4 * ups * (1.0 + 2.0 * Cp));
    lc.eps1 = c.rho1 * ups / (16.0 * lc.N1);
    lc.N5 = margin_large * (8.0 / (c.rho2 * c.gamma)) *
            (lc.N1 * (1.5 * c.rho2 + c.rho1 * c.rho1 * Cp / (4.0 * lc.eps1)) +
             c.gamma * c.rho2 * c.b / lc.eps4 + 0.75 * c.rho2 * ups);
    lc.eta1 = lc.N5 * lc.eps4 / ups;

    const Real C1eps4 =
        (4.0 * c.beta * c.b / c.delta) * (2.0 * gbar * gbar + c.delta * c.delta) +
        (2.0 * c.beta * c.beta * c.b * c.b / lc.eps4) *
            (g0v * g0v * (c.gamma * c.gamma + c.rho3 * c.rho3) / (c.delta * c.delta) +
             (c.mu1 * c.mu1 + c.mu2 * c.mu2) * (1.0 + gbar * gbar / (c.delta * c.delta)));
    lc.N2 = margin_large * (4.0 / lambda) *
            (lc.N1 * c.beta * c.beta / (2.0 * c.rho2) +
             (0.5 / lc.eps4) * (ups * g0v * g0v + C1eps4) +
             lc.N5 * c.rho2 * (c.delta * c.delta + 2.0 * gbar * gbar) / c.gamma);
    lc.eps2 = margin_small *
              std::min(lc.N1 * c.b /
                           (2.0 * (lc.N2 + lc.N5 * (1.0 + Cp + 2.0 * Cp * Cp))),
                       3.0 * c.K * ups / (16.0 * lc.N5 * Cp));

    if (lc.weight_case == LyapunovConstants::Case::strict) {
        const Real m0v = m0(c);
        if (!(m0v > 0.0)) throw selection_failure_error("m0", m0v);
        const Real th_theta =
            (lc.N2 * (c.rho3 + c.gamma * c.gamma / (4.0 * lc.eps2)) +
             ups * (c.delta * c.delta + c.mu1 * c.mu1) / (4.0 * lc.eps4) +
             c.beta * c.b * c.rho3 / lc.eps4 + 1.25 +
             c.beta * c.beta * ups / (8.0 * c.b) +
             lc.N5 * (c.beta * c.rho3 + c.rho2 * c.mu1 * c.mu1 / c.gamma +
                      c.rho3 * c.rho3 * (2.0 * c.K * c.K + c.b * c.b) / (4.0 * lc.eps2) +
                      lc.eta1 * (c.rho3 * c.rho3 + c.rho3 * c.beta * c.beta / c.b)) +
             1.0 / c.tau) /
            m0v;
        const Real th_z =
            std::max(0.0, (c.mu2 * c.mu2 * lc.N2 * Cp / lambda +
                           c.mu2 * c.mu2 * ups / (4.0 * lc.eps4) + 0.75 +
                           2.0 * c.rho2 * c.mu2 * c.mu2 * lc.N5 / c.gamma - lc.c_lem / c.tau) /
                              m0v);
        const Real th_gp =
            (2.0 / c.beta) * (ups * g0v / (2.0 * lc.eps4) +
                              g0v * c.b * c.b * c.beta * c.beta *
                                  (c.gamma * c.gamma + c.rho3 * c.rho3) /
                                  (lc.eps4 * lc.eps4 * c.delta * c.delta));
        lc.N = margin_large * std::max({th_theta, th_z, th_gp});
        lc.N6 = 1.0;
        lc.N7 = 0.0;
        lc.eps7 = 0.0;
        lc.eta2 = 0.0;
    } else {
        const Real mu = c.mu1;
        if (!(lc.g0_cut > 0.0)) throw selection_failure_error("g0_cut", lc.g0_cut);
        lc.N6 = margin_large * (2.0 * c.tau / lc.c_lem) *
                (lc.N2 * mu * mu * Cp / lambda + mu * mu * ups / (4.0 * lc.eps4) + 0.75 +
                 2.0 * c.rho2 * mu * mu * lc.N5 / c.gamma);
        const Real rhs7 =
            lc.N2 * (c.rho3 + c.gamma * c.gamma / (4.0 * lc.eps2)) +
            ups * (c.delta * c.delta + mu * mu) / (4.0 * lc.eps4) +
            c.beta * c.b * c.rho3 / lc.eps4 + 1.25 + lc.N6 / c.tau +
            c.beta * c.beta * ups / (8.0 * c.b) +
            lc.N5 * (c.beta * c.rho3 + 2.0 * c.rho2 * mu * mu / c.gamma +
                     c.rho3 * c.rho3 * (2.0 * c.K * c.K + c.b * c.b) / (4.0 * lc.eps2) +
                     lc.eta1 * (c.rho3 * c.rho3 + c.rho3 * c.beta * c.beta / c.b));
        lc.N7 = margin_large * (2.0 / (c.rho3 * lc.g0_cut)) * (rhs7 + 0.125);
        lc.eta2 = 1.0 / (4.0 * lc.N7);
        lc.eps7 = margin_small * std::min({lc.N6 * lc.c_lem / (2.0 * c.tau * lc.N7),
                                           c.rho2 * c.gamma * lc.N5 / (8.0 * lc.N7),
                                           lambda * lc.N2 / (4.0 * lc.N7 * (1.0 + gbar * gbar))});
        lc.N = margin_large * (2.0 / c.beta) *
               (c.rho3 * c.rho3 * g0v * Cp * lc.N7 / (2.0 * lc.eta2) +
                ups * g0v / (2.0 * lc.eps4) +
                g0v * c.b * c.b * c.beta * c.beta * (c.gamma * c.gamma + c.rho3 * c.rho3) /
                    (lc.eps4 * lc.eps4 * c.delta * c.delta));
    }

    const BraceValues braces = evaluate_braces(lc, c, kernel);
    const auto [name, value] = braces.worst();
    if (value < 0.0) throw selection_failure_error(name, value);
    return lc;
}

BraceValues evaluate_braces(const LyapunovConstants& lc, const Coefficients& c,
                            const RelaxationKernel& kernel) {
    const Real Cp = lc.Cp;
    const Real ups = lc.upsilon;
    const Real gbar = kernel.mass();
    const Real g0v = kernel.initial_value();
    const Real lambda = c.lambda;
    const Real A = 1.0 / c.K + c.rho3 * c.K / (c.rho1 * c.rho1 * c.b);
    const Real C1eps4 =
        (4.0 * c.beta * c.b / c.delta) * (2.0 * gbar * gbar + c.delta * c.delta) +
        (2.0 * c.beta * c.beta * c.b * c.b / lc.eps4) *
            (g0v * g0v * (c.gamma * c.gamma + c.rho3 * c.rho3) / (c.delta * c.delta) +
             (c.mu1 * c.mu1 + c.mu2 * c.mu2) * (1.0 + gbar * gbar / (c.delta * c.delta)));

    BraceValues b;
    b.phi_t = c.rho1 * ups / 4.0 - lc.N1 * lc.eps1 - 2.0 * lc.eps4 * ups * (1.0 + c.rho1 * A);
    b.shear = 0.75 * ups * c.K - 2.0 * lc.eps2 * Cp * lc.N5 -
              lc.eps4 * (6.0 * ups * c.K * A + 2.0 * ups + c.K * c.K / 2.0);
    b.psi_x = lc.N1 * c.b - lc.eps2 * (lc.N2 + lc.N5 * (1.0 + Cp + 2.0 * Cp * Cp)) -
              (0.5 / lc.eps4) * (2.0 * c.b * c.b * c.gamma +
                                 c.gamma * c.gamma * c.b * c.b / (4.0 * lc.eps4 * lc.eps4) +
                                 lc.eps4) -
              lc.eps4 * (c.K * ups + 6.0 * Cp * c.K * ups) * A - 3.0 * c.b * ups / 8.0 -
              lc.eps4 * (ups + 2.0 * ups * Cp);

    if (lc.weight_case == LyapunovConstants::Case::strict) {
        const Real m0v = m0(c);
        b.psi_t = c.rho2 * c.gamma * lc.N5 / 4.0 -
                  lc.N1 * (1.5 * c.rho2 + c.rho1 * c.rho1 * Cp / (4.0 * lc.eps1)) -
                  0.75 * c.rho2 * ups - c.gamma * c.rho2 * c.b / lc.eps4;
        b.theta_t = lc.N * m0v - lc.N2 * (c.rho3 + c.gamma * c.gamma / (4.0 * lc.eps2)) -
                    (ups * (c.delta * c.delta + c.mu1 * c.mu1) / (4.0 * lc.eps4) +
                     c.beta * c.b * c.rho3 / lc.eps4 + 1.25) -
                    c.beta * c.beta * ups / (8.0 * c.b) -
                    lc.N5 * (c.beta * c.rho3 + c.rho2 * c.mu1 * c.mu1 / c.gamma +
                             c.rho3 * c.rho3 * (2.0 * c.K * c.K + c.b * c.b) / (4.0 * lc.eps2) +
                             lc.eta1 * (c.rho3 * c.rho3 + c.rho3 * c.beta * c.beta / c.b)) -
                    1.0 / c.tau;
        b.theta_x = lambda * lc.N2 / 2.0 - lc.N1 * c.beta * c.beta / (2.0 * c.rho2) -
                    (0.5 / lc.eps4) * (ups * g0v * g0v + C1eps4) -
                    lc.N5 * c.rho2 * (c.delta * c.delta + 2.0 * gbar * gbar) / c.gamma;
        b.z1 = lc.N * m0v + lc.c_lem / c.tau - c.mu2 * c.mu2 * lc.N2 * Cp / lambda -
               c.mu2 * c.mu2 * ups / (4.0 * lc.eps4) - 0.75 -
               2.0 * c.rho2 * c.mu2 * c.mu2 * lc.N5 / c.gamma;
        b.gprime = c.beta * lc.N / 2.0 - ups * g0v / (2.0 * lc.eps4) -
                   g0v * c.b * c.b * c.beta * c.beta * (c.gamma * c.gamma + c.rho3 * c.rho3) /
                       (lc.eps4 * lc.eps4 * c.delta * c.delta);
        b.gcirc = lc.N2 * gbar / lambda +
                  (c.beta * c.b * gbar / (lc.eps4 * lc.eps4 * c.delta * c.delta)) *
                      (4.0 * c.delta * lc.eps4 + c.beta * c.b * c.mu1 * c.mu1 +
                       c.beta * c.b * c.mu2 * c.mu2) +
                  2.0 * c.rho2 * gbar * lc.N5 / c.gamma;
        b.i6_coeff = 2.0;
    } else {
        const Real mu = c.mu1;
        b.psi_t = c.rho2 * c.gamma * lc.N5 / 4.0 -
                  lc.N1 * (1.5 * c.rho2 + c.rho1 * c.rho1 * Cp / (4.0 * lc.eps1)) -
                  lc.N7 * lc.eps7 - 0.75 * c.rho2 * ups - c.gamma * c.rho2 * c.b / lc.eps4;
        b.theta_t =
            lc.N7 * (c.rho3 * lc.g0_cut - lc.eta2) -
            lc.N2 * (c.rho3 + c.gamma * c.gamma / (4.0 * lc.eps2)) -
            (ups * (c.delta * c.delta + mu * mu) / (4.0 * lc.eps4) +
             c.beta * c.b * c.rho3 / lc.eps4 + 1.25) -
            c.beta * c.beta * ups / (8.0 * c.b) -
            lc.N5 * (c.beta * c.rho3 + 2.0 * c.rho2 * mu * mu / c.gamma +
                     c.rho3 * c.rho3 * (2.0 * c.K * c.K + c.b * c.b) / (4.0 * lc.eps2) +
                     lc.eta1 * (c.rho3 * c.rho3 + c.rho3 * c.beta * c.beta / c.b)) -
            lc.N6 / c.tau;
        b.theta_x = lambda * lc.N2 / 2.0 - lc.N1 * c.beta * c.beta / (2.0 * c.rho2) -
                    lc.N7 * lc.eps7 * (1.0 + gbar * gbar) -
                    (0.5 / lc.eps4) * (ups * g0v * g0v + C1eps4) -
                    lc.N5 * c.rho2 * (c.delta * c.delta + 2.0 * gbar * gbar) / c.gamma;
        b.z1 = lc.N6 * lc.c_lem / c.tau - mu * mu * lc.N2 * Cp / lambda - lc.N7 * lc.eps7 -
               mu * mu * ups / (4.0 * lc.eps4) - 0.75 -
               2.0 * c.rho2 * mu * mu * lc.N5 / c.gamma;
        b.gprime = c.beta * lc.N / 2.0 -
                   c.rho3 * c.rho3 * g0v * Cp * lc.N7 / (2.0 * lc.eta2) -
                   ups * g0v / (2.0 * lc.eps4) -
                   g0v * c.b * c.b * c.beta * c.beta * (c.gamma * c.gamma + c.rho3 * c.rho3) /
                       (lc.eps4 * lc.eps4 * c.delta * c.delta);
        const Real C2eps7 =
            (gbar / (4.0 * lc.eps7)) * (c.delta * c.delta + c.gamma * c.gamma +
                                        4.0 * lc.eps7 * lc.eps7 + 2.0 + mu * mu * Cp) +
            mu * mu * Cp * gbar / (2.0 * lc.eta2);
        b.gcirc = lc.N2 * gbar / (2.0 * lambda) + C2eps7 +
                  (c.beta * c.b * gbar / (lc.eps4 * lc.eps4 * c.delta * c.delta)) *
                      (4.0 * c.delta * lc.eps4 + 2.0 * c.beta * c.b * mu * mu) +
                  2.0 * c.rho2 * gbar * lc.N5 / c.gamma;
        b.i6_coeff = 2.0 * lc.N6;
    }
    return b;
}

DecayCoefficients decay_coefficients(const LyapunovConstants& lc, const BraceValues& braces,
                                     const Coefficients& c) {
    DecayCoefficients dc;
    dc.C = std::min({braces.phi_t / (0.5 * c.gamma * c.rho1),
                     braces.psi_t / (0.5 * c.gamma * c.rho2),
                     braces.shear / (0.5 * c.gamma * c.K),
                     braces.psi_x / (0.5 * c.gamma * c.b),
                     braces.theta_t / (0.5 * c.beta * c.rho3),
                     braces.theta_x / (0.5 * c.beta * c.delta),
                     braces.i6_coeff * lc.c_lem / (0.5 * c.beta * c.xi)});
    dc.C3 = braces.gcirc + dc.C * 0.5 * c.beta;
    return dc;
}

Real energy(const ModalState& state, const DelayField& delay, const HistoryTrace& hist,
            const Coefficients& c, const RelaxationKernel& kernel) {
    const RecordedRow row = snapshot_row(state, delay, hist, c, kernel);
    return row_norms(row, c, kernel).E;
}

Real energy_of_row(const RecordedRow& row, const Coefficients& c,
                   const RelaxationKernel& kernel) {
    return row_norms(row, c, kernel).E;
}

BoundaryTraces boundary_traces(const RecordedRow& row) {
    const auto n = row.phi.size();
    const Real s2 = std::sqrt(2.0);
    BoundaryTraces b;
    b.theta_t0 = row.theta_t[0];
    b.theta_t1 = row.theta_t[0];
    for (Eigen::Index k = 1; k <= n; ++k) {
        const Real w = kPi * Real(k);
        const Real sign = k % 2 == 0 ? 1.0 : -1.0;
        b.phi_x0 += w * row.phi[k - 1] * s2;
        b.phi_x1 += w * row.phi[k - 1] * s2 * sign;
        b.psi_x0 += w * row.psi[k - 1] * s2;
        b.psi_x1 += w * row.psi[k - 1] * s2 * sign;
        b.theta_t0 += row.theta_t[k] * s2;
        b.theta_t1 += row.theta_t[k] * s2 * sign;
    }
    return b;
}

FunctionalComponents lyapunov_components(const ModalState& state, const DelayField& delay,
                                         const HistoryTrace& hist, const Coefficients& c,
                                         const RelaxationKernel& kernel,
                                         int collocation_points) {
    const RecordedRow row = snapshot_row(state, delay, hist, c, kernel);
    const RowNorms m = row_norms(row, c, kernel);
    const Collocation q(state.n, collocation_points - 1);
    return components_from_row(row, m, c, kernel, q);
}

Real lyapunov_L(const FunctionalComponents& fc, const LyapunovConstants& lc,
                const Coefficients& c) {
    if (lc.weight_case == LyapunovConstants::Case::equal && !c.equal_weights())
        throw config_error("equal-case constants used with strict-case coefficients");
    if (lc.weight_case == LyapunovConstants::Case::strict && c.equal_weights())
        throw config_error("strict-case constants used with equal-case coefficients");
    return lyapunov_from(fc, lc, c);
}

FunctionalTrace instrument(const RunTrace& trace, const Coefficients& c,
                           const RelaxationKernel& kernel, const LyapunovConstants* lc,
                           int collocation_points) {
    if (collocation_points < 3 || collocation_points % 2 == 0)
        throw config_error("collocation_points must be odd and >= 3");
    FunctionalTrace ft;
    const std::size_t rows = trace.rows.size();
    if (rows == 0) return ft;
    const auto n = trace.rows[0].phi.size();
    const Collocation q(int(n), collocation_points - 1);

    std::vector<RowNorms> norms(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const RecordedRow& r = trace.rows[i];
        norms[i] = row_norms(r, c, kernel);
        const FunctionalComponents fc = components_from_row(r, norms[i], c, kernel, q);
        ft.t.push_back(r.t);
        ft.E.push_back(fc.E);
        ft.I1.push_back(fc.I1);
        ft.I2.push_back(fc.I2);
        ft.I3.push_back(fc.I3);
        ft.I4.push_back(fc.I4);
        ft.I5.push_back(fc.I5);
        ft.I6.push_back(fc.I6);
        ft.I7.push_back(fc.I7);
        ft.J1.push_back(fc.J1);
        ft.J2.push_back(fc.J2);
        ft.gcirc.push_back(fc.gcirc);
        if (lc) {
            const Real L = lyapunov_from(fc, *lc, c);
            ft.L.push_back(L);
            ft.L_over_E.push_back(fc.E > 0.0 ? L / fc.E : kNan);
        } else {
            ft.L.push_back(kNan);
            ft.L_over_E.push_back(kNan);
        }
    }
    for (std::size_t i = 0; i < rows; ++i) {
        Real d = 0.0;
        if (rows >= 2) {
            if (i == 0)
                d = (ft.E[1] - ft.E[0]) / (ft.t[1] - ft.t[0]);
            else if (i + 1 == rows)
                d = (ft.E[i] - ft.E[i - 1]) / (ft.t[i] - ft.t[i - 1]);
            else
                d = (ft.E[i + 1] - ft.E[i - 1]) / (ft.t[i + 1] - ft.t[i - 1]);
        }
        ft.dEdt.push_back(d);
        const Real rhs = balance_rhs(norms[i], c);
        ft.rhs_exact.push_back(rhs);
        ft.balance_residual.push_back(std::abs(d - rhs));
        ft.bound_slack.push_back(bound_rhs(norms[i], c) - d);
    }
    return ft;
}

Real energy_rate_residual(const RunTrace& trace, const Coefficients& c,
                          const RelaxationKernel& kernel, std::size_t mid) {
    if (trace.rows.size() < 3 || mid == 0 || mid + 1 >= trace.rows.size())
        throw arity_error("energy_rate_residual needs an interior row of >= 3 recorded rows");
    const RowNorms lo = row_norms(trace.rows[mid - 1], c, kernel);
    const RowNorms mi = row_norms(trace.rows[mid], c, kernel);
    const RowNorms hi = row_norms(trace.rows[mid + 1], c, kernel);
    const Real d = (hi.E - lo.E) / (trace.rows[mid + 1].t - trace.rows[mid - 1].t);
    return std::abs(d - balance_rhs(mi, c));
}

Real dissipation_bound_slack(const RunTrace& trace, const Coefficients& c,
                             const RelaxationKernel& kernel, std::size_t mid) {
    if (trace.rows.size() < 3 || mid == 0 || mid + 1 >= trace.rows.size())
        throw arity_error("dissipation_bound_slack needs an interior row of >= 3 recorded rows");
    const RowNorms lo = row_norms(trace.rows[mid - 1], c, kernel);
    const RowNorms mi = row_norms(trace.rows[mid], c, kernel);
    const RowNorms hi = row_norms(trace.rows[mid + 1], c, kernel);
    const Real d = (hi.E - lo.E) / (trace.rows[mid + 1].t - trace.rows[mid - 1].t);
    return bound_rhs(mi, c) - d;
}

EquivalenceEstimate equivalence_estimate(const FunctionalTrace& ft) {
    EquivalenceEstimate est;
    est.m_hat = std::numeric_limits<Real>::infinity();
    est.M_hat = -std::numeric_limits<Real>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < ft.E.size(); ++i) {
        if (!(ft.E[i] > 0.0) || !std::isfinite(ft.L[i])) continue;
        const Real ratio = ft.L[i] / ft.E[i];
        est.m_hat = std::min(est.m_hat, ratio);
        est.M_hat = std::max(est.M_hat, ratio);
        any = true;
    }
    if (!any) throw undefined_ratio_error("equivalence estimate undefined: no rows with E > 0");
    return est;
}

DecayFit fit_decay(const std::vector<Real>& times, const std::vector<Real>& energies,
                   const RelaxationKernel& kernel, Real t0) {
    if (times.size() != energies.size()) throw error("fit_decay: column length mismatch");
    std::vector<Real> X, Y;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] + 1e-12 < t0) continue;
        if (!(energies[i] > 0.0))
            throw fit_domain_error("fit_decay: non-positive energy inside the fit window");
        X.push_back(kernel.zeta_integral(t0, times[i]));
        Y.push_back(std::log(energies[i]));
    }
    if (X.size() < 2) throw fit_domain_error("fit_decay: fewer than two samples past t0");

    const Real nn = Real(X.size());
    Real sx = 0, sy = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        sx += X[i];
        sy += Y[i];
    }
    const Real mx = sx / nn, my = sy / nn;
    Real sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        sxx += (X[i] - mx) * (X[i] - mx);
        sxy += (X[i] - mx) * (Y[i] - my);
        syy += (Y[i] - my) * (Y[i] - my);
    }
    if (sxx == 0.0) throw fit_domain_error("fit_decay: zeta integral is constant on the window");
    const Real slope = sxy / sxx;
    const Real intercept = my - slope * mx;

    DecayFit fit;
    fit.t0 = t0;
    fit.A = std::exp(intercept);
    fit.omega = -slope;
    if (syy == 0.0) {
        fit.r2 = 1.0;
    } else {
        Real ss_res = 0;
        for (std::size_t i = 0; i < X.size(); ++i) {
            const Real e = Y[i] - (intercept + slope * X[i]);
            ss_res += e * e;
        }
        fit.r2 = 1.0 - ss_res / syy;
    }
    return fit;
}

int count_monotone_violations(const FunctionalTrace& ft, Real dt, Real slack_per_step) {
    if (ft.E.empty()) return 0;
    const Real e0 = ft.E[0];
    int count = 0;
    for (std::size_t i = 1; i < ft.E.size(); ++i) {
        const Real steps = std::max(1.0, std::round((ft.t[i] - ft.t[i - 1]) / dt));
        if (ft.E[i] - ft.E[i - 1] > slack_per_step * e0 * steps) ++count;
    }
    return count;
}

}  // namespace tvt
