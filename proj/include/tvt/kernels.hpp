#ifndef TVT_KERNELS_HPP
#define TVT_KERNELS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <optional>

#include "tvt/errors.hpp"

namespace tvt {

using Real = double;
using Vec = Eigen::ArrayXd;
using Mat = Eigen::MatrixXd;

enum class KernelFamily { exponential, power_zeta, tabulated };

/// Decay-rate witness zeta(t): constant `rate` or hyperbolic `rate/(1+t)`.
struct ZetaSpec {
    enum class Kind { constant, hyperbolic };
    Kind kind = Kind::constant;
    Real rate = 1.0;

    Real value(Real t) const {
        return kind == Kind::constant ? rate : rate / (1.0 + t);
    }
    /// Closed-form integral of zeta over [t0, t].
    Real integral(Real t0, Real t) const {
        return kind == Kind::constant ? rate * (t - t0)
                                      : rate * std::log((1.0 + t) / (1.0 + t0));
    }
    bool non_increasing() const { return true; }  // both kinds are, for rate >= 0
};

/// Relaxation function g with its decay witness and total mass.
///
/// Families:
///   exponential  g(t) = g0 exp(-rate t),   zeta defaults to the constant rate
///   power_zeta   g(t) = g0 (1+t)^-p,       zeta defaults to p/(1+t)
///   tabulated    linear interpolation of (t, g) samples; mass must be given
///                explicitly or stays unknown
class RelaxationKernel {
public:
    /// Defaults to the unit exponential kernel exp(-t).
    RelaxationKernel() : zeta_(ZetaSpec{ZetaSpec::Kind::constant, 1.0}), mass_(1.0) {}

    static RelaxationKernel exponential(Real g0, Real rate);
    static RelaxationKernel exponential(Real g0, Real rate, ZetaSpec zeta);
    static RelaxationKernel power(Real g0, Real exponent);
    static RelaxationKernel power(Real g0, Real exponent, ZetaSpec zeta);
    static RelaxationKernel tabulated(Vec times, Vec values, std::optional<Real> mass,
                                      std::optional<ZetaSpec> zeta = std::nullopt);

    KernelFamily family() const { return family_; }
    Real initial_value() const;  // g(0)
    Real rate() const { return rate_; }

    Real g(Real t) const;
    Real gprime(Real t) const;

    bool has_zeta() const { return zeta_.has_value(); }
    const ZetaSpec& zeta_spec() const;
    Real zeta(Real t) const { return zeta_spec().value(t); }
    Real zeta_integral(Real t0, Real t) const { return zeta_spec().integral(t0, t); }

    bool has_mass() const;
    Real mass() const;            // gbar = integral of g over [0, inf)
    Real cumulative(Real t) const;  // G(t) = integral of g over [0, t]

    /// Largest time g can be evaluated at (table end; infinite for the
    /// closed-form families).
    Real support_end() const;

private:
    KernelFamily family_ = KernelFamily::exponential;
    Real g0_ = 1.0;
    Real rate_ = 1.0;  // exponential rate or power exponent
    std::optional<ZetaSpec> zeta_;
    std::optional<Real> mass_;
    // tabulated data
    Vec tab_t_, tab_g_, tab_cum_;
};

/// Uniformly sampled scalar signal h(0), h(dt), h(2 dt), ...
struct ScalarHistory {
    Real dt = 0.0;
    Vec samples;

    ScalarHistory() = default;
    ScalarHistory(Real step, Vec values);

    Eigen::Index size() const { return samples.size(); }
    Real tmax() const { return dt * Real(samples.size() - 1); }
    Real value(Real t) const;  // linear interpolation, throws out_of_range_error

    template <class F>
    static ScalarHistory sample(F&& f, Real dt, Real t_end) {
        const auto m = Eigen::Index(std::llround(t_end / dt));
        Vec v(m + 1);
        for (Eigen::Index i = 0; i <= m; ++i) v[i] = f(dt * Real(i));
        return ScalarHistory(dt, std::move(v));
    }
};

struct HypothesisReport {
    Real lambda = 0.0;
    bool h1_ok = false;
    bool h2_ok = false;
    Real worst_h2_slack = 0.0;  // max over grid of g' + zeta * g
};

/// Validates (H1)-(H2)-style conditions of a kernel against delta on a grid.
HypothesisReport check_hypotheses(const RelaxationKernel& kernel, Real delta, const Vec& t_grid);

/// (g*h)(t): trapezoidal quadrature of the convolution over [0, t].
Real convolve(const RelaxationKernel& kernel, const ScalarHistory& h, Real t);

/// (g<>h)(t) = G(t) h(t) - (g*h)(t).
Real diamond(const RelaxationKernel& kernel, const ScalarHistory& h, Real t);

/// (g o h)(t): direct quadrature of the squared-difference memory integral.
Real circle(const RelaxationKernel& kernel, const ScalarHistory& h, Real t);

/// (g o h)(t) through the algebraic expansion G h^2 - 2 h (g*h) + (g*h^2).
Real circle_expanded(const RelaxationKernel& kernel, const ScalarHistory& h, Real t);

/// Discrete residual of the convolution differentiation identity at a grid
/// point; decays at second order under grid refinement for smooth h.
Real convolution_identity_residual(const RelaxationKernel& kernel, const ScalarHistory& h, Real t);

/// G(t)(g o h)(t) - (g<>h)(t)^2, nonnegative up to quadrature error.
Real memory_inequality_slack(const RelaxationKernel& kernel, const ScalarHistory& h, Real t);

/// O(1)-per-step trapezoidal accumulator for q(t) = (g*h)(t) with an
/// exponential kernel. advance() reproduces the composite trapezoid value
/// exactly: the step weights telescope.
struct ExpConvAccumulator {
    Real g0 = 1.0;
    Real rate = 1.0;
    Real value = 0.0;

    void advance(Real h_old, Real h_new, Real dt) {
        const Real decay = std::exp(-rate * dt);
        value = decay * value + 0.5 * dt * g0 * (decay * h_old + h_new);
    }
    /// Value at an offset past the committed time, without committing.
    Real peek(Real h_old, Real h_at_offset, Real offset) const {
        const Real decay = std::exp(-rate * offset);
        return decay * value + 0.5 * offset * g0 * (decay * h_old + h_at_offset);
    }
};

}  // namespace tvt

#endif
