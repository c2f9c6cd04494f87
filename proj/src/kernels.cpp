#include "tvt/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tvt {

namespace {

constexpr Real kGridTol = 1e-12;

void require(bool cond, const char* msg) {
    if (!cond) throw error(msg);
}

}  // namespace

RelaxationKernel RelaxationKernel::exponential(Real g0, Real rate) {
    ZetaSpec z{ZetaSpec::Kind::constant, rate};
    return exponential(g0, rate, z);
}

RelaxationKernel RelaxationKernel::exponential(Real g0, Real rate, ZetaSpec zeta) {
    if (g0 < 0.0) throw invalid_coefficient_error("exponential kernel: g0 must be >= 0");
    if (rate <= 0.0) throw invalid_coefficient_error("exponential kernel: rate must be > 0");
    if (zeta.rate < 0.0) throw invalid_coefficient_error("kernel zeta rate must be >= 0");
    RelaxationKernel k;
    k.family_ = KernelFamily::exponential;
    k.g0_ = g0;
    k.rate_ = rate;
    k.zeta_ = zeta;
    k.mass_ = g0 / rate;
    return k;
}

RelaxationKernel RelaxationKernel::power(Real g0, Real exponent) {
    ZetaSpec z{ZetaSpec::Kind::hyperbolic, exponent};
    return power(g0, exponent, z);
}

RelaxationKernel RelaxationKernel::power(Real g0, Real exponent, ZetaSpec zeta) {
    if (g0 < 0.0) throw invalid_coefficient_error("power kernel: g0 must be >= 0");
    if (exponent <= 1.0)
        throw invalid_coefficient_error("power kernel: exponent must be > 1 for finite mass");
    if (zeta.rate < 0.0) throw invalid_coefficient_error("kernel zeta rate must be >= 0");
    RelaxationKernel k;
    k.family_ = KernelFamily::power_zeta;
    k.g0_ = g0;
    k.rate_ = exponent;
    k.zeta_ = zeta;
    k.mass_ = g0 / (exponent - 1.0);
    return k;
}

RelaxationKernel RelaxationKernel::tabulated(Vec times, Vec values, std::optional<Real> mass,
                                             std::optional<ZetaSpec> zeta) {
    require(times.size() >= 2 && times.size() == values.size(),
            "tabulated kernel: need >= 2 matching (t, g) samples");
    require(times[0] == 0.0, "tabulated kernel: table must start at t = 0");
    for (Eigen::Index i = 1; i < times.size(); ++i)
        require(times[i] > times[i - 1], "tabulated kernel: times must be increasing");
    require((values >= 0.0).all(), "tabulated kernel: g must be nonnegative");
    if (mass && *mass < 0.0) throw invalid_coefficient_error("tabulated kernel: mass must be >= 0");

    RelaxationKernel k;
    k.family_ = KernelFamily::tabulated;
    k.g0_ = values[0];
    k.rate_ = 0.0;
    k.zeta_ = zeta;
    k.mass_ = mass;
    // cumulative trapezoid of the table
    Vec cum(times.size());
    cum[0] = 0.0;
    for (Eigen::Index i = 1; i < times.size(); ++i)
        cum[i] = cum[i - 1] + 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
    k.tab_t_ = std::move(times);
    k.tab_g_ = std::move(values);
    k.tab_cum_ = std::move(cum);
    return k;
}

Real RelaxationKernel::initial_value() const { return g0_; }

Real RelaxationKernel::g(Real t) const {
    switch (family_) {
        case KernelFamily::exponential:
            return g0_ * std::exp(-rate_ * t);
        case KernelFamily::power_zeta:
            return g0_ * std::pow(1.0 + t, -rate_);
        case KernelFamily::tabulated: {
            if (t < -kGridTol || t > tab_t_[tab_t_.size() - 1] + kGridTol)
                throw out_of_range_error("tabulated kernel evaluated outside its table");
            t = std::clamp(t, 0.0, tab_t_[tab_t_.size() - 1]);
            auto hi = std::lower_bound(tab_t_.data(), tab_t_.data() + tab_t_.size(), t) -
                      tab_t_.data();
            if (hi == 0) return tab_g_[0];
            const Real w = (t - tab_t_[hi - 1]) / (tab_t_[hi] - tab_t_[hi - 1]);
            return tab_g_[hi - 1] + w * (tab_g_[hi] - tab_g_[hi - 1]);
        }
    }
    return 0.0;
}

Real RelaxationKernel::gprime(Real t) const {
    switch (family_) {
        case KernelFamily::exponential:
            return -rate_ * g(t);
        case KernelFamily::power_zeta:
            return -rate_ * g0_ * std::pow(1.0 + t, -rate_ - 1.0);
        case KernelFamily::tabulated: {
            if (t < -kGridTol || t > tab_t_[tab_t_.size() - 1] + kGridTol)
                throw out_of_range_error("tabulated kernel evaluated outside its table");
            t = std::clamp(t, 0.0, tab_t_[tab_t_.size() - 1]);
            auto hi = std::lower_bound(tab_t_.data(), tab_t_.data() + tab_t_.size(), t) -
                      tab_t_.data();
            if (hi == 0) hi = 1;
            return (tab_g_[hi] - tab_g_[hi - 1]) / (tab_t_[hi] - tab_t_[hi - 1]);
        }
    }
    return 0.0;
}

const ZetaSpec& RelaxationKernel::zeta_spec() const {
    if (!zeta_) throw error("kernel has no zeta specification");
    return *zeta_;
}

bool RelaxationKernel::has_mass() const { return mass_.has_value(); }

Real RelaxationKernel::mass() const {
    if (!mass_) throw unknown_mass_error("tabulated kernel has no explicit total mass");
    return *mass_;
}

Real RelaxationKernel::cumulative(Real t) const {
    switch (family_) {
        case KernelFamily::exponential:
            return g0_ / rate_ * (1.0 - std::exp(-rate_ * t));
        case KernelFamily::power_zeta:
            return g0_ / (rate_ - 1.0) * (1.0 - std::pow(1.0 + t, 1.0 - rate_));
        case KernelFamily::tabulated: {
            if (t < -kGridTol || t > tab_t_[tab_t_.size() - 1] + kGridTol)
                throw out_of_range_error("tabulated kernel evaluated outside its table");
            t = std::clamp(t, 0.0, tab_t_[tab_t_.size() - 1]);
            auto hi = std::lower_bound(tab_t_.data(), tab_t_.data() + tab_t_.size(), t) -
                      tab_t_.data();
            if (hi == 0) return 0.0;
            const Real gl = g(t);
            return tab_cum_[hi - 1] + 0.5 * (t - tab_t_[hi - 1]) * (tab_g_[hi - 1] + gl);
        }
    }
    return 0.0;
}

Real RelaxationKernel::support_end() const {
    return family_ == KernelFamily::tabulated ? tab_t_[tab_t_.size() - 1]
                                              : std::numeric_limits<Real>::infinity();
}

ScalarHistory::ScalarHistory(Real step, Vec values) : dt(step), samples(std::move(values)) {
    if (!(dt > 0.0)) throw error("ScalarHistory: dt must be > 0");
    if (samples.size() < 1) throw error("ScalarHistory: need at least one sample");
}

Real ScalarHistory::value(Real t) const {
    if (t < -kGridTol || t > tmax() + kGridTol)
        throw out_of_range_error("history lookup outside the recorded span");
    t = std::clamp(t, 0.0, tmax());
    const Real x = t / dt;
    auto lo = Eigen::Index(std::floor(x));
    if (lo >= samples.size() - 1) return samples[samples.size() - 1];
    const Real w = x - Real(lo);
    return samples[lo] + w * (samples[lo + 1] - samples[lo]);
}

HypothesisReport check_hypotheses(const RelaxationKernel& kernel, Real delta, const Vec& t_grid) {
    if (delta <= 0.0) throw invalid_coefficient_error("check_hypotheses: delta must be > 0");
    require(t_grid.size() > 0, "check_hypotheses: empty grid");
    require(t_grid[0] >= 0.0, "check_hypotheses: grid must be nonnegative");
    for (Eigen::Index i = 1; i < t_grid.size(); ++i)
        require(t_grid[i] > t_grid[i - 1], "check_hypotheses: grid must be increasing");

    HypothesisReport rep;
    rep.lambda = delta - kernel.mass();
    rep.h1_ok = kernel.initial_value() > 0.0 && rep.lambda > 0.0;

    const Real tol = 1e-10 * std::max(1.0, kernel.initial_value());
    if (!kernel.has_zeta()) {
        rep.h2_ok = false;
        rep.worst_h2_slack = std::numeric_limits<Real>::quiet_NaN();
        return rep;
    }
    // zeta must also carry a divergent integral, which both witness shapes do
    // exactly when their rate is positive
    rep.h2_ok = kernel.zeta_spec().rate > 0.0;
    rep.worst_h2_slack = -std::numeric_limits<Real>::infinity();
    Real prev_zeta = std::numeric_limits<Real>::infinity();
    for (Eigen::Index i = 0; i < t_grid.size(); ++i) {
        const Real t = t_grid[i];
        const Real z = kernel.zeta(t);
        const Real slack = kernel.gprime(t) + z * kernel.g(t);
        rep.worst_h2_slack = std::max(rep.worst_h2_slack, slack);
        if (slack > tol || z < -tol || z > prev_zeta + tol) rep.h2_ok = false;
        prev_zeta = z;
    }
    return rep;
}

namespace {

// Trapezoid of w(s) f(s) over [0, t] on the history grid, where f is built
// pointwise from the history; handles an off-grid endpoint with a partial
// trapezoid using the interpolated history value.
template <class Integrand>
Real history_trapezoid(const ScalarHistory& h, Real t, Integrand&& f) {
    if (t < -kGridTol) throw out_of_range_error("convolution time must be >= 0");
    if (t > h.tmax() + kGridTol) throw out_of_range_error("convolution time beyond history");
    t = std::clamp(t, 0.0, h.tmax());
    if (t == 0.0) return 0.0;

    const Real dt = h.dt;
    auto m = Eigen::Index(std::floor(t / dt + kGridTol));
    m = std::min(m, h.size() - 1);
    Real acc = 0.0;
    for (Eigen::Index i = 0; i + 1 <= m; ++i)
        acc += 0.5 * dt * (f(dt * Real(i), h.samples[i]) + f(dt * Real(i + 1), h.samples[i + 1]));
    const Real rem = t - dt * Real(m);
    if (rem > kGridTol)
        acc += 0.5 * rem * (f(dt * Real(m), h.samples[m]) + f(t, h.value(t)));
    return acc;
}

}  // namespace

Real convolve(const RelaxationKernel& kernel, const ScalarHistory& h, Real t) {
    return history_trapezoid(h, t, [&](Real s, Real hs) { return kernel.g(t - s) * hs; });
}

namespace {

// cumulative mass on the history grid; keeps <>/o identities exact in the
// quadrature (the closed-form G differs by the trapezoid defect)
Real quad_mass(const RelaxationKernel& kernel, const ScalarHistory& h, Real t) {
    return history_trapezoid(h, t, [&](Real s, Real) { return kernel.g(t - s); });
}

}  // namespace

Real diamond(const RelaxationKernel& kernel, const ScalarHistory& h, Real t) {
    if (t < -kGridTol || t > h.tmax() + kGridTol)
        throw out_of_range_error("diamond: time outside history");
    return quad_mass(kernel, h, t) * h.value(t) - convolve(kernel, h, t);
}

Real circle(const RelaxationKernel& kernel, const ScalarHistory& h, Real t) {
    if (t < -kGridTol || t > h.tmax() + kGridTol)
        throw out_of_range_error("circle: time outside history");
    const Real ht = h.value(std::clamp(t, 0.0, h.tmax()));
    return history_trapezoid(h, t, [&](Real s, Real hs) {
        const Real d = ht - hs;
        return kernel.g(t - s) * d * d;
    });
}

Real circle_expanded(const RelaxationKernel& kernel, const ScalarHistory& h, Real t) {
    if (t < -kGridTol || t > h.tmax() + kGridTol)
        throw out_of_range_error("circle: time outside history");
    const Real ht = h.value(std::clamp(t, 0.0, h.tmax()));
    const Real conv = convolve(kernel, h, t);
    const Real conv_sq =
        history_trapezoid(h, t, [&](Real s, Real hs) { return kernel.g(t - s) * hs * hs; });
    return quad_mass(kernel, h, t) * ht * ht - 2.0 * ht * conv + conv_sq;
}

Real convolution_identity_residual(const RelaxationKernel& kernel, const ScalarHistory& h, Real t) {
    const Real dt = h.dt;
    const auto i = Eigen::Index(std::llround(t / dt));
    if (std::abs(t - dt * Real(i)) > kGridTol * std::max(1.0, t))
        throw arity_error("convolution_identity_residual: t must lie on the history grid");
    if (i < 1 || i + 1 >= h.size())
        throw arity_error("convolution_identity_residual: need a neighbor sample on each side of t");

    const Real hdot = (h.samples[i + 1] - h.samples[i - 1]) / (2.0 * dt);
    const Real ht = h.samples[i];
    const Real gp_circle = history_trapezoid(h, t, [&](Real s, Real hs) {
        const Real d = ht - hs;
        return kernel.gprime(t - s) * d * d;
    });

    auto bracket = [&](Real tq) {
        const Real hq = h.value(tq);
        return circle(kernel, h, tq) - kernel.cumulative(tq) * hq * hq;
    };
    const Real dbracket = (bracket(t + dt) - bracket(t - dt)) / (2.0 * dt);

    const Real residual = convolve(kernel, h, t) * hdot + 0.5 * kernel.g(t) * ht * ht -
                          0.5 * gp_circle + 0.5 * dbracket;
    return std::abs(residual);
}

Real memory_inequality_slack(const RelaxationKernel& kernel, const ScalarHistory& h, Real t) {
    const Real d = diamond(kernel, h, t);
    return quad_mass(kernel, h, t) * circle(kernel, h, t) - d * d;
}

}  // namespace tvt
