#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

#include "doctest.h"
#include "tvt/functionals.hpp"
#include "tvt/integrator.hpp"

using namespace tvt;

namespace {

constexpr Real kPi = 3.14159265358979323846;

Coefficients accept_coeffs(Real mu2 = 1.0) {
    return build_theorem_coeffs(1, 1, 1, 1, 2, 2, 2, mu2, 0.5,
                                RelaxationKernel::exponential(1.0, 2.0));
}

InitialData smooth_data() {
    InitialData d;
    d.phi0 = [](Real x) { return std::sin(kPi * x); };
    d.psi0 = [](Real x) { return 0.5 * std::sin(2.0 * kPi * x); };
    d.theta0 = [](Real x) { return 0.5 * std::cos(kPi * x); };
    d.theta1 = [](Real x) { return 0.5 * std::cos(kPi * x); };
    return d;
}

}  // namespace

TEST_CASE("validate_sim: delay alignment and stability probe") {
    const auto c = accept_coeffs();
    SimConfig sim;
    sim.n = 8;
    sim.dt = 1e-3;
    sim.t_end = 1.0;
    CHECK_NOTHROW(validate_sim(sim, c));

    auto bad = sim;
    bad.dt = 3e-3;  // tau/dt = 166.67
    CHECK_THROWS_AS(validate_sim(bad, c), step_size_error);

    bad = sim;
    bad.n = 64;
    bad.dt = 0.05;  // violates the probe bound but divides tau
    CHECK_THROWS_AS(validate_sim(bad, c), step_size_error);

    bad = sim;
    bad.t_end = -1.0;
    CHECK_THROWS_AS(validate_sim(bad, c), config_error);
}

TEST_CASE("zero state stays identically zero") {
    const auto c = accept_coeffs();
    SimConfig sim;
    sim.n = 4;
    sim.dt = 1e-2;
    sim.t_end = 2.0;
    sim.record_stride = 20;
    const RunTrace trace = run(sim, c, RelaxationKernel::exponential(1.0, 2.0), InitialData{});
    CHECK_FALSE(trace.diverged);
    for (const auto& row : trace.rows) {
        CHECK(row.phi.abs().maxCoeff() == 0.0);
        CHECK(row.theta_t.abs().maxCoeff() == 0.0);
        CHECK(row.z_sq == 0.0);
    }
}

TEST_CASE("mean-mode theta follows the scalar closed form") {
    // rho3 v' = -mu1 v with mu2 = 0: v(t) = v0 exp(-mu1 t / rho3)
    const auto c = accept_coeffs(0.0);
    const auto kernel = RelaxationKernel::exponential(1.0, 2.0);
    SimConfig sim;
    sim.n = 2;
    sim.dt = 1e-3;
    sim.t_end = 1.0;
    sim.record_stride = 1000;

    InitialData data;
    data.theta1 = [](Real) { return 1.0; };
    const RunTrace trace = run(sim, c, kernel, data);
    const Real v_end = trace.rows.back().theta_t[0];
    CHECK(v_end == doctest::Approx(std::exp(-c.mu1 / c.rho3)).epsilon(1e-8));
}

TEST_CASE("conservative subsystem: energy constant, trajectory matches expm") {
    // g = 0 and every damping/coupling weight off
    const auto kernel = RelaxationKernel::exponential(0.0, 1.0);
    const auto c = build_exploratory_coeffs(1, 1, 1, 1, 2, 0, 0, 2, 0, 0, 0.5, kernel);

    SimConfig sim;
    sim.n = 2;
    sim.dt = 5e-4;
    sim.t_end = 10.0;
    sim.record_stride = 400;

    InitialData data;
    data.phi0 = [](Real x) { return std::sqrt(2.0) * std::sin(kPi * x); };
    data.psi1 = [](Real x) { return 0.5 * std::sqrt(2.0) * std::sin(kPi * x); };
    const RunTrace trace = run(sim, c, kernel, data);

    // quadratic energy of the k = 1 block is conserved
    std::vector<Real> energies;
    for (const auto& row : trace.rows) energies.push_back(energy_of_row(row, c, kernel));
    for (Real e : energies) CHECK(e == doctest::Approx(energies.front()).epsilon(1e-8));

    // dense fundamental-matrix oracle on (phi, phi_t, psi, psi_t) at k = 1
    const Real w = kPi;
    Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
    A(0, 1) = 1.0;
    A(1, 0) = -c.K * w * w / c.rho1;
    A(1, 2) = -c.K * w / c.rho1;
    A(2, 3) = 1.0;
    A(3, 0) = -c.K * w / c.rho2;
    A(3, 2) = -(c.b * w * w + c.K) / c.rho2;
    Eigen::Vector4d y0(1.0, 0.0, 0.0, 0.5);
    const Eigen::Matrix4d expA = (A * sim.t_end).exp();
    const Eigen::Vector4d y_end = expA * y0;

    const auto& last = trace.rows.back();
    CHECK(last.phi[0] == doctest::Approx(y_end[0]).epsilon(1e-6));
    CHECK(last.phi_t[0] == doctest::Approx(y_end[1]).epsilon(1e-6));
    CHECK(last.psi[0] == doctest::Approx(y_end[2]).epsilon(1e-6));
    CHECK(last.psi_t[0] == doctest::Approx(y_end[3]).epsilon(1e-6));
}

TEST_CASE("observed order of accuracy is at least two") {
    const auto c = accept_coeffs();
    const auto kernel = RelaxationKernel::exponential(1.0, 2.0);
    const InitialData data = smooth_data();

    auto state_at = [&](Real dt) {
        SimConfig sim;
        sim.n = 4;
        sim.dt = dt;
        sim.t_end = 2.0;
        sim.record_stride = int(std::llround(2.0 / dt));
        return run(sim, c, kernel, data).rows.back();
    };
    const auto ref = state_at(3.125e-5);
    auto err = [&](const RecordedRow& row) {
        return std::max({(row.phi - ref.phi).abs().maxCoeff(),
                         (row.psi - ref.psi).abs().maxCoeff(),
                         (row.theta_t - ref.theta_t).abs().maxCoeff()});
    };
    const Real e1 = err(state_at(1e-3));
    const Real e2 = err(state_at(5e-4));
    const Real order = std::log2(e1 / e2);
    CHECK(order >= 1.9);
}

TEST_CASE("determinism: identical inputs give bit-identical traces") {
    const auto c = accept_coeffs();
    const auto kernel = RelaxationKernel::exponential(1.0, 2.0);
    SimConfig sim;
    sim.n = 6;
    sim.dt = 1e-2;
    sim.t_end = 3.0;
    sim.record_stride = 10;

    const RunTrace a = run(sim, c, kernel, smooth_data());
    const RunTrace b = run(sim, c, kernel, smooth_data());
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK((a.rows[i].phi - b.rows[i].phi).abs().maxCoeff() == 0.0);
        CHECK((a.rows[i].theta_t - b.rows[i].theta_t).abs().maxCoeff() == 0.0);
        CHECK(a.rows[i].z_sq == b.rows[i].z_sq);
        CHECK(a.rows[i].conv_theta[1] == b.rows[i].conv_theta[1]);
    }
}

TEST_CASE("record stride halves the rows, not the dynamics") {
    const auto c = accept_coeffs();
    const auto kernel = RelaxationKernel::exponential(1.0, 2.0);
    SimConfig sim;
    sim.n = 4;
    sim.dt = 1e-2;
    sim.t_end = 2.0;
    sim.record_stride = 10;

    const RunTrace fine = run(sim, c, kernel, smooth_data());
    sim.record_stride = 20;
    const RunTrace coarse = run(sim, c, kernel, smooth_data());
    CHECK(fine.rows.size() == 21);
    CHECK(coarse.rows.size() == 11);
    for (std::size_t i = 0; i < coarse.rows.size(); ++i) {
        CHECK(coarse.rows[i].t == fine.rows[2 * i].t);
        CHECK((coarse.rows[i].phi - fine.rows[2 * i].phi).abs().maxCoeff() == 0.0);
    }
}

TEST_CASE("t_end = 0 yields the single initial snapshot") {
    const auto c = accept_coeffs();
    SimConfig sim;
    sim.n = 4;
    sim.dt = 1e-2;
    sim.t_end = 0.0;
    const RunTrace trace = run(sim, c, RelaxationKernel::exponential(1.0, 2.0), smooth_data());
    CHECK(trace.rows.size() == 1);
    CHECK(trace.rows[0].t == 0.0);
}

TEST_CASE("divergence is flagged, not silently propagated") {
    // overwhelming delayed feedback without friction or memory
    const auto kernel = RelaxationKernel::exponential(0.0, 1.0);
    const auto c = build_exploratory_coeffs(1, 1, 1, 1, 2, 1, 1, 2, 0.1, 60.0, 0.5, kernel);
    SimConfig sim;
    sim.n = 2;
    sim.dt = 1e-2;
    sim.t_end = 40.0;
    sim.record_stride = 100;

    InitialData data;
    data.theta1 = [](Real) { return 1.0; };
    const RunTrace trace = run(sim, c, kernel, data);
    CHECK(trace.diverged);
    CHECK(trace.divergence_time > 0.0);
    CHECK(trace.divergence_time < 40.0);
    for (const auto& row : trace.rows) CHECK(row.theta_t.allFinite());
}

TEST_CASE("transport and ringbuffer backends advance the same trajectory") {
    const auto c = accept_coeffs();
    const auto kernel = RelaxationKernel::exponential(1.0, 2.0);
    SimConfig sim;
    sim.n = 4;
    sim.dt = 1e-2;
    sim.t_end = 3.0;
    sim.record_stride = 25;

    sim.backend = DelayBackend::ringbuffer;
    const RunTrace ring = run(sim, c, kernel, smooth_data());
    sim.backend = DelayBackend::transport;
    const RunTrace trans = run(sim, c, kernel, smooth_data());
    REQUIRE(ring.rows.size() == trans.rows.size());
    for (std::size_t i = 0; i < ring.rows.size(); ++i) {
        CHECK((ring.rows[i].z1 - trans.rows[i].z1).abs().maxCoeff() <= 1e-12);
        CHECK((ring.rows[i].theta_t - trans.rows[i].theta_t).abs().maxCoeff() <= 1e-12);
    }
}
