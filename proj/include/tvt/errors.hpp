#ifndef TVT_ERRORS_HPP
#define TVT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tvt {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A required constant is non-positive or otherwise unusable.
struct invalid_coefficient_error : error {
    using error::error;
};

// Tabulated kernel without an explicit total mass.
struct unknown_mass_error : error {
    using error::error;
};

// Query time outside the recorded history / delay coverage.
struct out_of_range_error : error {
    using error::error;
};

// Not enough samples for a finite-difference stencil.
struct arity_error : error {
    using error::error;
};

// Derived gamma/beta came out non-positive.
struct structural_condition_error : error {
    using error::error;
};

// Kernel mass or sign conditions fail.
struct hypothesis_error : error {
    using error::error;
};

// Delay weight exceeds the friction weight.
struct outside_theorem_error : error {
    using error::error;
};

// Constant selection produced a negative brace; carries its name.
struct selection_failure_error : error {
    std::string brace;
    selection_failure_error(const std::string& which, double value)
        : error("constant selection failed: brace '" + which + "' = " + std::to_string(value)),
          brace(which) {}
};

// Non-finite state during time stepping; carries the last finite time.
struct divergence_error : error {
    double last_finite_time;
    explicit divergence_error(double t)
        : error("state diverged; last finite time t = " + std::to_string(t)),
          last_finite_time(t) {}
};

struct fit_domain_error : error {
    using error::error;
};

struct undefined_ratio_error : error {
    using error::error;
};

// Config schema violation; message carries the field path.
struct config_error : error {
    using error::error;
};

// Time step violates a stability or CFL bound.
struct step_size_error : error {
    using error::error;
};

}  // namespace tvt

#endif
