#ifndef TVT_HARNESS_HPP
#define TVT_HARNESS_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tvt/functionals.hpp"

namespace tvt {

inline constexpr const char* kCodeVersion = "tvt 1.0.0";

/// Fully validated run configuration; every module validator has passed and
/// `report` carries one line per check.
struct LoadedConfig {
    Coefficients coeffs;
    RelaxationKernel kernel;
    SimConfig sim;
    InitialData initial;
    nlohmann::json experiment;
    nlohmann::json canonical;  // the whole config, echoed into outputs
    std::vector<std::string> report;
    Real fit_t0 = 0.0;
    int functional_points = 129;
    Real margin_large = 1.05;  // "sufficiently large" threshold factor
    Real margin_small = 0.5;   // "sufficiently small" ceiling factor
};

LoadedConfig load_config(const std::filesystem::path& path);
LoadedConfig load_config_json(const nlohmann::json& doc,
                              const std::filesystem::path& base_dir = ".");

/// FNV-1a hash of the canonicalized config document.
std::string config_digest(const nlohmann::json& doc);

/// Shortest round-trip decimal representation.
std::string format_double(Real v);

struct RunManifest {
    std::string digest;
    std::string code_version;
    std::vector<std::string> outputs;
};

/// In-memory results of one simulate cell (also reused by sweep / refine).
struct SimulationOutputs {
    RunTrace trace;
    FunctionalTrace columns;
    std::optional<LyapunovConstants> constants;
    std::optional<BraceValues> braces;
    std::optional<DecayCoefficients> decay;
    std::optional<DecayFit> fit;
    std::optional<EquivalenceEstimate> equivalence;
    int monotone_violations = 0;
};

SimulationOutputs simulate(const LoadedConfig& cfg);

nlohmann::json summary_json(const LoadedConfig& cfg, const SimulationOutputs& out);
std::string trace_csv(const LoadedConfig& cfg, const SimulationOutputs& out);

/// Dispatches on experiment.type (simulate | refine | sweep | verify-kernels |
/// fit) and writes CSV/JSON outputs plus the manifest into out_dir.
RunManifest run_experiment(const LoadedConfig& cfg, const std::filesystem::path& out_dir);

struct KernelVerification {
    int trials = 0;
    int inequality_passes = 0;
    Real min_memory_inequality_slack = 0.0;
    Real max_circle_route_diff = 0.0;
    Real min_identity_order = 0.0;
    bool ok() const;
};

/// Operator property suite on seeded random smooth histories across the three
/// kernel families.
KernelVerification verify_kernels(std::uint64_t seed, int trials);

/// Reads the t and E columns back from a written trace CSV.
std::pair<std::vector<Real>, std::vector<Real>> read_trace_energy(
    const std::filesystem::path& csv_path);

}  // namespace tvt

#endif
