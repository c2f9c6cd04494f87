#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tvt/harness.hpp"

namespace {

void print_report(const tvt::LoadedConfig& cfg) {
    std::printf("validation report (digest %s):\n", tvt::config_digest(cfg.canonical).c_str());
    for (const auto& line : cfg.report) std::printf("  %s\n", line.c_str());
}

int dispatch(const std::string& config_path, const std::string& out_dir,
             const nlohmann::json& experiment_override) {
    tvt::LoadedConfig cfg = tvt::load_config(config_path);
    for (auto it = experiment_override.begin(); it != experiment_override.end(); ++it)
        cfg.experiment[it.key()] = it.value();
    cfg.canonical["experiment"] = cfg.experiment;
    print_report(cfg);
    const tvt::RunManifest manifest = tvt::run_experiment(cfg, out_dir);
    std::printf("wrote %zu output file(s) under %s\n", manifest.outputs.size(), out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Timoshenko beam with thermo-viscoelastic damping and delayed feedback: "
                 "modal simulation and energy-decay verification"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", trace_path, param, values_csv;
    int levels = 3;
    long long seed = 42;
    int trials = 100;
    double t0 = -1.0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("--config", config_path, "run configuration JSON")->required();
        sub->add_option("--out", out_dir, "output directory");
    };

    CLI::App* sim = app.add_subcommand("simulate", "single trace with functional columns");
    add_common(sim, true);

    CLI::App* refine = app.add_subcommand("refine", "dt and n refinement ladders");
    add_common(refine, true);
    refine->add_option("--levels", levels, "ladder depth");

    CLI::App* sweep = app.add_subcommand("sweep", "grid over one config parameter");
    add_common(sweep, true);
    sweep->add_option("--param", param, "dotted config path, e.g. theorem_inputs.mu2")
        ->required();
    sweep->add_option("--values", values_csv, "comma-separated values")->required();

    CLI::App* verify = app.add_subcommand("verify-kernels", "memory-operator property suite");
    add_common(verify, false);
    verify->add_option("--seed", seed, "PRNG seed");
    verify->add_option("--trials", trials, "number of random histories");

    CLI::App* fit = app.add_subcommand("fit", "refit a decay rate from a trace CSV");
    add_common(fit, false);
    fit->add_option("--config", config_path,
                    "run configuration (defaults to the manifest beside the trace)");
    fit->add_option("--trace", trace_path, "trace.csv produced by simulate")->required();
    fit->add_option("--t0", t0, "burn-in time");

    CLI11_PARSE(app, argc, argv);

    try {
        nlohmann::json override;
        if (sim->parsed()) {
            override["type"] = "simulate";
            return dispatch(config_path, out_dir, override);
        }
        if (refine->parsed()) {
            override["type"] = "refine";
            override["levels"] = levels;
            return dispatch(config_path, out_dir, override);
        }
        if (sweep->parsed()) {
            override["type"] = "sweep";
            override["param"] = param;
            nlohmann::json vals = nlohmann::json::array();
            std::stringstream ss(values_csv);
            std::string cell;
            while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
            override["values"] = vals;
            return dispatch(config_path, out_dir, override);
        }
        if (verify->parsed()) {
            // self-contained: no config file needed
            nlohmann::json doc;
            doc["kernel"] = {{"family", "exponential"}, {"g0", 1.0}, {"rate", 2.0}};
            doc["theorem_inputs"] = {{"rho1", 1.0}, {"rho2", 1.0}, {"rho3", 1.0}, {"K", 1.0},
                                     {"b", 2.0},    {"delta", 2.0}, {"mu1", 2.0}, {"mu2", 1.0},
                                     {"tau", 0.5}};
            doc["sim"] = {{"n", 4}, {"dt", 1e-3}, {"t_end", 0.0}};
            doc["experiment"] = {{"type", "verify-kernels"},
                                 {"seed", seed},
                                 {"trials", trials}};
            tvt::LoadedConfig cfg = tvt::load_config_json(doc);
            const tvt::RunManifest manifest = tvt::run_experiment(cfg, out_dir);
            std::printf("wrote %zu output file(s) under %s\n", manifest.outputs.size(),
                        out_dir.c_str());
            return 0;
        }
        if (fit->parsed()) {
            override["type"] = "fit";
            override["trace"] = trace_path;
            if (t0 >= 0.0) override["t0"] = t0;
            if (!config_path.empty()) return dispatch(config_path, out_dir, override);

            // recover the producing config from the manifest beside the trace
            const auto manifest_path =
                std::filesystem::path(trace_path).parent_path() / "manifest.json";
            std::ifstream in(manifest_path);
            if (!in) {
                std::fprintf(stderr, "error: no --config given and %s not found\n",
                             manifest_path.string().c_str());
                return 1;
            }
            nlohmann::json manifest;
            in >> manifest;
            nlohmann::json doc = manifest.at("config");
            for (auto it = override.begin(); it != override.end(); ++it)
                doc["experiment"][it.key()] = it.value();
            tvt::LoadedConfig cfg =
                tvt::load_config_json(doc, std::filesystem::path(trace_path).parent_path());
            print_report(cfg);
            const tvt::RunManifest manifest_out = tvt::run_experiment(cfg, out_dir);
            std::printf("wrote %zu output file(s) under %s\n", manifest_out.outputs.size(),
                        out_dir.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
