#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fas/allocator.hpp"
#include "fas/capacity.hpp"
#include "fas/channel.hpp"

namespace fas {

enum class ExperimentKind { SnrSweep, PortSweep, LosCompare, Allocate, Validate };

std::string_view to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(std::string_view name);

struct BaselineSpec {
    bool fixed = true;
    int fixed_m = 0;  // element count; 0 picks round(2W+1) for the shared aperture
    bool iid = false;
    std::vector<int> iid_m = {5, 10, 15, 20, 25};

    bool operator==(const BaselineSpec&) const = default;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::SnrSweep;
    PortGeometry geometry{8, 8, 1.0, 1.0};
    CouplingKind coupling = CouplingKind::SeparableRayleigh;
    double k_factor_db = 6.0;  // used by the rician kind and by los-compare
    std::vector<double> snr_grid_db;
    std::vector<int> port_grid;
    double port_sweep_snr_db = 20.0;
    long n_trials = 100000;
    uint64_t seed = 1;
    BaselineSpec baselines;
    bool optimize_allocation = true;
    int threads = 0;  // 0 -> hardware concurrency; results do not depend on it
    std::string output_path;
    std::string coupling_file;       // optional: reuse a serialized coupling model
    std::string save_coupling_file;  // optional: freeze the model used by this run

    bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig default_config(ExperimentKind kind);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::ordered_json& doc);

// Batch runners. Each writes a CSV (schema fixed by the config, one row per
// grid point, first line echoes the config) and throws std::runtime_error on
// I/O failure. Output bytes depend only on the config, not on thread count.
void run_snr_sweep(const ExperimentConfig& cfg);
void run_port_sweep(const ExperimentConfig& cfg);
void run_los_compare(const ExperimentConfig& cfg);
void run_allocate(const ExperimentConfig& cfg);

// Self-check suites (permanent equivalence, transpose identity,
// determinant-expectation identity, gradient finite differences, projection
// optimality, KKT residuals). Prints one pass/fail line per suite; returns 0
// iff everything passed.
int run_validate(const ExperimentConfig& cfg, std::ostream& out);

// Dispatch on cfg.kind; returns a process exit code.
int run_experiment(const ExperimentConfig& cfg, std::ostream& out);

}  // namespace fas
