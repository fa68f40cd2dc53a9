#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fas/experiments.hpp"
#include "fas/permanent.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    uint64_t seed = 0;
    long trials = 0;
    std::string out;
    int nt = 0, nr = 0, n = 0;
    double wt = 0.0, wr = 0.0, w = 0.0;
    std::string coupling;
    double k_db = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> snr_db;
    std::vector<int> ports;
    double port_snr_db = std::numeric_limits<double>::quiet_NaN();
    int threads = -1;
    bool no_optimize = false;
    int fixed_m = -1;
    bool iid = false;
    std::vector<int> iid_m;
    std::string coupling_file;
    std::string save_coupling;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file; flags override its fields");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--trials", f.trials, "Monte-Carlo trials per estimate");
    cmd->add_option("--out", f.out, "output CSV path");
    cmd->add_option("--nt", f.nt, "transmit port count");
    cmd->add_option("--nr", f.nr, "receive port count");
    cmd->add_option("-n,--n", f.n, "port count for both sides");
    cmd->add_option("--wt", f.wt, "transmit aperture in wavelengths");
    cmd->add_option("--wr", f.wr, "receive aperture in wavelengths");
    cmd->add_option("-w,--w", f.w, "aperture for both sides");
    cmd->add_option("--coupling", f.coupling,
                    "separable-rayleigh | nonseparable-rayleigh | separable-rician");
    cmd->add_option("--k-db", f.k_db, "Rician K factor in dB");
    cmd->add_option("--snr", f.snr_db, "SNR grid in dB")->delimiter(',');
    cmd->add_option("--ports", f.ports, "port-count grid")->delimiter(',');
    cmd->add_option("--snr-db", f.port_snr_db, "operating SNR for the port sweep");
    cmd->add_option("--threads", f.threads, "worker threads (0 = auto)");
    cmd->add_flag("--no-optimize", f.no_optimize, "skip the power-allocation columns");
    cmd->add_option("--fixed-m", f.fixed_m, "fixed-array element count (0 = 2W+1)");
    cmd->add_flag("--iid", f.iid, "enable i.i.d. baselines");
    cmd->add_option("--iid-m", f.iid_m, "i.i.d. baseline element counts")->delimiter(',');
    cmd->add_option("--coupling-file", f.coupling_file, "load the coupling model from JSON");
    cmd->add_option("--save-coupling", f.save_coupling, "write the coupling model to JSON");
}

fas::ExperimentConfig make_config(fas::ExperimentKind kind, const CLI::App* cmd,
                                  const CommonFlags& f) {
    fas::ExperimentConfig cfg = fas::default_config(kind);
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw std::runtime_error("cannot open config file: " + f.config_path);
        cfg = fas::config_from_json(nlohmann::ordered_json::parse(in));
        cfg.kind = kind;
    }
    if (cmd->count("--seed")) cfg.seed = f.seed;
    if (cmd->count("--trials")) cfg.n_trials = f.trials;
    if (cmd->count("--out")) cfg.output_path = f.out;
    if (cmd->count("--n")) cfg.geometry.nt = cfg.geometry.nr = f.n;
    if (cmd->count("--nt")) cfg.geometry.nt = f.nt;
    if (cmd->count("--nr")) cfg.geometry.nr = f.nr;
    if (cmd->count("--w")) cfg.geometry.wt = cfg.geometry.wr = f.w;
    if (cmd->count("--wt")) cfg.geometry.wt = f.wt;
    if (cmd->count("--wr")) cfg.geometry.wr = f.wr;
    if (cmd->count("--coupling")) cfg.coupling = fas::coupling_kind_from_string(f.coupling);
    if (cmd->count("--k-db")) cfg.k_factor_db = f.k_db;
    if (cmd->count("--snr")) cfg.snr_grid_db = f.snr_db;
    if (cmd->count("--ports")) cfg.port_grid = f.ports;
    if (cmd->count("--snr-db")) cfg.port_sweep_snr_db = f.port_snr_db;
    if (cmd->count("--threads")) cfg.threads = f.threads;
    if (f.no_optimize) cfg.optimize_allocation = false;
    if (cmd->count("--fixed-m")) cfg.baselines.fixed_m = f.fixed_m;
    if (f.iid) cfg.baselines.iid = true;
    if (cmd->count("--iid-m")) {
        cfg.baselines.iid = true;
        cfg.baselines.iid_m = f.iid_m;
    }
    if (cmd->count("--coupling-file")) cfg.coupling_file = f.coupling_file;
    if (cmd->count("--save-coupling")) cfg.save_coupling_file = f.save_coupling;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-side fluid antenna capacity experiments"};
    app.require_subcommand(1);

    struct Sub {
        fas::ExperimentKind kind;
        CLI::App* cmd;
        CommonFlags flags;
    };
    std::vector<Sub> subs;
    subs.push_back({fas::ExperimentKind::SnrSweep,
                    app.add_subcommand("snr-sweep", "capacity curves over an SNR grid"), {}});
    subs.push_back({fas::ExperimentKind::PortSweep,
                    app.add_subcommand("port-sweep", "capacity versus port count"), {}});
    subs.push_back({fas::ExperimentKind::LosCompare,
                    app.add_subcommand("los-compare", "capacity with and without a specular part"),
                    {}});
    subs.push_back({fas::ExperimentKind::Allocate,
                    app.add_subcommand("allocate", "optimize the eigenmode power allocation"), {}});
    subs.push_back({fas::ExperimentKind::Validate,
                    app.add_subcommand("validate", "run the numerical self-check suites"), {}});
    bool inject_ryser_bug = false;
    for (Sub& s : subs) {
        add_common_flags(s.cmd, s.flags);
        if (s.kind == fas::ExperimentKind::Validate)
            s.cmd->add_flag("--inject-ryser-bug", inject_ryser_bug,
                            "perturb the permanent evaluator (negative control)")
                ->group("");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        for (const Sub& s : subs) {
            if (!s.cmd->parsed()) continue;
            if (inject_ryser_bug) fas::testhook::ryser_perturbation = 1e-6;
            const fas::ExperimentConfig cfg = make_config(s.kind, s.cmd, s.flags);
            const int rc = fas::run_experiment(cfg, std::cout);
            if (rc == 0 && !cfg.output_path.empty() &&
                s.kind != fas::ExperimentKind::Validate)
                std::cout << "wrote " << cfg.output_path << "\n";
            return rc;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
