#include "fas/experiments.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fas/permanent.hpp"

namespace fas {

namespace {

// Stream-id layout: grid point k owns block (k + 1) * kStreamsPerPoint; block
// 0 is reserved for work shared across the grid (model fitting, baselines).
constexpr uint64_t kStreamsPerPoint = 64;
constexpr uint64_t kSharedModelStream = 1;
constexpr uint64_t kSharedModelStreamB = 2;
constexpr uint64_t kPointModelSlot = 32;

enum PointSlot : uint64_t {
    kSlotFullEq = 0,
    kSlotFullOpt = 1,
    kSlotSel = 2,
    kSlotFixed = 4,
    kSlotIid = 8,       // + index into iid_m
    kSlotAltOffset = 24  // second model variant in los-compare
};

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// The echoed config omits the worker count: thread scheduling never changes
// the numbers, so byte-identical output should not depend on it either.
std::string config_echo(const ExperimentConfig& cfg) {
    ExperimentConfig canon = cfg;
    canon.threads = 0;
    return config_to_json(canon).dump();
}

void write_csv(const std::string& path, const std::string& config_echo,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    if (path.empty()) throw std::runtime_error("no output path configured");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    f << "# config " << config_echo << "\n";
    for (size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
    f << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << format_double(row[i]);
        f << "\n";
    }
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + path);
}

void parallel_grid(int n, int threads, const std::function<void(int)>& body) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            try {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct FasModel {
    EigenBasis basis;
    CouplingModel model;
};

FasModel build_fas_model(const PortGeometry& geom, CouplingKind kind, double k_db, uint64_t seed,
                         uint64_t stream) {
    FasModel out;
    out.basis = build_eigenbasis(build_correlation(geom));
    std::optional<double> k;
    if (kind == CouplingKind::SeparableRician) k = k_db;
    RngStream rng(seed, stream);
    out.model = build_coupling(out.basis, kind, k, &rng);
    return out;
}

EigenBasis identity_basis(int n) {
    EigenBasis b;
    b.ut = ComplexMatrix::identity(n);
    b.ur = ComplexMatrix::identity(n);
    b.lambda_t.assign(n, 1.0);
    b.lambda_r.assign(n, 1.0);
    b.pi_t.assign(n, 1.0 / double(n));
    b.pi_r.assign(n, 1.0 / double(n));
    return b;
}

// i.i.d. M x M arrays on both sides. The optional LOS component is the
// classic broadside rank-one steering matrix, splitting each entry's unit
// power K : 1 between specular and diffuse parts. Such a model is only used
// for Monte-Carlo baselines (its mean matrix is deliberately rank one, so the
// permanent bound does not apply to it).
FasModel build_iid_model(int m, std::optional<double> k_db) {
    FasModel out;
    out.basis = identity_basis(m);
    out.model.d = ComplexMatrix(m, m);
    out.model.m = RealMatrix(m, m, 1.0);
    out.model.omega = RealMatrix(m, m, 1.0);
    if (k_db) {
        const double k = std::pow(10.0, *k_db / 10.0);
        const double spec = std::sqrt(k / (1.0 + k));
        const double diff = std::sqrt(1.0 / (1.0 + k));
        for (cxd& e : out.model.d.a) e = spec;
        for (double& e : out.model.m.a) e = diff;
    }
    return out;
}

// Conventional arrays at half-wavelength spacing under the same correlation
// kernel; that spacing lands on the kernel's zeros, so the marginal
// correlations are identity and the eigen domain coincides with the port
// domain. The LOS variant maps the port-domain steering matrix through the
// eigenvector bases.
FasModel build_fixed_model(int m, std::optional<double> k_db) {
    if (m < 2) return build_iid_model(std::max(1, m), k_db);
    PortGeometry geom{m, m, 0.5 * (m - 1), 0.5 * (m - 1)};
    FasModel out;
    out.basis = build_eigenbasis(build_correlation(geom));
    out.model = build_coupling(out.basis, CouplingKind::SeparableRayleigh);
    if (k_db) {
        const double k = std::pow(10.0, *k_db / 10.0);
        ComplexMatrix steering(m, m);
        for (cxd& e : steering.a) e = std::sqrt(k / (1.0 + k));
        out.model.d = multiply(adjoint(out.basis.ur), multiply(steering, out.basis.ut));
        const double diffuse_scale = 1.0 / (1.0 + k);
        for (double& e : out.model.omega.a) e *= diffuse_scale;
        out.model.m = out.model.omega;
        for (double& e : out.model.m.a) e = std::sqrt(e);
        const RealMatrix spec = abs2(out.model.d);
        for (size_t i = 0; i < out.model.omega.a.size(); ++i)
            out.model.omega.a[i] += spec.a[i];
    }
    return out;
}

int resolve_fixed_m(const ExperimentConfig& cfg) {
    if (cfg.baselines.fixed_m > 0) return cfg.baselines.fixed_m;
    const double w = std::max(cfg.geometry.wt, cfg.geometry.wr);
    return std::max(1, static_cast<int>(std::lround(2.0 * w + 1.0)));
}

void require_grid(const ExperimentConfig& cfg, bool ports) {
    if (cfg.n_trials < 1) throw std::invalid_argument("config: n_trials must be >= 1");
    if (ports) {
        if (cfg.port_grid.empty()) throw std::invalid_argument("config: empty port grid");
    } else if (cfg.snr_grid_db.empty()) {
        throw std::invalid_argument("config: empty SNR grid");
    }
}

void maybe_save_coupling(const ExperimentConfig& cfg, const CouplingModel& model) {
    if (cfg.save_coupling_file.empty()) return;
    std::ofstream f(cfg.save_coupling_file, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open coupling output: " + cfg.save_coupling_file);
    f << coupling_to_json(model).dump(2) << "\n";
    if (!f) throw std::runtime_error("write failed: " + cfg.save_coupling_file);
}

FasModel load_or_build_fas(const ExperimentConfig& cfg, uint64_t stream) {
    if (!cfg.coupling_file.empty()) {
        std::ifstream f(cfg.coupling_file);
        if (!f) throw std::runtime_error("cannot open coupling file: " + cfg.coupling_file);
        nlohmann::ordered_json doc = nlohmann::ordered_json::parse(f);
        FasModel out;
        out.model = coupling_from_json(doc);
        out.basis = build_eigenbasis(build_correlation(cfg.geometry));
        if (out.model.nr() != cfg.geometry.nr || out.model.nt() != cfg.geometry.nt)
            throw std::invalid_argument("coupling file does not match the configured geometry");
        maybe_save_coupling(cfg, out.model);
        return out;
    }
    FasModel out = build_fas_model(cfg.geometry, cfg.coupling, cfg.k_factor_db, cfg.seed, stream);
    maybe_save_coupling(cfg, out.model);
    return out;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::SnrSweep: return "snr-sweep";
        case ExperimentKind::PortSweep: return "port-sweep";
        case ExperimentKind::LosCompare: return "los-compare";
        case ExperimentKind::Allocate: return "allocate";
        case ExperimentKind::Validate: return "validate";
    }
    throw std::invalid_argument("unknown ExperimentKind");
}

ExperimentKind experiment_kind_from_string(std::string_view name) {
    if (name == "snr-sweep") return ExperimentKind::SnrSweep;
    if (name == "port-sweep") return ExperimentKind::PortSweep;
    if (name == "los-compare") return ExperimentKind::LosCompare;
    if (name == "allocate") return ExperimentKind::Allocate;
    if (name == "validate") return ExperimentKind::Validate;
    throw std::invalid_argument("unknown experiment kind: " + std::string(name));
}

ExperimentConfig default_config(ExperimentKind kind) {
    ExperimentConfig cfg;
    cfg.kind = kind;
    switch (kind) {
        case ExperimentKind::SnrSweep:
            for (int db = -10; db <= 30; db += 2) cfg.snr_grid_db.push_back(db);
            break;
        case ExperimentKind::PortSweep:
            cfg.port_grid = {2, 4, 6, 8, 10, 12, 14, 16};
            cfg.baselines.iid = true;
            break;
        case ExperimentKind::LosCompare:
            for (int db = -10; db <= 30; db += 5) cfg.snr_grid_db.push_back(db);
            cfg.baselines.iid = true;
            cfg.baselines.iid_m = {5};
            break;
        case ExperimentKind::Allocate:
            cfg.snr_grid_db = {10.0};
            break;
        case ExperimentKind::Validate:
            cfg.n_trials = 200000;
            break;
    }
    return cfg;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json doc;
    doc["kind"] = std::string(to_string(cfg.kind));
    doc["geometry"] = {{"nt", cfg.geometry.nt},
                       {"nr", cfg.geometry.nr},
                       {"wt", cfg.geometry.wt},
                       {"wr", cfg.geometry.wr}};
    doc["coupling"] = std::string(to_string(cfg.coupling));
    doc["k_factor_db"] = cfg.k_factor_db;
    doc["snr_grid_db"] = cfg.snr_grid_db;
    doc["port_grid"] = cfg.port_grid;
    doc["port_sweep_snr_db"] = cfg.port_sweep_snr_db;
    doc["n_trials"] = cfg.n_trials;
    doc["seed"] = cfg.seed;
    doc["baselines"] = {{"fixed", cfg.baselines.fixed},
                        {"fixed_m", cfg.baselines.fixed_m},
                        {"iid", cfg.baselines.iid},
                        {"iid_m", cfg.baselines.iid_m}};
    doc["optimize_allocation"] = cfg.optimize_allocation;
    doc["threads"] = cfg.threads;
    doc["output_path"] = cfg.output_path;
    doc["coupling_file"] = cfg.coupling_file;
    doc["save_coupling_file"] = cfg.save_coupling_file;
    return doc;
}

ExperimentConfig config_from_json(const nlohmann::ordered_json& doc) {
    ExperimentConfig cfg = default_config(
        experiment_kind_from_string(doc.at("kind").get<std::string>()));
    if (doc.contains("geometry")) {
        const auto& g = doc.at("geometry");
        if (g.contains("nt")) cfg.geometry.nt = g.at("nt").get<int>();
        if (g.contains("nr")) cfg.geometry.nr = g.at("nr").get<int>();
        if (g.contains("wt")) cfg.geometry.wt = g.at("wt").get<double>();
        if (g.contains("wr")) cfg.geometry.wr = g.at("wr").get<double>();
    }
    if (doc.contains("coupling"))
        cfg.coupling = coupling_kind_from_string(doc.at("coupling").get<std::string>());
    if (doc.contains("k_factor_db")) cfg.k_factor_db = doc.at("k_factor_db").get<double>();
    if (doc.contains("snr_grid_db"))
        cfg.snr_grid_db = doc.at("snr_grid_db").get<std::vector<double>>();
    if (doc.contains("port_grid")) cfg.port_grid = doc.at("port_grid").get<std::vector<int>>();
    if (doc.contains("port_sweep_snr_db"))
        cfg.port_sweep_snr_db = doc.at("port_sweep_snr_db").get<double>();
    if (doc.contains("n_trials")) cfg.n_trials = doc.at("n_trials").get<long>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<uint64_t>();
    if (doc.contains("baselines")) {
        const auto& b = doc.at("baselines");
        if (b.contains("fixed")) cfg.baselines.fixed = b.at("fixed").get<bool>();
        if (b.contains("fixed_m")) cfg.baselines.fixed_m = b.at("fixed_m").get<int>();
        if (b.contains("iid")) cfg.baselines.iid = b.at("iid").get<bool>();
        if (b.contains("iid_m")) cfg.baselines.iid_m = b.at("iid_m").get<std::vector<int>>();
    }
    if (doc.contains("optimize_allocation"))
        cfg.optimize_allocation = doc.at("optimize_allocation").get<bool>();
    if (doc.contains("threads")) cfg.threads = doc.at("threads").get<int>();
    if (doc.contains("output_path")) cfg.output_path = doc.at("output_path").get<std::string>();
    if (doc.contains("coupling_file"))
        cfg.coupling_file = doc.at("coupling_file").get<std::string>();
    if (doc.contains("save_coupling_file"))
        cfg.save_coupling_file = doc.at("save_coupling_file").get<std::string>();
    return cfg;
}

void run_snr_sweep(const ExperimentConfig& cfg) {
    require_grid(cfg, false);
    const FasModel fas = load_or_build_fas(cfg, kSharedModelStream);
    const int nt = fas.model.nt();
    const PowerAllocation eq = PowerAllocation::equal(nt);
    const int fixed_m = resolve_fixed_m(cfg);
    const FasModel fixed = build_fixed_model(fixed_m, std::nullopt);
    std::vector<FasModel> iid;
    if (cfg.baselines.iid)
        for (int m : cfg.baselines.iid_m) iid.push_back(build_iid_model(m, std::nullopt));

    std::vector<std::string> header = {"snr_db", "c_full_eq", "c_full_eq_se"};
    if (cfg.optimize_allocation) {
        header.push_back("c_full_opt");
        header.push_back("c_full_opt_se");
    }
    header.push_back("c_sel");
    header.push_back("c_sel_se");
    header.push_back("c_upper_eq");
    if (cfg.optimize_allocation) header.push_back("c_upper_opt");
    if (cfg.baselines.fixed) {
        header.push_back("c_fixed_m" + std::to_string(fixed_m));
        header.push_back("c_fixed_m" + std::to_string(fixed_m) + "_se");
    }
    if (cfg.baselines.iid)
        for (int m : cfg.baselines.iid_m) {
            header.push_back("c_iid_m" + std::to_string(m));
            header.push_back("c_iid_m" + std::to_string(m) + "_se");
        }

    const int n = static_cast<int>(cfg.snr_grid_db.size());
    std::vector<std::vector<double>> rows(n);
    parallel_grid(n, cfg.threads, [&](int k) {
        const double db = cfg.snr_grid_db[k];
        const uint64_t base = uint64_t(k + 1) * kStreamsPerPoint;
        const SnrSpec snr = SnrSpec::from_db(db, nt);
        std::vector<double>& row = rows[k];
        row.push_back(db);

        RngStream r_full(cfg.seed, base + kSlotFullEq);
        const CapacityEstimate full_eq = mc_full_capacity(fas.model, eq, snr, cfg.n_trials, r_full);
        row.push_back(full_eq.mean_bits);
        row.push_back(full_eq.std_error);

        PowerAllocation opt_alloc = eq;
        if (cfg.optimize_allocation) {
            const OptimizeResult opt = optimize(fas.model.omega, snr);
            opt_alloc = opt.allocation;
            RngStream r_opt(cfg.seed, base + kSlotFullOpt);
            const CapacityEstimate full_opt =
                mc_full_capacity(fas.model, opt_alloc, snr, cfg.n_trials, r_opt);
            row.push_back(full_opt.mean_bits);
            row.push_back(full_opt.std_error);
        }

        RngStream r_sel(cfg.seed, base + kSlotSel);
        const CapacityEstimate sel =
            mc_selection_capacity(fas.model, fas.basis, snr, cfg.n_trials, r_sel);
        row.push_back(sel.mean_bits);
        row.push_back(sel.std_error);

        row.push_back(upper_bound(fas.model, eq, snr));
        if (cfg.optimize_allocation) row.push_back(upper_bound(fas.model, opt_alloc, snr));

        if (cfg.baselines.fixed) {
            RngStream r_fixed(cfg.seed, base + kSlotFixed);
            const SnrSpec snr_fixed = SnrSpec::from_db(db, fixed.model.nt());
            const CapacityEstimate cf = mc_full_capacity(
                fixed.model, PowerAllocation::equal(fixed.model.nt()), snr_fixed, cfg.n_trials,
                r_fixed);
            row.push_back(cf.mean_bits);
            row.push_back(cf.std_error);
        }
        for (size_t j = 0; j < iid.size(); ++j) {
            RngStream r_iid(cfg.seed, base + kSlotIid + j);
            const int m = iid[j].model.nt();
            const CapacityEstimate ci = mc_full_capacity(
                iid[j].model, PowerAllocation::equal(m), SnrSpec::from_db(db, m), cfg.n_trials,
                r_iid);
            row.push_back(ci.mean_bits);
            row.push_back(ci.std_error);
        }
    });
    write_csv(cfg.output_path, config_echo(cfg), header, rows);
}

void run_port_sweep(const ExperimentConfig& cfg) {
    require_grid(cfg, true);
    const double db = cfg.port_sweep_snr_db;
    const int fixed_m = resolve_fixed_m(cfg);

    // Baselines do not depend on the swept port count; evaluate them once.
    std::vector<double> shared;
    std::vector<std::string> shared_header;
    if (cfg.baselines.fixed) {
        const FasModel fixed = build_fixed_model(fixed_m, std::nullopt);
        RngStream r(cfg.seed, kSlotFixed);
        const CapacityEstimate cf =
            mc_full_capacity(fixed.model, PowerAllocation::equal(fixed.model.nt()),
                             SnrSpec::from_db(db, fixed.model.nt()), cfg.n_trials, r);
        shared_header.push_back("c_fixed_m" + std::to_string(fixed_m));
        shared_header.push_back("c_fixed_m" + std::to_string(fixed_m) + "_se");
        shared.push_back(cf.mean_bits);
        shared.push_back(cf.std_error);
    }
    if (cfg.baselines.iid)
        for (size_t j = 0; j < cfg.baselines.iid_m.size(); ++j) {
            const int m = cfg.baselines.iid_m[j];
            const FasModel iid = build_iid_model(m, std::nullopt);
            RngStream r(cfg.seed, kSlotIid + j);
            const CapacityEstimate ci =
                mc_full_capacity(iid.model, PowerAllocation::equal(m), SnrSpec::from_db(db, m),
                                 cfg.n_trials, r);
            shared_header.push_back("c_iid_m" + std::to_string(m));
            shared_header.push_back("c_iid_m" + std::to_string(m) + "_se");
            shared.push_back(ci.mean_bits);
            shared.push_back(ci.std_error);
        }

    std::vector<std::string> header = {"n_ports", "c_full_eq", "c_full_eq_se"};
    if (cfg.optimize_allocation) {
        header.push_back("c_full_opt");
        header.push_back("c_full_opt_se");
    }
    header.insert(header.end(), {"c_sel", "c_sel_se", "c_upper_eq"});
    if (cfg.optimize_allocation) header.push_back("c_upper_opt");
    header.insert(header.end(), shared_header.begin(), shared_header.end());

    const int n = static_cast<int>(cfg.port_grid.size());
    std::vector<std::vector<double>> rows(n);
    parallel_grid(n, cfg.threads, [&](int k) {
        const int ports = cfg.port_grid[k];
        const uint64_t base = uint64_t(k + 1) * kStreamsPerPoint;
        PortGeometry geom = cfg.geometry;
        geom.nt = ports;
        geom.nr = ports;
        const FasModel fas =
            build_fas_model(geom, cfg.coupling, cfg.k_factor_db, cfg.seed, base + kPointModelSlot);
        const SnrSpec snr = SnrSpec::from_db(db, ports);
        const PowerAllocation eq = PowerAllocation::equal(ports);

        std::vector<double>& row = rows[k];
        row.push_back(ports);

        RngStream r_full(cfg.seed, base + kSlotFullEq);
        const CapacityEstimate full_eq = mc_full_capacity(fas.model, eq, snr, cfg.n_trials, r_full);
        row.push_back(full_eq.mean_bits);
        row.push_back(full_eq.std_error);

        PowerAllocation opt_alloc = eq;
        if (cfg.optimize_allocation) {
            const OptimizeResult opt = optimize(fas.model.omega, snr);
            opt_alloc = opt.allocation;
            RngStream r_opt(cfg.seed, base + kSlotFullOpt);
            const CapacityEstimate full_opt =
                mc_full_capacity(fas.model, opt_alloc, snr, cfg.n_trials, r_opt);
            row.push_back(full_opt.mean_bits);
            row.push_back(full_opt.std_error);
        }

        RngStream r_sel(cfg.seed, base + kSlotSel);
        const CapacityEstimate sel =
            mc_selection_capacity(fas.model, fas.basis, snr, cfg.n_trials, r_sel);
        row.push_back(sel.mean_bits);
        row.push_back(sel.std_error);
        row.push_back(upper_bound(fas.model, eq, snr));
        if (cfg.optimize_allocation) row.push_back(upper_bound(fas.model, opt_alloc, snr));
        row.insert(row.end(), shared.begin(), shared.end());
    });
    write_csv(cfg.output_path, config_echo(cfg), header, rows);
}

void run_los_compare(const ExperimentConfig& cfg) {
    require_grid(cfg, false);
    const int nt = cfg.geometry.nt;
    const PowerAllocation eq = PowerAllocation::equal(nt);
    const FasModel ray = build_fas_model(cfg.geometry, CouplingKind::SeparableRayleigh,
                                         cfg.k_factor_db, cfg.seed, kSharedModelStream);
    const FasModel ric = build_fas_model(cfg.geometry, CouplingKind::SeparableRician,
                                         cfg.k_factor_db, cfg.seed, kSharedModelStreamB);
    const int fixed_m = resolve_fixed_m(cfg);
    const FasModel fixed_ray = build_fixed_model(fixed_m, std::nullopt);
    const FasModel fixed_ric = build_fixed_model(fixed_m, cfg.k_factor_db);
    std::vector<FasModel> iid_ray, iid_ric;
    if (cfg.baselines.iid)
        for (int m : cfg.baselines.iid_m) {
            iid_ray.push_back(build_iid_model(m, std::nullopt));
            iid_ric.push_back(build_iid_model(m, cfg.k_factor_db));
        }

    std::vector<std::string> header = {"snr_db",
                                       "c_full_rayleigh", "c_full_rayleigh_se",
                                       "c_full_rician", "c_full_rician_se",
                                       "c_sel_rayleigh", "c_sel_rayleigh_se",
                                       "c_sel_rician", "c_sel_rician_se",
                                       "c_upper_rayleigh", "c_upper_rician"};
    if (cfg.baselines.fixed)
        header.insert(header.end(), {"c_fixed_rayleigh", "c_fixed_rayleigh_se",
                                     "c_fixed_rician", "c_fixed_rician_se"});
    if (cfg.baselines.iid)
        for (int m : cfg.baselines.iid_m) {
            const std::string tag = "m" + std::to_string(m);
            header.insert(header.end(),
                          {"c_iid_" + tag + "_rayleigh", "c_iid_" + tag + "_rayleigh_se",
                           "c_iid_" + tag + "_rician", "c_iid_" + tag + "_rician_se"});
        }

    const int n = static_cast<int>(cfg.snr_grid_db.size());
    std::vector<std::vector<double>> rows(n);
    parallel_grid(n, cfg.threads, [&](int k) {
        const double db = cfg.snr_grid_db[k];
        const uint64_t base = uint64_t(k + 1) * kStreamsPerPoint;
        const SnrSpec snr = SnrSpec::from_db(db, nt);
        std::vector<double>& row = rows[k];
        row.push_back(db);

        auto mc_pair = [&](const FasModel& a, const FasModel& b, uint64_t slot, bool selection) {
            for (int which = 0; which < 2; ++which) {
                const FasModel& fm = which == 0 ? a : b;
                RngStream r(cfg.seed, base + slot + which * kSlotAltOffset);
                const CapacityEstimate est =
                    selection
                        ? mc_selection_capacity(fm.model, fm.basis, snr, cfg.n_trials, r)
                        : mc_full_capacity(fm.model, PowerAllocation::equal(fm.model.nt()),
                                           SnrSpec::from_db(db, fm.model.nt()), cfg.n_trials, r);
                row.push_back(est.mean_bits);
                row.push_back(est.std_error);
            }
        };

        mc_pair(ray, ric, kSlotFullEq, false);
        mc_pair(ray, ric, kSlotSel, true);
        row.push_back(upper_bound(ray.model, eq, snr));
        row.push_back(upper_bound(ric.model, eq, snr));
        if (cfg.baselines.fixed) mc_pair(fixed_ray, fixed_ric, kSlotFixed, false);
        for (size_t j = 0; j < iid_ray.size(); ++j)
            mc_pair(iid_ray[j], iid_ric[j], kSlotIid + j, false);
    });
    write_csv(cfg.output_path, config_echo(cfg), header, rows);
}

void run_allocate(const ExperimentConfig& cfg) {
    require_grid(cfg, false);
    const FasModel fas = load_or_build_fas(cfg, kSharedModelStream);
    const int nt = fas.model.nt();

    if (cfg.output_path.empty()) throw std::runtime_error("no output path configured");
    std::ofstream f(cfg.output_path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open output file: " + cfg.output_path);
    f << "# config " << config_echo(cfg) << "\n";
    f << "snr_db,mode,lambda,marginal_utility\n";
    for (double db : cfg.snr_grid_db) {
        const SnrSpec snr = SnrSpec::from_db(db, nt);
        const OptimizeResult res = optimize(fas.model.omega, snr);
        const std::vector<double> g =
            gradient(fas.model.omega, res.allocation.lambda, snr.gamma);
        f << "# snr_db=" << format_double(db)
          << " objective_bits=" << format_double(res.objective_trace.back())
          << " mu=" << format_double(res.kkt.mu)
          << " max_violation=" << format_double(res.kkt.max_violation)
          << " iterations=" << res.iterations << " converged=" << (res.converged ? 1 : 0)
          << "\n";
        for (int i = 0; i < nt; ++i)
            f << format_double(db) << "," << i << "," << format_double(res.allocation.lambda[i])
              << "," << format_double(g[i]) << "\n";
    }
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + cfg.output_path);
}

namespace {

RealMatrix random_nonneg(RngStream& rng, int rows, int cols, double lo = 0.05, double hi = 1.5) {
    RealMatrix m(rows, cols);
    for (double& v : m.a) v = lo + (hi - lo) * rng.uniform01();
    return m;
}

bool suite_permanent_equivalence(uint64_t seed, std::string& detail) {
    RngStream rng(seed, 1001);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 7;
        const RealMatrix a = random_nonneg(rng, n, n);
        const double exact = permanent_exact(a);
        const double ryser = permanent_ryser(a);
        worst = std::max(worst, std::abs(ryser - exact) / std::max(1.0, std::abs(exact)));
    }
    std::ostringstream os;
    os << "200 matrices n in 1..7, worst relative error " << worst;
    detail = os.str();
    return worst <= 1e-12;
}

bool suite_transpose_identity(uint64_t seed, std::string& detail) {
    RngStream rng(seed, 1002);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int rows = 1 + static_cast<int>(rng.next_u64() % 5);
        const int cols = 1 + static_cast<int>(rng.next_u64() % 7);
        const RealMatrix a = random_nonneg(rng, rows, cols);
        RealMatrix t(cols, rows);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) t(c, r) = a(r, c);
        const double va = extended_permanent(a);
        const double vt = extended_permanent(t);
        worst = std::max(worst, std::abs(va - vt) / std::max(1.0, std::abs(va)));
    }
    std::ostringstream os;
    os << "100 rectangular matrices, worst relative error " << worst;
    detail = os.str();
    return worst <= 1e-10;
}

bool suite_det_expectation(uint64_t seed, long n_trials, std::string& detail) {
    double worst_sigma = 0.0;
    for (int c = 0; c < 3; ++c) {
        RngStream setup(seed, 1100 + c);
        const int nr = 2 + c % 2, nt = 2 + (c + 1) % 2;
        CouplingModel model;
        model.d = ComplexMatrix(nr, nt);
        model.m = random_nonneg(setup, nr, nt, 0.3, 1.2);
        if (c == 2) model.d(nr - 1, 0) = 0.8;  // one specular entry
        model.omega = RealMatrix(nr, nt);
        for (int r = 0; r < nr; ++r)
            for (int i = 0; i < nt; ++i)
                model.omega(r, i) = std::norm(model.d(r, i)) + model.m(r, i) * model.m(r, i);
        std::vector<double> lam(nt, 0.0);
        double s = 0.0;
        for (double& v : lam) s += (v = 0.25 + setup.uniform01());
        for (double& v : lam) v *= double(nt) / s;
        const SnrSpec snr = SnrSpec::from_linear(0.4 * double(nt), nt);  // gamma = 0.4
        RngStream mc(seed, 1200 + c);
        const CapacityEstimate est =
            mc_det_expectation(model, PowerAllocation{lam}, snr, n_trials, mc);
        const double analytic = upper_bound(model, PowerAllocation{lam}, snr);
        const double sigma =
            std::abs(est.mean_bits - std::exp2(analytic)) / std::max(est.std_error, 1e-300);
        worst_sigma = std::max(worst_sigma, sigma);
    }
    std::ostringstream os;
    os << "3 models, worst deviation " << worst_sigma << " standard errors";
    detail = os.str();
    return worst_sigma <= 3.5;
}

bool suite_gradient_fd(uint64_t seed, std::string& detail) {
    RngStream rng(seed, 1300);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int nr = 2 + static_cast<int>(rng.next_u64() % 3);
        const int nt = 2 + static_cast<int>(rng.next_u64() % 3);
        const RealMatrix omega = random_nonneg(rng, nr, nt, 0.2, 1.5);
        std::vector<double> lam(nt);
        double s = 0.0;
        for (double& v : lam) s += (v = 0.3 + rng.uniform01());
        for (double& v : lam) v *= double(nt) / s;
        const double gamma = 0.2 + 2.0 * rng.uniform01();
        const std::vector<double> g = gradient(omega, lam, gamma);
        for (int i = 0; i < nt; ++i) {
            const double h = 1e-5;
            auto obj = [&](double li) {
                RealMatrix arg(nr, nt);
                for (int r = 0; r < nr; ++r)
                    for (int c = 0; c < nt; ++c)
                        arg(r, c) = gamma * omega(r, c) * (c == i ? li : lam[c]);
                return extended_permanent_log2(arg);
            };
            const double fd = (obj(lam[i] + h) - obj(lam[i] - h)) / (2.0 * h);
            worst = std::max(worst, std::abs(g[i] - fd) / std::max(std::abs(fd), 1e-12));
        }
    }
    std::ostringstream os;
    os << "10 random points, worst per-component relative error " << worst;
    detail = os.str();
    return worst <= 1e-6;
}

bool suite_projection(uint64_t seed, std::string& detail) {
    RngStream rng(seed, 1400);
    const std::vector<double> hand = project_simplex(std::vector<double>{3.0, 1.0}, 2.0);
    if (std::abs(hand[0] - 2.0) > 1e-12 || std::abs(hand[1]) > 1e-12) {
        detail = "hand-worked 2-point case failed";
        return false;
    }
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 5);
        const double budget = double(n);
        std::vector<double> z(n);
        for (double& v : z) v = -2.0 + 6.0 * rng.uniform01();
        const std::vector<double> p = project_simplex(z, budget);
        double sum = 0.0, dz = 0.0;
        for (int i = 0; i < n; ++i) {
            sum += p[i];
            dz += (z[i] - p[i]) * (z[i] - p[i]);
        }
        if (std::abs(sum - budget) > 1e-9) {
            detail = "projection left the simplex";
            return false;
        }
        for (int y = 0; y < 100; ++y) {
            std::vector<double> q(n);
            double qs = 0.0;
            for (double& v : q) qs += (v = rng.uniform01());
            double dq = 0.0;
            for (int i = 0; i < n; ++i) {
                const double qi = q[i] * budget / qs;
                dq += (z[i] - qi) * (z[i] - qi);
            }
            worst = std::max(worst, dz - dq);
        }
    }
    std::ostringstream os;
    os << "100 projections vs 100 feasible points each, worst margin " << worst;
    detail = os.str();
    return worst <= 1e-9;
}

bool suite_kkt(uint64_t seed, std::string& detail) {
    RngStream rng(seed, 1500);
    // symmetric coupling: equal power is stationary
    RealMatrix sym(3, 4);
    for (int r = 0; r < 3; ++r) {
        const double v = 0.4 + rng.uniform01();
        for (int c = 0; c < 4; ++c) sym(r, c) = v;
    }
    const OptimizeResult sym_res = optimize(sym, SnrSpec::from_db(10.0, 4));
    for (double v : sym_res.allocation.lambda)
        if (std::abs(v - 1.0) > 1e-6) {
            detail = "transmit-symmetric coupling did not return equal power";
            return false;
        }
    // random coupling: the returned point must satisfy the residual bound
    double worst = sym_res.kkt.max_violation;
    for (int trial = 0; trial < 2; ++trial) {
        const RealMatrix omega = random_nonneg(rng, 4, 4, 0.1, 2.0);
        const OptimizeResult res = optimize(omega, SnrSpec::from_db(10.0, 4));
        worst = std::max(worst, res.kkt.max_violation);
    }
    std::ostringstream os;
    os << "3 optimizer runs, worst stationarity residual " << worst;
    detail = os.str();
    return worst <= 1e-5;
}

}  // namespace

int run_validate(const ExperimentConfig& cfg, std::ostream& out) {
    using Clock = std::chrono::steady_clock;
    struct Suite {
        const char* name;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Suite> suites = {
        {"permanent-equivalence",
         [&](std::string& d) { return suite_permanent_equivalence(cfg.seed, d); }},
        {"transpose-identity",
         [&](std::string& d) { return suite_transpose_identity(cfg.seed, d); }},
        {"determinant-expectation",
         [&](std::string& d) { return suite_det_expectation(cfg.seed, cfg.n_trials, d); }},
        {"gradient-finite-differences",
         [&](std::string& d) { return suite_gradient_fd(cfg.seed, d); }},
        {"projection-optimality", [&](std::string& d) { return suite_projection(cfg.seed, d); }},
        {"kkt-residuals", [&](std::string& d) { return suite_kkt(cfg.seed, d); }},
    };
    bool all_ok = true;
    for (const Suite& s : suites) {
        const auto t0 = Clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = s.fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        out << (ok ? "[PASS] " : "[FAIL] ") << s.name << ": " << detail << " ("
            << format_double(secs) << " s)\n";
        all_ok = all_ok && ok;
    }
    return all_ok ? 0 : 1;
}

int run_experiment(const ExperimentConfig& cfg, std::ostream& out) {
    switch (cfg.kind) {
        case ExperimentKind::SnrSweep: run_snr_sweep(cfg); return 0;
        case ExperimentKind::PortSweep: run_port_sweep(cfg); return 0;
        case ExperimentKind::LosCompare: run_los_compare(cfg); return 0;
        case ExperimentKind::Allocate: run_allocate(cfg); return 0;
        case ExperimentKind::Validate: return run_validate(cfg, out);
    }
    throw std::invalid_argument("unknown experiment kind");
}

}  // namespace fas
