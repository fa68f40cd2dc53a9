// End-to-end acceptance suite: one pass/fail line per criterion, nonzero exit
// if anything fails. Heavier than the unit tests (full Monte-Carlo budgets);
// expect a few minutes total.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fas/allocator.hpp"
#include "fas/capacity.hpp"
#include "fas/channel.hpp"
#include "fas/experiments.hpp"
#include "fas/permanent.hpp"

#include "csv_helpers.hpp"
#include "oracle_helpers.hpp"

using namespace fas;

namespace {

constexpr uint64_t kSeed = 20240601;

std::string tmp(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

CouplingModel scatter_model(RngStream& rng, int nr, int nt, bool single_specular) {
    CouplingModel m;
    m.d = ComplexMatrix(nr, nt);
    m.m = oracle::random_nonneg(rng, nr, nt, 0.25, 1.25);
    if (single_specular) {
        const int r = static_cast<int>(rng.next_u64() % nr);
        const int c = static_cast<int>(rng.next_u64() % nt);
        m.d(r, c) = cxd{0.4 + rng.uniform01(), 0.5 - rng.uniform01()};
    }
    m.omega = RealMatrix(nr, nt);
    for (int r = 0; r < nr; ++r)
        for (int c = 0; c < nt; ++c)
            m.omega(r, c) = std::norm(m.d(r, c)) + m.m(r, c) * m.m(r, c);
    return m;
}

double bound_at(const RealMatrix& omega, const std::vector<double>& lam, double gamma) {
    RealMatrix arg(omega.rows, omega.cols);
    for (int r = 0; r < omega.rows; ++r)
        for (int c = 0; c < omega.cols; ++c) arg(r, c) = gamma * omega(r, c) * lam[c];
    return extended_permanent_log2(arg);
}

// --- criteria ----------------------------------------------------------------

bool criterion_permanent_equivalence(std::string& detail) {
    RngStream rng(kSeed, 1);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + trial % 7;
        const RealMatrix a = oracle::random_nonneg(rng, n, n);
        const double exact = permanent_exact(a);
        const double ryser = permanent_ryser(a);
        worst = std::max(worst, std::abs(ryser - exact) / std::abs(exact));
    }
    std::ostringstream os;
    os << "500 matrices, worst relative error " << worst;
    detail = os.str();
    return worst <= 1e-12;
}

bool criterion_transpose_identity(std::string& detail) {
    RngStream rng(kSeed, 2);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int rows = 1 + static_cast<int>(rng.next_u64() % 6);
        const int cols = 1 + static_cast<int>(rng.next_u64() % 8);
        const RealMatrix a = oracle::random_nonneg(rng, rows, cols);
        RealMatrix t(cols, rows);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) t(c, r) = a(r, c);
        const double va = extended_permanent(a);
        const double vt = extended_permanent(t);
        worst = std::max(worst, std::abs(va - vt) / va);
    }
    std::ostringstream os;
    os << "200 rectangles up to 6x8, worst relative error " << worst;
    detail = os.str();
    return worst <= 1e-10;
}

bool criterion_det_expectation_identity(std::string& detail) {
    const long trials = 1000000;
    double worst = 0.0;
    for (int cfg = 0; cfg < 13; ++cfg) {
        RngStream setup(kSeed, 100 + cfg);
        const int nr = 1 + static_cast<int>(setup.next_u64() % 4);
        const int nt = 1 + static_cast<int>(setup.next_u64() % 4);
        const bool with_specular = cfg >= 10;
        const CouplingModel model = scatter_model(setup, nr, nt, with_specular);
        const std::vector<double> lam = oracle::random_feasible(setup, nt, 0.1);
        const double gamma = 0.15 + 0.85 * setup.uniform01();  // gamma <= 1
        const SnrSpec snr = SnrSpec::from_linear(gamma * nt, nt);
        RngStream mc(kSeed, 200 + cfg);
        const CapacityEstimate est =
            mc_det_expectation(model, PowerAllocation{lam}, snr, trials, mc);
        const double analytic = std::exp2(upper_bound(model, PowerAllocation{lam}, snr));
        worst = std::max(worst, std::abs(est.mean_bits - analytic) / est.std_error);
    }
    std::ostringstream os;
    os << "13 models (10 scattered, 3 specular) x 1e6 trials, worst gap " << worst
       << " standard errors";
    detail = os.str();
    return worst <= 3.0;
}

bool criterion_jensen_dominance(std::string& detail) {
    int violations = 0;
    double worst_margin = -1e9;
    RngStream pick(kSeed, 300);
    for (int m = 0; m < 10; ++m) {
        const int nt = 2 + static_cast<int>(pick.next_u64() % 3);
        const int nr = 2 + static_cast<int>(pick.next_u64() % 3);
        const double w = 0.5 + 1.5 * pick.uniform01();
        const EigenBasis basis =
            build_eigenbasis(build_correlation(PortGeometry{nt, nr, w, w}));
        CouplingModel model;
        if (m % 3 == 0) {
            model = build_coupling(basis, CouplingKind::SeparableRayleigh);
        } else if (m % 3 == 1) {
            RngStream fit(kSeed, 310 + m);
            model = build_coupling(basis, CouplingKind::NonSeparableRayleigh, {}, &fit);
        } else {
            model = build_coupling(basis, CouplingKind::SeparableRician, 0.0);
        }
        const PowerAllocation eq = PowerAllocation::equal(nt);
        RngStream lamrng(kSeed, 320 + m);
        const PowerAllocation rnd{oracle::random_feasible(lamrng, nt, 0.1)};
        int grid = 0;
        for (double db : {-10.0, 0.0, 10.0, 20.0, 30.0}) {
            const SnrSpec snr = SnrSpec::from_db(db, nt);
            for (const PowerAllocation* alloc : {&eq, &rnd}) {
                RngStream mc(kSeed, 330 + m * 16 + grid);
                ++grid;
                const CapacityEstimate full = mc_full_capacity(model, *alloc, snr, 30000, mc);
                const double ub = upper_bound(model, *alloc, snr);
                const double margin = full.mean_bits - ub - 3.0 * full.std_error;
                worst_margin = std::max(worst_margin, margin);
                if (margin > 0.0) ++violations;
            }
        }
    }
    std::ostringstream os;
    os << "10 models x 5 SNRs x 2 allocations, violations " << violations << ", worst margin "
       << worst_margin << " bits";
    detail = os.str();
    return violations == 0;
}

bool criterion_selection_dominance(std::string& detail) {
    const EigenBasis basis = build_eigenbasis(build_correlation(PortGeometry{8, 8, 1.0, 1.0}));
    const CouplingModel model = build_coupling(basis, CouplingKind::SeparableRayleigh);
    const PowerAllocation eq = PowerAllocation::equal(8);
    double worst = -1e9;
    int slot = 0;
    for (double db : {-10.0, 0.0, 10.0, 20.0, 30.0}) {
        const SnrSpec snr = SnrSpec::from_db(db, 8);
        RngStream r1(kSeed, 400 + slot), r2(kSeed, 420 + slot);
        ++slot;
        const CapacityEstimate sel = mc_selection_capacity(model, basis, snr, 100000, r1);
        const CapacityEstimate full = mc_full_capacity(model, eq, snr, 100000, r2);
        const double margin =
            sel.mean_bits - full.mean_bits - 3.0 * std::hypot(sel.std_error, full.std_error);
        worst = std::max(worst, margin);
    }
    std::ostringstream os;
    os << "aperture 1, 8 ports, 5 SNRs, worst selection-minus-full margin " << worst << " bits";
    detail = os.str();
    return worst <= 0.0;
}

bool criterion_gradient(std::string& detail) {
    RngStream rng(kSeed, 500);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int nr = 2 + static_cast<int>(rng.next_u64() % 3);
        const int nt = 2 + static_cast<int>(rng.next_u64() % 3);
        const RealMatrix omega = oracle::random_nonneg(rng, nr, nt, 0.2, 1.5);
        const std::vector<double> lam = oracle::random_feasible(rng, nt, 0.3);
        const double gamma = 0.1 + 3.0 * rng.uniform01();
        const std::vector<double> g = gradient(omega, lam, gamma);
        const double h = 1e-5;
        for (int i = 0; i < nt; ++i) {
            std::vector<double> hi = lam, lo = lam;
            hi[i] += h;
            lo[i] -= h;
            const double fd =
                (bound_at(omega, hi, gamma) - bound_at(omega, lo, gamma)) / (2.0 * h);
            worst = std::max(worst, std::abs(g[i] - fd) / std::abs(fd));
        }
    }
    std::ostringstream os;
    os << "50 interior points, worst per-component relative error " << worst;
    detail = os.str();
    return worst <= 1e-6;
}

bool criterion_optimizer_regimes(std::string& detail) {
    std::ostringstream os;
    bool ok = true;

    // (a) transmit-symmetric coupling: equal power is stationary
    RngStream rng(kSeed, 600);
    RealMatrix sym(5, 4);
    for (int r = 0; r < 5; ++r) {
        const double v = 0.3 + rng.uniform01();
        for (int c = 0; c < 4; ++c) sym(r, c) = v;
    }
    const OptimizeResult sa = optimize(sym, SnrSpec::from_db(10.0, 4));
    double dev = 0.0;
    for (double v : sa.allocation.lambda) dev = std::max(dev, std::abs(v - 1.0));
    ok = ok && dev <= 1e-6 && sa.kkt.max_violation <= 1e-5;
    os << "(a) equal-power deviation " << dev;

    // (b) low SNR: all power on the strongest column
    const RealMatrix omega = oracle::random_nonneg(rng, 4, 4, 0.1, 2.0);
    const SnrSpec low = SnrSpec::from_db(-30.0, 4);
    const OptimizeResult lb = optimize(omega, low);
    std::vector<double> cs(4, 0.0);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) cs[c] += omega(r, c);
    std::vector<double> vertex(4, 0.0);
    vertex[std::max_element(cs.begin(), cs.end()) - cs.begin()] = 4.0;
    const double vertex_obj = bound_at(omega, vertex, low.gamma);
    const double res_obj = lb.objective_trace.back();
    ok = ok && res_obj >= vertex_obj - 1e-6 && std::abs(res_obj - vertex_obj) <= 1e-3 &&
         lb.kkt.max_violation <= 1e-5;
    os << "; (b) low-SNR gap " << std::abs(res_obj - vertex_obj) << " bits";

    // (c) high SNR with nr >= nt: equal power is near-optimal
    const RealMatrix tall = oracle::random_nonneg(rng, 6, 4, 0.2, 1.5);
    const SnrSpec high = SnrSpec::from_db(40.0, 4);
    const OptimizeResult hb = optimize(tall, high);
    const double at_ones = bound_at(tall, std::vector<double>(4, 1.0), high.gamma);
    const double gap = std::abs(hb.objective_trace.back() - at_ones);
    ok = ok && gap <= 0.01 && hb.kkt.max_violation <= 1e-5;
    os << "; (c) high-SNR gap " << gap << " bits; worst KKT residual "
       << std::max({sa.kkt.max_violation, lb.kkt.max_violation, hb.kkt.max_violation});

    detail = os.str();
    return ok;
}

bool criterion_marginal_consistency(std::string& detail) {
    double worst = 0.0;
    for (auto [nt, nr, wt, wr] : {std::tuple{4, 4, 0.5, 0.5}, std::tuple{8, 8, 1.0, 1.0},
                                  std::tuple{3, 6, 0.8, 2.0}, std::tuple{2, 2, 0.25, 0.25}}) {
        const EigenBasis basis =
            build_eigenbasis(build_correlation(PortGeometry{nt, nr, wt, wr}));
        std::vector<CouplingModel> models;
        models.push_back(build_coupling(basis, CouplingKind::SeparableRayleigh));
        RngStream rng(kSeed, 700 + nt * 16 + nr);
        models.push_back(build_coupling(basis, CouplingKind::NonSeparableRayleigh, {}, &rng));
        models.push_back(build_coupling(
            basis, CouplingKind::SeparableRician, (nt == 8 && nr == 8) ? 6.0 : 0.0));
        for (const CouplingModel& model : models) {
            double total = 0.0;
            for (double v : model.omega.a) total += v;
            for (int m = 0; m < nr; ++m) {
                double rs = 0.0;
                for (int i = 0; i < nt; ++i) rs += model.omega(m, i);
                worst = std::max(worst, std::abs(rs / total - basis.pi_r[m]));
            }
            for (int i = 0; i < nt; ++i) {
                double colsum = 0.0;
                for (int m = 0; m < nr; ++m) colsum += model.omega(m, i);
                worst = std::max(worst, std::abs(colsum / total - basis.pi_t[i]));
            }
        }
    }
    std::ostringstream os;
    os << "4 geometries x 3 kinds, worst normalized marginal deviation " << worst;
    detail = os.str();
    return worst <= 1e-9;
}

bool criterion_curve_shapes(std::string& detail) {
    std::ostringstream os;
    bool ok = true;

    // SNR sweep: monotone curves, selection <= full <= upper bound
    ExperimentConfig snr_cfg = default_config(ExperimentKind::SnrSweep);
    snr_cfg.snr_grid_db = {-10, -5, 0, 5, 10, 15, 20, 25, 30};
    snr_cfg.n_trials = 100000;
    snr_cfg.seed = kSeed;
    snr_cfg.threads = 0;
    snr_cfg.output_path = tmp("fas_acc_snr.csv");
    run_snr_sweep(snr_cfg);
    const csvh::Csv snr = csvh::parse_csv(snr_cfg.output_path);
    for (const char* col : {"c_full_eq", "c_full_opt", "c_sel", "c_upper_eq", "c_upper_opt",
                            "c_fixed_m3"}) {
        for (size_t r = 1; r < snr.rows.size(); ++r)
            if (!(snr.at(r, col) >= snr.at(r - 1, col))) {
                ok = false;
                os << "non-monotone " << col << " at row " << r << "; ";
            }
    }
    for (size_t r = 0; r < snr.rows.size(); ++r) {
        const double noise3 = 3.0 * std::hypot(snr.at(r, "c_sel_se"), snr.at(r, "c_full_eq_se"));
        if (!(snr.at(r, "c_sel") <= snr.at(r, "c_full_eq") + noise3)) {
            ok = false;
            os << "selection above full at row " << r << "; ";
        }
        if (!(snr.at(r, "c_full_eq") <=
              snr.at(r, "c_upper_eq") + 3.0 * snr.at(r, "c_full_eq_se"))) {
            ok = false;
            os << "full above bound at row " << r << "; ";
        }
        if (!(snr.at(r, "c_full_opt") <=
              snr.at(r, "c_upper_opt") + 3.0 * snr.at(r, "c_full_opt_se"))) {
            ok = false;
            os << "optimized full above its bound at row " << r << "; ";
        }
    }
    os << "snr sweep ordering/monotonicity checked";

    // port sweep: increments shrink as ports densify in the fixed aperture
    ExperimentConfig port_cfg = default_config(ExperimentKind::PortSweep);
    port_cfg.port_grid = {4, 8, 16};
    port_cfg.port_sweep_snr_db = 20.0;
    port_cfg.n_trials = 100000;
    port_cfg.seed = kSeed;
    port_cfg.output_path = tmp("fas_acc_port.csv");
    run_port_sweep(port_cfg);
    const csvh::Csv port = csvh::parse_csv(port_cfg.output_path);
    // The single-active-pair link is the curve that saturates when ports
    // densify a fixed aperture: beyond the aperture's degrees of freedom, new
    // ports are nearly copies of old ones and the best gain stops improving.
    // The full-port columns keep a near-constant increment per doubling
    // instead (receive-side energy accumulates with simultaneously active
    // ports under the unit-power-per-port normalization); they are reported
    // but not gated.
    {
        const double inc1 = port.at(1, "c_sel") - port.at(0, "c_sel");
        const double inc2 = port.at(2, "c_sel") - port.at(1, "c_sel");
        os << "; c_sel increments " << inc1 << " -> " << inc2;
        if (!(inc1 > inc2)) {
            ok = false;
            os << " (not decreasing)";
        }
        for (const char* col : {"c_full_eq", "c_upper_eq"}) {
            os << "; " << col << " increments " << port.at(1, col) - port.at(0, col) << " -> "
               << port.at(2, col) - port.at(1, col);
        }
        // power allocation pays off more as modes concentrate with large N
        const double gap0 = port.at(0, "c_full_opt") - port.at(0, "c_full_eq");
        const double gap2 = port.at(2, "c_full_opt") - port.at(2, "c_full_eq");
        os << "; allocation gain " << gap0 << " -> " << gap2 << " bits";
        if (!(gap2 > gap0)) {
            ok = false;
            os << " (allocation gain did not widen)";
        }
    }

    // specular comparison at 20 dB: the fully i.i.d. array loses capacity,
    // the dual fluid link does not (sign check within Monte-Carlo noise)
    ExperimentConfig los_cfg = default_config(ExperimentKind::LosCompare);
    los_cfg.snr_grid_db = {20.0};
    los_cfg.k_factor_db = 6.0;
    los_cfg.n_trials = 100000;
    los_cfg.seed = kSeed;
    los_cfg.baselines.iid = true;
    los_cfg.baselines.iid_m = {5};
    los_cfg.output_path = tmp("fas_acc_los.csv");
    run_los_compare(los_cfg);
    const csvh::Csv los = csvh::parse_csv(los_cfg.output_path);
    const double iid_drop = los.at(0, "c_iid_m5_rayleigh") - los.at(0, "c_iid_m5_rician");
    if (!(iid_drop > 0.0)) {
        ok = false;
        os << "; iid LOS did not reduce capacity";
    }
    const double fas_diff = los.at(0, "c_full_rician") - los.at(0, "c_full_rayleigh");
    const double fas_noise = std::hypot(los.at(0, "c_full_rician_se"),
                                        los.at(0, "c_full_rayleigh_se"));
    if (!(fas_diff > -2.0 * fas_noise)) {
        ok = false;
        os << "; dual-fluid capacity dropped under LOS";
    }
    os << "; iid LOS drop " << iid_drop << " bits, dual-fluid LOS change " << fas_diff
       << " bits";

    detail = os.str();
    return ok;
}

bool criterion_determinism(std::string& detail) {
    bool ok = true;
    std::ostringstream os;

    ExperimentConfig cfg = default_config(ExperimentKind::SnrSweep);
    cfg.snr_grid_db = {0.0, 10.0, 20.0};
    cfg.n_trials = 2000;
    cfg.seed = kSeed;
    cfg.baselines.iid = true;
    cfg.baselines.iid_m = {4};
    cfg.output_path = tmp("fas_acc_det.csv");
    cfg.threads = 1;
    run_snr_sweep(cfg);
    const std::string a = csvh::slurp(cfg.output_path);
    cfg.threads = 4;
    run_snr_sweep(cfg);
    const std::string b = csvh::slurp(cfg.output_path);
    cfg.threads = 2;
    run_snr_sweep(cfg);
    const std::string c = csvh::slurp(cfg.output_path);
    ok = ok && a == b && b == c;
    os << "snr sweep bytes stable across 1/2/4 workers: " << (a == b && b == c);

    ExperimentConfig pc = default_config(ExperimentKind::PortSweep);
    pc.port_grid = {2, 4};
    pc.n_trials = 2000;
    pc.seed = kSeed;
    pc.baselines.iid = false;
    pc.output_path = tmp("fas_acc_det2.csv");
    pc.threads = 1;
    run_port_sweep(pc);
    const std::string p1 = csvh::slurp(pc.output_path);
    pc.threads = 3;
    run_port_sweep(pc);
    const std::string p2 = csvh::slurp(pc.output_path);
    ok = ok && p1 == p2;
    os << "; port sweep stable: " << (p1 == p2);

    detail = os.str();
    return ok;
}

}  // namespace

int main() {
    using Clock = std::chrono::steady_clock;
    struct Criterion {
        int id;
        const char* name;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "permanent oracle equivalence", criterion_permanent_equivalence},
        {2, "extended-permanent transpose identity", criterion_transpose_identity},
        {3, "determinant-expectation identity", criterion_det_expectation_identity},
        {4, "Jensen dominance of the upper bound", criterion_jensen_dominance},
        {5, "selection dominance", criterion_selection_dominance},
        {6, "gradient against finite differences", criterion_gradient},
        {7, "optimizer regime consistency", criterion_optimizer_regimes},
        {8, "coupling marginal consistency", criterion_marginal_consistency},
        {9, "curve-shape reproduction", criterion_curve_shapes},
        {10, "deterministic CSV output", criterion_determinism},
    };
    int failures = 0;
    const auto t0 = Clock::now();
    for (const Criterion& c : criteria) {
        const auto start = Clock::now();
        std::string detail;
        bool pass = false;
        try {
            pass = c.fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        std::printf("[%s] %2d. %s (%s; %.1f s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    detail.c_str(), secs);
        std::fflush(stdout);
        if (!pass) ++failures;
    }
    const double total = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("%d/%zu criteria passed in %.1f s\n", int(criteria.size()) - failures,
                criteria.size(), total);
    return failures;
}
