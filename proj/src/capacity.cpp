#include "fas/capacity.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "fas/permanent.hpp"

namespace fas {

namespace {

constexpr double kAllocTol = 1e-9;

void require_feasible(const PowerAllocation& alloc, int nt, const char* who) {
    if (static_cast<int>(alloc.lambda.size()) != nt)
        throw std::invalid_argument(std::string(who) + ": allocation length mismatch");
    double sum = 0.0;
    for (double v : alloc.lambda) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string(who) + ": allocation must be >= 0");
        sum += v;
    }
    if (std::abs(sum - double(nt)) > kAllocTol * double(nt) + kAllocTol)
        throw std::invalid_argument(std::string(who) + ": allocation must sum to nt");
}

void require_snr(const SnrSpec& snr, const char* who) {
    if (!(snr.rho >= 0.0) || !std::isfinite(snr.rho) || !(snr.gamma >= 0.0))
        throw std::invalid_argument(std::string(who) + ": SNR must be finite and >= 0");
}

// lo == hi flags a degenerate sample (every trial produced the same value,
// e.g. a deterministic channel); its standard error is exactly zero rather
// than whatever roundoff sumsq - n*mean^2 leaves behind.
CapacityEstimate finish_estimate(double sum, double sumsq, long n, double lo, double hi) {
    CapacityEstimate est;
    est.n_trials = n;
    est.mean_bits = sum / double(n);
    if (n > 1 && lo != hi) {
        const double var = std::max(0.0, (sumsq - double(n) * est.mean_bits * est.mean_bits) /
                                             double(n - 1));
        est.std_error = std::sqrt(var / double(n));
    }
    return est;
}

struct Accumulator {
    double sum = 0.0;
    double sumsq = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        sum += v;
        sumsq += v * v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CapacityEstimate finish(long n) const { return finish_estimate(sum, sumsq, n, lo, hi); }
};

// I + gamma * Htilde * diag(lambda) * Htilde^H, symmetrized so roundoff never
// trips the Hermitian precondition of the factorization.
void gram_matrix(const ComplexMatrix& htilde, const std::vector<double>& lambda, double gamma,
                 ComplexMatrix& g) {
    const int nr = htilde.rows, nt = htilde.cols;
    for (int p = 0; p < nr; ++p) {
        for (int q = p; q < nr; ++q) {
            cxd acc = 0.0;
            for (int i = 0; i < nt; ++i)
                acc += lambda[i] * htilde(p, i) * std::conj(htilde(q, i));
            acc *= gamma;
            if (p == q) {
                g(p, p) = 1.0 + acc.real();
            } else {
                g(p, q) = acc;
                g(q, p) = std::conj(acc);
            }
        }
    }
}

void draw_htilde(const CouplingModel& model, RngStream& rng, ComplexMatrix& htilde) {
    const int nr = model.nr(), nt = model.nt();
    for (int m = 0; m < nr; ++m)
        for (int i = 0; i < nt; ++i)
            htilde(m, i) = model.d(m, i) + model.m(m, i) * rng.next_cn01();
}

void require_specular_structure(const CouplingModel& model, const char* who) {
    const int nr = model.nr(), nt = model.nt();
    std::vector<int> row_hits(nr, 0), col_hits(nt, 0);
    for (int m = 0; m < nr; ++m)
        for (int i = 0; i < nt; ++i)
            if (model.d(m, i) != cxd{}) {
                if (++row_hits[m] > 1 || ++col_hits[i] > 1)
                    throw std::invalid_argument(
                        std::string(who) +
                        ": specular matrix needs at most one nonzero per row and column");
            }
}

}  // namespace

SnrSpec SnrSpec::from_linear(double rho, int nt) {
    if (nt < 1) throw std::invalid_argument("SnrSpec: nt must be >= 1");
    if (!(rho >= 0.0) || !std::isfinite(rho))
        throw std::invalid_argument("SnrSpec: rho must be finite and >= 0");
    return {rho, rho / double(nt)};
}

SnrSpec SnrSpec::from_db(double rho_db, int nt) {
    return from_linear(std::pow(10.0, rho_db / 10.0), nt);
}

double PowerAllocation::sum() const {
    return std::accumulate(lambda.begin(), lambda.end(), 0.0);
}

CapacityEstimate mc_full_capacity(const CouplingModel& model, const PowerAllocation& alloc,
                                  SnrSpec snr, long n_trials, RngStream& rng) {
    require_feasible(alloc, model.nt(), "mc_full_capacity");
    require_snr(snr, "mc_full_capacity");
    if (n_trials < 1) throw std::invalid_argument("mc_full_capacity: need n_trials >= 1");

    ComplexMatrix htilde(model.nr(), model.nt());
    ComplexMatrix g(model.nr(), model.nr());
    Accumulator acc;
    for (long t = 0; t < n_trials; ++t) {
        draw_htilde(model, rng, htilde);
        gram_matrix(htilde, alloc.lambda, snr.gamma, g);
        acc.add(logdet2_hpd(g));
    }
    return acc.finish(n_trials);
}

CapacityEstimate mc_selection_capacity(const CouplingModel& model, const EigenBasis& basis,
                                       SnrSpec snr, long n_trials, RngStream& rng) {
    require_snr(snr, "mc_selection_capacity");
    if (n_trials < 1) throw std::invalid_argument("mc_selection_capacity: need n_trials >= 1");

    Accumulator acc;
    for (long t = 0; t < n_trials; ++t) {
        const ChannelSample s = sample_channel(model, basis, rng);
        double gain = 0.0;
        for (const cxd& e : s.h.a) gain = std::max(gain, std::norm(e));
        acc.add(std::log2(1.0 + snr.rho * gain));
    }
    return acc.finish(n_trials);
}

double upper_bound(const CouplingModel& model, const PowerAllocation& alloc, SnrSpec snr) {
    require_feasible(alloc, model.nt(), "upper_bound");
    require_snr(snr, "upper_bound");
    require_specular_structure(model, "upper_bound");
    RealMatrix arg(model.nr(), model.nt());
    for (int m = 0; m < model.nr(); ++m)
        for (int i = 0; i < model.nt(); ++i)
            arg(m, i) = snr.gamma * model.omega(m, i) * alloc.lambda[i];
    return extended_permanent_log2(arg);
}

CapacityEstimate mc_det_expectation(const CouplingModel& model, const PowerAllocation& alloc,
                                    SnrSpec snr, long n_trials, RngStream& rng) {
    require_feasible(alloc, model.nt(), "mc_det_expectation");
    require_snr(snr, "mc_det_expectation");
    require_specular_structure(model, "mc_det_expectation");
    if (n_trials < 1) throw std::invalid_argument("mc_det_expectation: need n_trials >= 1");

    ComplexMatrix htilde(model.nr(), model.nt());
    ComplexMatrix g(model.nr(), model.nr());
    Accumulator acc;
    for (long t = 0; t < n_trials; ++t) {
        draw_htilde(model, rng, htilde);
        gram_matrix(htilde, alloc.lambda, snr.gamma, g);
        acc.add(std::exp2(logdet2_hpd(g)));
    }
    return acc.finish(n_trials);
}

double asymptotic_low_snr(const CouplingModel& model, const PowerAllocation& alloc, SnrSpec snr) {
    require_feasible(alloc, model.nt(), "asymptotic_low_snr");
    require_snr(snr, "asymptotic_low_snr");
    double acc = 0.0;
    for (int i = 0; i < model.nt(); ++i) {
        double colsum = 0.0;
        for (int m = 0; m < model.nr(); ++m) colsum += model.omega(m, i);
        acc += alloc.lambda[i] * colsum;
    }
    return snr.gamma * acc / std::numbers::ln2;
}

PowerAllocation asymptotic_high_snr_optimal(int nt) {
    if (nt < 1) throw std::invalid_argument("asymptotic_high_snr_optimal: nt must be >= 1");
    return PowerAllocation::equal(nt);
}

}  // namespace fas
