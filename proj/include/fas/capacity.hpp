#pragma once

#include <cstdint>

#include "fas/channel.hpp"
#include "fas/numerics.hpp"

namespace fas {

// Average SNR. rho is the total linear SNR; gamma = rho / nt is what each
// transmit eigenmode sees under the trace-normalized power constraint.
struct SnrSpec {
    double rho = 0.0;
    double gamma = 0.0;

    static SnrSpec from_linear(double rho, int nt);
    static SnrSpec from_db(double rho_db, int nt);
};

// Transmit eigenmode powers; feasible means lambda >= 0 and sum(lambda) = nt.
struct PowerAllocation {
    std::vector<double> lambda;

    static PowerAllocation equal(int nt) { return {std::vector<double>(nt, 1.0)}; }
    double sum() const;
};

struct CapacityEstimate {
    double mean_bits = 0.0;  // bits/s/Hz
    double std_error = 0.0;
    long n_trials = 0;
};

// Ergodic capacity of the full-port link at a fixed allocation, estimated by
// Monte Carlo directly in the eigenmode domain (the port-domain unitaries
// cancel inside the determinant).
CapacityEstimate mc_full_capacity(const CouplingModel& model, const PowerAllocation& alloc,
                                  SnrSpec snr, long n_trials, RngStream& rng);

// Ergodic capacity when a single transmit/receive port pair is selected per
// realization for maximum instantaneous gain. The active pair carries the
// whole power budget, so this uses rho rather than gamma.
CapacityEstimate mc_selection_capacity(const CouplingModel& model, const EigenBasis& basis,
                                       SnrSpec snr, long n_trials, RngStream& rng);

// Closed-form capacity upper bound: log2 of the extended permanent of
// gamma * omega * diag(lambda). Requires the specular part of the model to
// have at most one nonzero per row and per column; throws
// std::invalid_argument otherwise.
double upper_bound(const CouplingModel& model, const PowerAllocation& alloc, SnrSpec snr);

// Monte-Carlo mean of the raw determinant det(I + gamma Htilde L Htilde^H).
// The analytic value of this expectation is the extended permanent above;
// keeping the estimator around lets that identity be verified numerically.
CapacityEstimate mc_det_expectation(const CouplingModel& model, const PowerAllocation& alloc,
                                    SnrSpec snr, long n_trials, RngStream& rng);

// First-order small-gamma expansion of the upper bound:
// (gamma / ln 2) * sum_i lambda_i * colsum_i(omega), in bits.
double asymptotic_low_snr(const CouplingModel& model, const PowerAllocation& alloc, SnrSpec snr);

// In the high-SNR regime with nr >= nt the bound is maximized by equal power.
PowerAllocation asymptotic_high_snr_optimal(int nt);

}  // namespace fas
