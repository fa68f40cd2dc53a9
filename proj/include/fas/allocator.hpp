#pragma once

#include <span>
#include <vector>

#include "fas/capacity.hpp"
#include "fas/numerics.hpp"

namespace fas {

struct OptimizerConfig {
    double step_init = 1.0;   // trial step, in units of the budget over ||g||_inf
    double armijo_beta = 0.5;
    double armijo_c = 1e-4;
    double tol = 1e-6;        // terminate when the iterate moves less than this
    int max_iters = 500;
};

struct KktReport {
    double mu = 0.0;             // common marginal utility over the active set
    double max_violation = 0.0;  // stationarity residual, bits per unit power
    std::vector<int> active_set;
};

struct OptimizeResult {
    PowerAllocation allocation;
    KktReport kkt;
    std::vector<double> objective_trace;  // bound value per accepted iterate
    bool converged = false;
    int iterations = 0;
};

// Gradient of the bound log2 extPer(gamma * omega * diag(lambda)) with
// respect to lambda; component i is f1_i / (ln2 * F). Nonnegative whenever
// omega is.
std::vector<double> gradient(const RealMatrix& omega, std::span<const double> lambda,
                             double gamma);

// Euclidean projection onto { x >= 0, sum(x) = budget }, by sorting and
// exact threshold extraction from the prefix sums.
std::vector<double> project_simplex(std::span<const double> z, double budget);

// Projected-gradient ascent on the capacity upper bound, starting from equal
// power, with Armijo backtracking on the projected point. The trial step is
// scaled by budget / ||g||_inf so behaviour is uniform across SNR regimes.
// Hitting max_iters flags the result as non-converged instead of throwing.
OptimizeResult optimize(const RealMatrix& omega, SnrSpec snr, const OptimizerConfig& cfg = {});

// First-order optimality residual at a feasible point: active modes
// (lambda_i above a small threshold) should share one marginal utility, and
// inactive modes should not beat it.
KktReport kkt_residual(const RealMatrix& omega, std::span<const double> lambda, double gamma);

}  // namespace fas
