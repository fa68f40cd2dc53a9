#include "fas/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "fas/permanent.hpp"

namespace fas {

namespace {

constexpr double kActiveThreshold = 1e-8;  // projection leaves exact zeros; steps leave dust

void require_omega(const RealMatrix& omega, const char* who) {
    if (omega.rows < 1 || omega.cols < 1)
        throw std::invalid_argument(std::string(who) + ": empty coupling matrix");
    for (double v : omega.a)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string(who) + ": coupling must be finite and >= 0");
}

void require_feasible_lambda(const RealMatrix& omega, std::span<const double> lambda,
                             const char* who) {
    const int nt = omega.cols;
    if (static_cast<int>(lambda.size()) != nt)
        throw std::invalid_argument(std::string(who) + ": lambda length must match columns");
    double sum = 0.0;
    for (double v : lambda) {
        if (!(v >= -1e-12))
            throw std::invalid_argument(std::string(who) + ": lambda must be >= 0");
        sum += v;
    }
    if (std::abs(sum - double(nt)) > 1e-7 * double(nt))
        throw std::invalid_argument(std::string(who) + ": lambda must sum to nt");
}

double bound_objective(const RealMatrix& omega, std::span<const double> lambda, double gamma) {
    RealMatrix arg(omega.rows, omega.cols);
    for (int m = 0; m < omega.rows; ++m)
        for (int i = 0; i < omega.cols; ++i) arg(m, i) = gamma * omega(m, i) * lambda[i];
    return extended_permanent_log2(arg);
}

std::vector<double> gradient_impl(const RealMatrix& omega, std::span<const double> lambda,
                                  double gamma) {
    const int nt = omega.cols;
    const double f_log2 = bound_objective(omega, lambda, gamma);
    std::vector<double> g(nt, 0.0);
    for (int i = 0; i < nt; ++i) {
        const double f1_log2 = marginal_expansion_log2(omega, lambda, gamma, i).f1_log2;
        if (std::isfinite(f1_log2)) g[i] = std::exp2(f1_log2 - f_log2) / std::numbers::ln2;
    }
    return g;
}

}  // namespace

std::vector<double> gradient(const RealMatrix& omega, std::span<const double> lambda,
                             double gamma) {
    require_omega(omega, "gradient");
    require_feasible_lambda(omega, lambda, "gradient");
    if (!(gamma >= 0.0)) throw std::invalid_argument("gradient: gamma must be >= 0");
    return gradient_impl(omega, lambda, gamma);
}

std::vector<double> project_simplex(std::span<const double> z, double budget) {
    if (!(budget > 0.0)) throw std::invalid_argument("project_simplex: budget must be > 0");
    if (z.empty()) throw std::invalid_argument("project_simplex: empty input");
    std::vector<double> u(z.begin(), z.end());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double prefix = 0.0, tau = u[0] - budget;
    for (size_t j = 0; j < u.size(); ++j) {
        prefix += u[j];
        const double candidate = (prefix - budget) / double(j + 1);
        if (u[j] - candidate > 0.0) tau = candidate;
    }
    std::vector<double> out(z.size());
    for (size_t i = 0; i < z.size(); ++i) out[i] = std::max(z[i] - tau, 0.0);
    return out;
}

OptimizeResult optimize(const RealMatrix& omega, SnrSpec snr, const OptimizerConfig& cfg) {
    require_omega(omega, "optimize");
    if (!(cfg.step_init > 0.0) || !(cfg.armijo_beta > 0.0) || !(cfg.armijo_beta < 1.0) ||
        !(cfg.armijo_c > 0.0) || !(cfg.armijo_c < 1.0) || !(cfg.tol > 0.0) || cfg.max_iters < 1)
        throw std::invalid_argument("optimize: bad optimizer configuration");

    const int nt = omega.cols;
    const double budget = double(nt);
    const double gamma = snr.gamma;

    OptimizeResult res;
    std::vector<double> lambda(nt, 1.0);
    res.objective_trace.push_back(bound_objective(omega, lambda, gamma));

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const std::vector<double> g = gradient_impl(omega, lambda, gamma);
        const double gmax = *std::max_element(g.begin(), g.end());
        if (!(gmax > 0.0)) {
            res.converged = true;  // flat objective, nothing to move
            break;
        }

        const double cur = res.objective_trace.back();
        const double alpha_full = cfg.step_init * budget / gmax;
        double alpha = alpha_full;
        double nominal_move2 = 0.0;  // displacement of the un-backtracked step
        std::vector<double> cand;
        double cand_obj = cur;
        bool accepted = false;
        while (alpha * gmax > 1e-14) {
            std::vector<double> z(lambda);
            for (int i = 0; i < nt; ++i) z[i] += alpha * g[i];
            cand = project_simplex(z, budget);
            double ascent = 0.0, move2 = 0.0;
            for (int i = 0; i < nt; ++i) {
                ascent += g[i] * (cand[i] - lambda[i]);
                move2 += (cand[i] - lambda[i]) * (cand[i] - lambda[i]);
            }
            if (alpha == alpha_full) nominal_move2 = move2;
            cand_obj = bound_objective(omega, cand, gamma);
            if (cand_obj >= cur + cfg.armijo_c * ascent && cand_obj >= cur) {
                accepted = true;
                break;
            }
            alpha *= cfg.armijo_beta;
        }
        if (!accepted) {
            res.converged = true;  // no float-visible ascent left
            break;
        }
        // The first acceptable rung can sit near the ascent-cancellation
        // point when the full step overshoots a curved optimum; lower rungs
        // may gain far more. Walk down while the objective keeps improving.
        while (true) {
            const double alpha_next = alpha * cfg.armijo_beta;
            if (alpha_next * gmax <= 1e-14) break;
            std::vector<double> z(lambda);
            for (int i = 0; i < nt; ++i) z[i] += alpha_next * g[i];
            std::vector<double> lower = project_simplex(z, budget);
            const double lower_obj = bound_objective(omega, lower, gamma);
            if (!(lower_obj > cand_obj)) break;
            cand = std::move(lower);
            cand_obj = lower_obj;
            alpha = alpha_next;
        }

        lambda = std::move(cand);
        res.objective_trace.push_back(cand_obj);
        res.iterations = iter;
        // Convergence is judged on the full-step displacement: after
        // backtracking the accepted move can be tiny while the point is still
        // far from stationary, and the full-step projection shrinks exactly
        // when the active-set marginal utilities equalize.
        if (std::sqrt(nominal_move2) <= cfg.tol) {
            res.converged = true;
            break;
        }
    }

    res.allocation = PowerAllocation{lambda};
    res.kkt = kkt_residual(omega, lambda, gamma);
    return res;
}

KktReport kkt_residual(const RealMatrix& omega, std::span<const double> lambda, double gamma) {
    require_omega(omega, "kkt_residual");
    require_feasible_lambda(omega, lambda, "kkt_residual");
    const std::vector<double> g = gradient_impl(omega, lambda, gamma);

    KktReport report;
    double active_sum = 0.0;
    for (size_t i = 0; i < lambda.size(); ++i)
        if (lambda[i] > kActiveThreshold) {
            report.active_set.push_back(static_cast<int>(i));
            active_sum += g[i];
        }
    report.mu = active_sum / double(report.active_set.size());
    for (size_t i = 0; i < lambda.size(); ++i) {
        const double dev = (lambda[i] > kActiveThreshold) ? std::abs(g[i] - report.mu)
                                                          : std::max(g[i] - report.mu, 0.0);
        report.max_violation = std::max(report.max_violation, dev);
    }
    return report;
}

}  // namespace fas
