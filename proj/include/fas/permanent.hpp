#pragma once

#include <span>
#include <vector>

#include "fas/numerics.hpp"

namespace fas {

// Exhaustive permutation-sum permanent. Reference-grade, n <= 7 only.
double permanent_exact(const RealMatrix& a);

// Ryser inclusion-exclusion with a Gray-code subset walk and compensated
// summation. Practical up to n ~ 30.
double permanent_ryser(const RealMatrix& a);

// Extended permanent Per([I_M  A]) of a nonnegative M x N matrix: the graded
// sum over k of the permanents of all k x k submatrices, with 1 as the k = 0
// term. Evaluated by a bitmask dynamic program over the row set, cost
// O(2^M * M * N), so square sizes up to ~20 stay cheap. The linear-domain
// value may overflow to +inf; callers needing large arguments use
// extended_permanent_log2.
double extended_permanent(const RealMatrix& a);

// log2 of the extended permanent, renormalized internally so the result is
// finite far beyond double range (exponents to ~ +/-300000 in log2 units).
double extended_permanent_log2(const RealMatrix& a);

struct MarginalExpansion {
    double f0;  // extended permanent with column i deleted
    double f1;  // marginal utility coefficient of lambda[i]
};

struct MarginalExpansionLog2 {
    double f0_log2;
    double f1_log2;  // -inf when column i couples to nothing
};

// Expansion of F(lambda) = extPer(gamma * Omega * diag(lambda)) around its
// i-th transmit mode (0-based): F is affine in lambda[i],
// F = f0 + lambda[i] * f1. f1 aggregates, over receive modes m, the coupling
// Omega(m, i) weighted by the extended permanent of the (m, i) minor.
MarginalExpansion marginal_expansion(const RealMatrix& omega, std::span<const double> lambda,
                                     double gamma, int i);
MarginalExpansionLog2 marginal_expansion_log2(const RealMatrix& omega,
                                              std::span<const double> lambda, double gamma, int i);

namespace reference {

// Slow direct routes kept as independent cross-checks for the DP evaluator;
// grade k of the sum is the total permanent mass of all k x k submatrices.
// Sizes are limited to what the combinatorial enumeration can bear.
std::vector<double> extended_permanent_grades(const RealMatrix& a);
double extended_permanent_subset_sum(const RealMatrix& a);

}  // namespace reference

namespace testhook {

// Relative perturbation injected into permanent_ryser results. Exists so the
// validation runner can prove its negative control trips. Keep at zero.
extern double ryser_perturbation;

}  // namespace testhook

}  // namespace fas
