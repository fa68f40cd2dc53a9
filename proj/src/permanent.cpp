#include "fas/permanent.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fas {

double testhook::ryser_perturbation = 0.0;

namespace {

constexpr int kMaxMaskBits = 22;  // 2^22 doubles = 32 MiB DP table
constexpr double kRenormThreshold = 0x1p512;
constexpr double kRenormFactor = 0x1p-512;

void require_nonneg(const RealMatrix& a, const char* who) {
    for (double v : a.a)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string(who) + ": entries must be finite and >= 0");
}

double kahan_sum(const std::vector<double>& v) {
    double acc = 0.0, comp = 0.0;
    for (double x : v) {
        const double y = x - comp;
        const double t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    return acc;
}

// Bitmask DP for Per([I_M  A]). After processing a set of columns, dp[mask]
// holds the total weight of all ways to match exactly the rows in `mask` to
// distinct processed columns (unmatched rows take their identity column).
// All quantities are nonnegative, so a shared power-of-two exponent keeps the
// table in range without any cancellation concerns.
struct SubsetDp {
    std::vector<double> dp;
    long exp2 = 0;

    explicit SubsetDp(int m_rows) : dp(size_t(1) << m_rows, 0.0) { dp[0] = 1.0; }

    void absorb_column(std::span<const double> col) {
        bool all_zero = true;
        for (double v : col)
            if (v != 0.0) {
                all_zero = false;
                break;
            }
        if (all_zero) return;
        // Descending mask order: dp[mask \ {m}] is still the pre-column value
        // when dp[mask] is updated, so each column is used at most once.
        for (size_t mask = dp.size() - 1; mask > 0; --mask) {
            double add = 0.0;
            uint64_t bits = mask;
            while (bits) {
                const int m = std::countr_zero(bits);
                bits &= bits - 1;
                add += dp[mask & ~(size_t(1) << m)] * col[m];
            }
            dp[mask] += add;
        }
        double mx = 0.0;
        for (double v : dp) mx = std::max(mx, v);
        if (mx > kRenormThreshold) {
            for (double& v : dp) v *= kRenormFactor;
            exp2 += 512;
        }
    }

    // log2 of the full table sum.
    double total_log2() const { return std::log2(kahan_sum(dp)) + double(exp2); }

    // log2 of sum_m weights[m] * (table sum restricted to masks avoiding row m),
    // i.e. the coefficient picked up by appending one extra column `weights`.
    double weighted_row_deleted_log2(std::span<const double> weights) const {
        const int m_rows = std::countr_zero(dp.size());
        double acc = 0.0, comp = 0.0;
        for (int m = 0; m < m_rows; ++m) {
            if (weights[m] == 0.0) continue;
            const size_t bit = size_t(1) << m;
            double sub = 0.0, subc = 0.0;
            for (size_t mask = 0; mask < dp.size(); ++mask) {
                if (mask & bit) continue;
                const double y = dp[mask] - subc;
                const double t = sub + y;
                subc = (t - sub) - y;
                sub = t;
            }
            const double y = weights[m] * sub - comp;
            const double t = acc + y;
            comp = (t - acc) - y;
            acc = t;
        }
        if (acc <= 0.0) return -std::numeric_limits<double>::infinity();
        return std::log2(acc) + double(exp2);
    }
};

double ext_per_log2_impl(const RealMatrix& a) {
    if (a.rows == 0 || a.cols == 0) return 0.0;
    if (a.rows > kMaxMaskBits) {
        if (a.cols > kMaxMaskBits)
            throw std::invalid_argument("extended_permanent: matrix too large for the subset DP");
        RealMatrix t(a.cols, a.rows);
        for (int r = 0; r < a.rows; ++r)
            for (int c = 0; c < a.cols; ++c) t(c, r) = a(r, c);
        return ext_per_log2_impl(t);
    }
    SubsetDp dp(a.rows);
    std::vector<double> col(a.rows);
    for (int j = 0; j < a.cols; ++j) {
        for (int m = 0; m < a.rows; ++m) col[m] = a(m, j);
        dp.absorb_column(col);
    }
    return dp.total_log2();
}

void enumerate_subsets(int n, int k, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> pick(k);
    std::iota(pick.begin(), pick.end(), 0);
    if (k == 0) {
        fn(pick);
        return;
    }
    while (true) {
        fn(pick);
        int i = k - 1;
        while (i >= 0 && pick[i] == n - k + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
}

}  // namespace

double permanent_exact(const RealMatrix& a) {
    if (a.rows != a.cols) throw std::invalid_argument("permanent_exact: matrix must be square");
    const int n = a.rows;
    if (n > 7)
        throw std::invalid_argument("permanent_exact: limited to n <= 7, use permanent_ryser");
    require_nonneg(a, "permanent_exact");
    if (n == 0) return 1.0;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double sum = 0.0;
    do {
        double p = 1.0;
        for (int r = 0; r < n; ++r) p *= a(r, perm[r]);
        sum += p;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return sum;
}

double permanent_ryser(const RealMatrix& a) {
    if (a.rows != a.cols) throw std::invalid_argument("permanent_ryser: matrix must be square");
    const int n = a.rows;
    if (n > 30) throw std::invalid_argument("permanent_ryser: limited to n <= 30");
    require_nonneg(a, "permanent_ryser");
    if (n == 0) return 1.0;

    std::vector<double> rowsum(n, 0.0);
    double acc = 0.0, comp = 0.0;
    uint64_t gray = 0;
    const uint64_t total = uint64_t(1) << n;
    for (uint64_t iter = 1; iter < total; ++iter) {
        const uint64_t next = iter ^ (iter >> 1);
        const uint64_t diff = next ^ gray;
        const int col = std::countr_zero(diff);
        const double colsign = (next & diff) ? 1.0 : -1.0;
        for (int r = 0; r < n; ++r) rowsum[r] += colsign * a(r, col);
        gray = next;
        double prod = 1.0;
        for (int r = 0; r < n; ++r) prod *= rowsum[r];
        const double term = ((n - std::popcount(next)) % 2 == 0) ? prod : -prod;
        const double y = term - comp;
        const double t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    if (testhook::ryser_perturbation != 0.0)
        acc += testhook::ryser_perturbation * (1.0 + std::abs(acc));
    return acc;
}

double extended_permanent(const RealMatrix& a) {
    require_nonneg(a, "extended_permanent");
    return std::exp2(ext_per_log2_impl(a));
}

double extended_permanent_log2(const RealMatrix& a) {
    require_nonneg(a, "extended_permanent_log2");
    return ext_per_log2_impl(a);
}

namespace {

MarginalExpansionLog2 marginal_expansion_log2_impl(const RealMatrix& omega,
                                                   std::span<const double> lambda, double gamma,
                                                   int i) {
    if (static_cast<int>(lambda.size()) != omega.cols)
        throw std::invalid_argument("marginal_expansion: lambda length must match columns");
    if (i < 0 || i >= omega.cols)
        throw std::invalid_argument("marginal_expansion: column index out of range");
    if (!(gamma >= 0.0)) throw std::invalid_argument("marginal_expansion: gamma must be >= 0");
    require_nonneg(omega, "marginal_expansion");
    for (double v : lambda)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("marginal_expansion: lambda must be finite and >= 0");
    if (omega.rows > kMaxMaskBits)
        throw std::invalid_argument("marginal_expansion: too many receive modes for the subset DP");

    SubsetDp dp(omega.rows);
    std::vector<double> col(omega.rows);
    for (int j = 0; j < omega.cols; ++j) {
        if (j == i) continue;
        const double s = gamma * lambda[j];
        for (int m = 0; m < omega.rows; ++m) col[m] = s * omega(m, j);
        dp.absorb_column(col);
    }
    std::vector<double> w(omega.rows);
    for (int m = 0; m < omega.rows; ++m) w[m] = gamma * omega(m, i);

    MarginalExpansionLog2 out;
    out.f0_log2 = dp.total_log2();
    out.f1_log2 = dp.weighted_row_deleted_log2(w);
    return out;
}

}  // namespace

MarginalExpansion marginal_expansion(const RealMatrix& omega, std::span<const double> lambda,
                                     double gamma, int i) {
    const MarginalExpansionLog2 lg = marginal_expansion_log2_impl(omega, lambda, gamma, i);
    return {std::exp2(lg.f0_log2), std::exp2(lg.f1_log2)};
}

MarginalExpansionLog2 marginal_expansion_log2(const RealMatrix& omega,
                                              std::span<const double> lambda, double gamma,
                                              int i) {
    return marginal_expansion_log2_impl(omega, lambda, gamma, i);
}

namespace reference {

std::vector<double> extended_permanent_grades(const RealMatrix& a) {
    require_nonneg(a, "extended_permanent_grades");
    const int kmax = std::min(a.rows, a.cols);
    if (a.rows > 12 || a.cols > 12)
        throw std::invalid_argument("extended_permanent_grades: enumeration limited to 12x12");
    std::vector<double> grades(kmax + 1, 0.0);
    grades[0] = 1.0;
    for (int k = 1; k <= kmax; ++k) {
        double sum = 0.0;
        enumerate_subsets(a.rows, k, [&](const std::vector<int>& rows) {
            enumerate_subsets(a.cols, k, [&](const std::vector<int>& cols) {
                RealMatrix sub(k, k);
                for (int r = 0; r < k; ++r)
                    for (int c = 0; c < k; ++c) sub(r, c) = a(rows[r], cols[c]);
                sum += permanent_ryser(sub);
            });
        });
        grades[k] = sum;
    }
    return grades;
}

double extended_permanent_subset_sum(const RealMatrix& a) {
    const std::vector<double> grades = extended_permanent_grades(a);
    double total = 0.0;
    for (double g : grades) total += g;
    return total;
}

}  // namespace reference

}  // namespace fas
