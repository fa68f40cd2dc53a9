// Independent numerical oracles used by the tests: deliberately slow, simple
// routes that share no code with the library paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fas/numerics.hpp"

namespace oracle {

// ---- adaptive Simpson quadrature -------------------------------------------

template <typename F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb, double whole,
                   double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1);
}

template <typename F>
double integrate(const F& f, double a, double b, double tol = 1e-11) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

// ---- Laplace (cofactor) determinant ----------------------------------------

inline fas::cxd cofactor_det(const fas::ComplexMatrix& a) {
    const int n = a.rows;
    if (n != a.cols) throw std::invalid_argument("cofactor_det: square only");
    if (n == 1) return a(0, 0);
    fas::cxd acc = 0.0;
    double sign = 1.0;
    for (int c = 0; c < n; ++c) {
        fas::ComplexMatrix sub(n - 1, n - 1);
        for (int r = 1; r < n; ++r) {
            int cc = 0;
            for (int k = 0; k < n; ++k) {
                if (k == c) continue;
                sub(r - 1, cc++) = a(r, k);
            }
        }
        acc += sign * a(0, c) * cofactor_det(sub);
        sign = -sign;
    }
    return acc;
}

// ---- symmetric eigenvalues by characteristic-polynomial bisection ----------
// Counts eigenvalues below x from the sign changes of the leading principal
// minors of S - xI (each minor evaluated by its own pivoted elimination), then
// isolates every eigenvalue by bisection. Real symmetric input only.

inline long double leading_minor_det(const std::vector<std::vector<double>>& s, double x, int k) {
    std::vector<std::vector<long double>> a(k, std::vector<long double>(k));
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) a[r][c] = (long double)s[r][c] - (r == c ? (long double)x : 0.0L);
    long double det = 1.0L;
    for (int col = 0; col < k; ++col) {
        int piv = col;
        for (int r = col + 1; r < k; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (a[piv][col] == 0.0L) return 0.0L;
        if (piv != col) {
            std::swap(a[piv], a[col]);
            det = -det;
        }
        det *= a[col][col];
        for (int r = col + 1; r < k; ++r) {
            const long double f = a[r][col] / a[col][col];
            for (int c = col; c < k; ++c) a[r][c] -= f * a[col][c];
        }
    }
    return det;
}

// Pivoted elimination is backward stable, so the determinant sign stays
// trustworthy down to separations far below the comparison tolerance; only an
// exact zero is ambiguous and handled by nudging x.
inline std::optional<int> try_count_below(const std::vector<std::vector<double>>& s, double x) {
    const int n = static_cast<int>(s.size());
    int changes = 0;
    long double prev = 1.0L;
    for (int k = 1; k <= n; ++k) {
        const long double det = leading_minor_det(s, x, k);
        if (det == 0.0L) return std::nullopt;
        const long double sign = det > 0.0L ? 1.0L : -1.0L;
        if (sign != prev) ++changes;
        prev = sign;
    }
    return changes;
}

inline int count_below(const std::vector<std::vector<double>>& s, double x, double scale) {
    for (int attempt = 0; attempt < 60; ++attempt) {
        const auto r = try_count_below(s, x + double(attempt) * 7e-15 * scale);
        if (r) return *r;
    }
    throw std::runtime_error("count_below: could not separate x from the spectrum");
}

inline std::vector<double> sym_eigenvalues_bisect(const std::vector<std::vector<double>>& s) {
    const int n = static_cast<int>(s.size());
    double lo = 0.0, hi = 0.0, scale = 0.0;
    for (int r = 0; r < n; ++r) {
        double radius = 0.0;
        for (int c = 0; c < n; ++c) {
            if (c != r) radius += std::abs(s[r][c]);
            scale = std::max(scale, std::abs(s[r][c]));
        }
        lo = std::min(lo, s[r][r] - radius);
        hi = std::max(hi, s[r][r] + radius);
    }
    lo -= 1.0;
    hi += 1.0;
    std::vector<double> eig(n);
    for (int i = 0; i < n; ++i) {  // i-th smallest
        double a = lo, b = hi;
        for (int it = 0; it < 120; ++it) {
            const double mid = 0.5 * (a + b);
            if (count_below(s, mid, scale) >= i + 1)
                b = mid;
            else
                a = mid;
        }
        eig[i] = 0.5 * (a + b);
    }
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    return eig;
}

// ---- small random helpers ---------------------------------------------------

inline fas::RealMatrix random_nonneg(fas::RngStream& rng, int rows, int cols, double lo = 0.05,
                                     double hi = 1.5) {
    fas::RealMatrix m(rows, cols);
    for (double& v : m.a) v = lo + (hi - lo) * rng.uniform01();
    return m;
}

inline std::vector<double> random_feasible(fas::RngStream& rng, int nt, double floor = 0.0) {
    std::vector<double> lam(nt);
    double s = 0.0;
    for (double& v : lam) s += (v = floor + rng.uniform01());
    for (double& v : lam) v *= double(nt) / s;
    return lam;
}

}  // namespace oracle
