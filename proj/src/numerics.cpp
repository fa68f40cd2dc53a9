#include "fas/numerics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fas {

namespace {

using EMat = Eigen::MatrixXcd;

EMat to_eigen(const ComplexMatrix& m) {
    EMat out(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out(r, c) = m(r, c);
    return out;
}

double max_abs(const ComplexMatrix& m) {
    double v = 0.0;
    for (const cxd& e : m.a) v = std::max(v, std::abs(e));
    return v;
}

void require_square_hermitian(const ComplexMatrix& m, const char* who) {
    if (m.rows != m.cols)
        throw std::invalid_argument(std::string(who) + ": matrix must be square");
    const double tol = 1e-12 * std::max(1.0, max_abs(m));
    for (int r = 0; r < m.rows; ++r)
        for (int c = r; c < m.cols; ++c)
            if (std::abs(m(r, c) - std::conj(m(c, r))) > tol)
                throw std::invalid_argument(std::string(who) + ": matrix must be Hermitian");
}

uint64_t splitmix64(uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

ComplexMatrix ComplexMatrix::identity(int n) {
    ComplexMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool ComplexMatrix::all_finite() const {
    for (const cxd& e : a)
        if (!std::isfinite(e.real()) || !std::isfinite(e.imag())) return false;
    return true;
}

ComplexMatrix multiply(const ComplexMatrix& lhs, const ComplexMatrix& rhs) {
    if (lhs.cols != rhs.rows) throw std::invalid_argument("multiply: dimension mismatch");
    ComplexMatrix out(lhs.rows, rhs.cols);
    for (int r = 0; r < lhs.rows; ++r) {
        for (int k = 0; k < lhs.cols; ++k) {
            const cxd v = lhs(r, k);
            if (v == cxd{}) continue;
            for (int c = 0; c < rhs.cols; ++c) out(r, c) += v * rhs(k, c);
        }
    }
    return out;
}

ComplexMatrix adjoint(const ComplexMatrix& m) {
    ComplexMatrix out(m.cols, m.rows);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out(c, r) = std::conj(m(r, c));
    return out;
}

RealMatrix abs2(const ComplexMatrix& m) {
    RealMatrix out(m.rows, m.cols);
    for (size_t i = 0; i < m.a.size(); ++i) out.a[i] = std::norm(m.a[i]);
    return out;
}

HermitianEig hermitian_eigendecompose(const ComplexMatrix& a, double clamp_tol) {
    require_square_hermitian(a, "hermitian_eigendecompose");
    const int n = a.rows;
    Eigen::SelfAdjointEigenSolver<EMat> es(to_eigen(a));
    if (es.info() != Eigen::Success)
        throw std::runtime_error("hermitian_eigendecompose: solver did not converge");

    double vmax = 0.0;
    for (int i = 0; i < n; ++i) vmax = std::max(vmax, std::abs(es.eigenvalues()[i]));
    const double thresh = clamp_tol * vmax;

    HermitianEig out;
    out.eigenvalues.resize(n);
    out.eigenvectors = ComplexMatrix(n, n);
    for (int i = 0; i < n; ++i) {
        const int src = n - 1 - i;  // Eigen sorts ascending; we keep descending
        double v = es.eigenvalues()[src];
        if (std::abs(v) < thresh) v = 0.0;
        out.eigenvalues[i] = v;
        for (int r = 0; r < n; ++r) out.eigenvectors(r, i) = es.eigenvectors()(r, src);
    }
    return out;
}

double logdet2_hpd(const ComplexMatrix& a) {
    require_square_hermitian(a, "logdet2_hpd");
    Eigen::LLT<EMat> llt(to_eigen(a));
    if (llt.info() != Eigen::Success)
        throw std::domain_error("logdet2_hpd: matrix is not positive definite");
    double acc = 0.0;
    for (int i = 0; i < a.rows; ++i) acc += std::log2(llt.matrixLLT()(i, i).real());
    return 2.0 * acc;
}

RngStream::RngStream(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {
    // Two decoupled splitmix sequences, one per key half, xor-folded into the
    // xoshiro state. Nearby (seed, stream) pairs land on unrelated states.
    uint64_t xs = seed;
    uint64_t xt = stream ^ 0x6A09E667F3BCC909ULL;
    for (auto& w : s_) w = splitmix64(xs) ^ splitmix64(xt);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[3] = 0x9E3779B97F4A7C15ULL;
}

uint64_t RngStream::next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

cxd RngStream::next_cn01() {
    // Squared radius ~ Exp(1), phase uniform: exactly CN(0,1).
    const double u = 1.0 - uniform01();  // (0, 1], keeps the log finite
    const double r = std::sqrt(-std::log(u));
    const double th = 2.0 * std::numbers::pi * uniform01();
    return {r * std::cos(th), r * std::sin(th)};
}

ComplexMatrix sample_cn01(RngStream& rng, int rows, int cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("sample_cn01: empty shape");
    ComplexMatrix out(rows, cols);
    for (cxd& e : out.a) e = rng.next_cn01();
    return out;
}

}  // namespace fas
