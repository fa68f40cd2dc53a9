#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

namespace fas {

using cxd = std::complex<double>;

// Dense row-major complex matrix. Everything in this project is small
// (ports and eigenmodes, N <= ~32), so plain loops are used throughout.
struct ComplexMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<cxd> a;  // row-major, a[r*cols + c]

    ComplexMatrix() = default;
    ComplexMatrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c) {}

    static ComplexMatrix identity(int n);

    cxd& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    const cxd& operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    bool all_finite() const;
};

struct RealMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;  // row-major

    RealMatrix() = default;
    RealMatrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    const double& operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

ComplexMatrix multiply(const ComplexMatrix& lhs, const ComplexMatrix& rhs);
ComplexMatrix adjoint(const ComplexMatrix& m);
RealMatrix abs2(const ComplexMatrix& m);  // entrywise squared magnitude

struct HermitianEig {
    ComplexMatrix eigenvectors;       // unitary, columns ordered like eigenvalues
    std::vector<double> eigenvalues;  // sorted descending
};

// Eigendecomposition of a Hermitian matrix. clamp_tol is relative to the
// largest eigenvalue magnitude: anything below clamp_tol * max|eig| is
// snapped to exactly zero, so analytically-PSD inputs stay PSD after
// roundoff. Throws std::invalid_argument for non-square or non-Hermitian
// input (Hermitian checked entrywise at 1e-12 of the matrix scale).
HermitianEig hermitian_eigendecompose(const ComplexMatrix& a, double clamp_tol);

// log2 det(A) for Hermitian positive definite A, via Cholesky accumulated in
// the log domain so large determinants never overflow. Throws
// std::domain_error when the factorization fails.
double logdet2_hpd(const ComplexMatrix& a);

// Splittable seeded generator (xoshiro256++ state derived from the
// (seed, stream) pair). Identical pairs reproduce identical sequences;
// distinct stream ids give independent streams, so Monte-Carlo work can be
// partitioned deterministically across workers.
class RngStream {
  public:
    RngStream(uint64_t seed, uint64_t stream);

    uint64_t next_u64();
    double uniform01();  // [0, 1), 53-bit resolution
    cxd next_cn01();     // circularly symmetric complex normal, unit variance

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }

  private:
    uint64_t seed_ = 0;
    uint64_t stream_ = 0;
    std::array<uint64_t, 4> s_{};
};

// rows x cols matrix of i.i.d. CN(0,1) entries (real/imaginary parts each
// have variance 1/2).
ComplexMatrix sample_cn01(RngStream& rng, int rows, int cols);

}  // namespace fas
