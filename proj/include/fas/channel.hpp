#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fas/numerics.hpp"

namespace fas {

// Uniform linear port layouts on both apertures; widths are normalized by the
// carrier wavelength. Port p on the transmit side sits at (p-1) * wt / (nt-1),
// and likewise on the receive side, so positions span exactly [0, W].
struct PortGeometry {
    int nt = 2;
    int nr = 2;
    double wt = 1.0;
    double wr = 1.0;

    std::vector<double> tx_positions() const;
    std::vector<double> rx_positions() const;
    void validate() const;  // throws std::invalid_argument

    bool operator==(const PortGeometry&) const = default;
};

struct CorrelationPair {
    ComplexMatrix sigma_t;  // nt x nt, real symmetric Toeplitz, unit diagonal
    ComplexMatrix sigma_r;  // nr x nr
};

struct EigenBasis {
    ComplexMatrix ut, ur;                    // unitary marginal eigenvector matrices
    std::vector<double> lambda_t, lambda_r;  // descending, clamped at >= 0
    std::vector<double> pi_t, pi_r;          // eigenvalues normalized to sum 1
};

enum class CouplingKind {
    SeparableRayleigh,     // rank-one coupling, the Kronecker special case
    NonSeparableRayleigh,  // random coupling fitted to the marginal profiles
    SeparableRician,       // diagonal specular part plus separable scattering
};

std::string_view to_string(CouplingKind kind);
CouplingKind coupling_kind_from_string(std::string_view name);

// Statistics of the eigenmode-domain channel Htilde = D + M .* H0: D is the
// deterministic specular mean, M the scattering strengths, and
// omega = |D|^2 + M.*M the eigenmode coupling matrix (the entrywise second
// moment of Htilde). Models built by build_coupling carry total power nt*nr,
// have at most one nonzero of D per row and column, and their normalized
// row/column sums reproduce pi_r / pi_t.
struct CouplingModel {
    ComplexMatrix d;
    RealMatrix m;
    RealMatrix omega;

    int nr() const { return omega.rows; }
    int nt() const { return omega.cols; }
};

struct ChannelSample {
    ComplexMatrix htilde;  // eigenmode domain
    ComplexMatrix h;       // port domain, h = ur * htilde * ut^H
};

// sin(x)/x with sinc(0) = 1 (the unnormalized convention; the 2*pi factor is
// carried by the caller's argument).
double sinc(double x);

// Clarke-type Toeplitz correlation: entry (p, q) is
// sinc(2*pi*(p-q)*W / (N-1)) per side.
CorrelationPair build_correlation(const PortGeometry& geom);

EigenBasis build_eigenbasis(const CorrelationPair& corr);

// k_factor_db is required for SeparableRician; rng is required for
// NonSeparableRayleigh (random start of the proportional fitting). Throws
// std::runtime_error when the fitting fails to converge and std::domain_error
// for an inadmissible K-factor.
CouplingModel build_coupling(const EigenBasis& basis, CouplingKind kind,
                             std::optional<double> k_factor_db = std::nullopt,
                             RngStream* rng = nullptr);

ChannelSample sample_channel(const CouplingModel& model, const EigenBasis& basis, RngStream& rng);

// Plain nested-array document (complex entries as [re, im] pairs) so a fitted
// model can be frozen to disk and an experiment re-run from it.
nlohmann::ordered_json coupling_to_json(const CouplingModel& model);
CouplingModel coupling_from_json(const nlohmann::ordered_json& doc);

}  // namespace fas
