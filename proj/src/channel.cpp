#include "fas/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace fas {

namespace {

constexpr double kEigClampTol = 1e-12;   // relative to the largest eigenvalue
constexpr double kFitTol = 1e-12;        // normalized marginal deviation
constexpr int kFitMaxSweeps = 10000;

std::vector<double> row_sums(const RealMatrix& w) {
    std::vector<double> s(w.rows, 0.0);
    for (int r = 0; r < w.rows; ++r)
        for (int c = 0; c < w.cols; ++c) s[r] += w(r, c);
    return s;
}

std::vector<double> col_sums(const RealMatrix& w) {
    std::vector<double> s(w.cols, 0.0);
    for (int r = 0; r < w.rows; ++r)
        for (int c = 0; c < w.cols; ++c) s[c] += w(r, c);
    return s;
}

// Alternating row/column rescaling until both marginals match the targets.
// Targets must have equal totals; zero targets zero out their line.
RealMatrix fit_marginals(RealMatrix w, const std::vector<double>& row_target,
                         const std::vector<double>& col_target) {
    const double total = std::accumulate(row_target.begin(), row_target.end(), 0.0);
    if (total <= 0.0) return RealMatrix(w.rows, w.cols, 0.0);
    for (int sweep = 0; sweep < kFitMaxSweeps; ++sweep) {
        std::vector<double> rs = row_sums(w);
        for (int r = 0; r < w.rows; ++r) {
            const double f = rs[r] > 0.0 ? row_target[r] / rs[r] : 0.0;
            for (int c = 0; c < w.cols; ++c) w(r, c) *= f;
        }
        std::vector<double> cs = col_sums(w);
        for (int c = 0; c < w.cols; ++c) {
            const double f = cs[c] > 0.0 ? col_target[c] / cs[c] : 0.0;
            for (int r = 0; r < w.rows; ++r) w(r, c) *= f;
        }
        rs = row_sums(w);
        cs = col_sums(w);
        double err = 0.0;
        for (int r = 0; r < w.rows; ++r) err = std::max(err, std::abs(rs[r] - row_target[r]));
        for (int c = 0; c < w.cols; ++c) err = std::max(err, std::abs(cs[c] - col_target[c]));
        if (err / total <= kFitTol) return w;
    }
    throw std::runtime_error("build_coupling: proportional fitting did not converge");
}

void decompose_side(const ComplexMatrix& sigma, ComplexMatrix& u, std::vector<double>& lambda,
                    std::vector<double>& pi) {
    HermitianEig eig = hermitian_eigendecompose(sigma, kEigClampTol);
    for (double v : eig.eigenvalues)
        if (v < 0.0)
            throw std::domain_error("build_eigenbasis: correlation matrix is not PSD");
    const double trace = std::accumulate(eig.eigenvalues.begin(), eig.eigenvalues.end(), 0.0);
    u = std::move(eig.eigenvectors);
    lambda = std::move(eig.eigenvalues);
    pi.resize(lambda.size());
    for (size_t i = 0; i < lambda.size(); ++i) pi[i] = lambda[i] / trace;
}

}  // namespace

std::vector<double> PortGeometry::tx_positions() const {
    std::vector<double> x(nt);
    for (int p = 0; p < nt; ++p) x[p] = double(p) * wt / double(nt - 1);
    return x;
}

std::vector<double> PortGeometry::rx_positions() const {
    std::vector<double> x(nr);
    for (int m = 0; m < nr; ++m) x[m] = double(m) * wr / double(nr - 1);
    return x;
}

void PortGeometry::validate() const {
    if (nt < 2 || nr < 2) throw std::invalid_argument("PortGeometry: need at least 2 ports per side");
    if (!(wt > 0.0) || !(wr > 0.0)) throw std::invalid_argument("PortGeometry: apertures must be > 0");
}

std::string_view to_string(CouplingKind kind) {
    switch (kind) {
        case CouplingKind::SeparableRayleigh: return "separable-rayleigh";
        case CouplingKind::NonSeparableRayleigh: return "nonseparable-rayleigh";
        case CouplingKind::SeparableRician: return "separable-rician";
    }
    throw std::invalid_argument("unknown CouplingKind");
}

CouplingKind coupling_kind_from_string(std::string_view name) {
    if (name == "separable-rayleigh") return CouplingKind::SeparableRayleigh;
    if (name == "nonseparable-rayleigh") return CouplingKind::NonSeparableRayleigh;
    if (name == "separable-rician") return CouplingKind::SeparableRician;
    throw std::invalid_argument("unknown coupling kind: " + std::string(name));
}

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    return std::sin(x) / x;
}

CorrelationPair build_correlation(const PortGeometry& geom) {
    geom.validate();
    auto toeplitz = [](int n, double w) {
        ComplexMatrix s(n, n);
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q)
                s(p, q) = sinc(2.0 * std::numbers::pi * double(p - q) * w / double(n - 1));
        return s;
    };
    return {toeplitz(geom.nt, geom.wt), toeplitz(geom.nr, geom.wr)};
}

EigenBasis build_eigenbasis(const CorrelationPair& corr) {
    EigenBasis basis;
    decompose_side(corr.sigma_t, basis.ut, basis.lambda_t, basis.pi_t);
    decompose_side(corr.sigma_r, basis.ur, basis.lambda_r, basis.pi_r);
    return basis;
}

CouplingModel build_coupling(const EigenBasis& basis, CouplingKind kind,
                             std::optional<double> k_factor_db, RngStream* rng) {
    const int nt = static_cast<int>(basis.pi_t.size());
    const int nr = static_cast<int>(basis.pi_r.size());
    const double total = double(nt) * double(nr);

    std::vector<double> row_target(nr), col_target(nt);
    for (int m = 0; m < nr; ++m) row_target[m] = basis.pi_r[m] * total;
    for (int i = 0; i < nt; ++i) col_target[i] = basis.pi_t[i] * total;

    CouplingModel model;
    model.d = ComplexMatrix(nr, nt);

    switch (kind) {
        case CouplingKind::SeparableRayleigh: {
            RealMatrix w(nr, nt);
            for (int m = 0; m < nr; ++m)
                for (int i = 0; i < nt; ++i) w(m, i) = total * basis.pi_r[m] * basis.pi_t[i];
            model.omega = w;
            model.m = w;
            for (double& v : model.m.a) v = std::sqrt(v);
            return model;
        }
        case CouplingKind::NonSeparableRayleigh: {
            if (rng == nullptr)
                throw std::invalid_argument("build_coupling: nonseparable kind needs an rng");
            RealMatrix w(nr, nt);
            for (double& v : w.a) v = 0.5 + rng->uniform01();
            w = fit_marginals(std::move(w), row_target, col_target);
            model.omega = w;
            model.m = w;
            for (double& v : model.m.a) v = std::sqrt(v);
            return model;
        }
        case CouplingKind::SeparableRician: {
            if (!k_factor_db)
                throw std::invalid_argument("build_coupling: rician kind needs a K factor");
            if (std::isnan(*k_factor_db) || *k_factor_db == std::numeric_limits<double>::infinity())
                throw std::domain_error("build_coupling: K factor must be finite (or -inf dB)");
            const double k = std::pow(10.0, *k_factor_db / 10.0);
            if (!(k >= 0.0)) throw std::domain_error("build_coupling: K factor must be >= 0");
            const double specular_budget = total * k / (1.0 + k);

            // Specular power lives on the strongest eigenmode pairs, greedily
            // along the diagonal. Each pair (i, i) can absorb at most the
            // smaller of its two marginal targets, otherwise the combined
            // coupling could not reproduce pi_r / pi_t.
            const int ndiag = std::min(nt, nr);
            std::vector<double> spec(ndiag, 0.0);
            double remaining = specular_budget;
            for (int i = 0; i < ndiag && remaining > 0.0; ++i) {
                const double cap = std::min(row_target[i], col_target[i]);
                spec[i] = std::min(remaining, cap);
                remaining -= spec[i];
            }
            if (remaining > 1e-9 * total)
                throw std::domain_error(
                    "build_coupling: K factor too large for the eigenmode power profiles");

            std::vector<double> row_res = row_target, col_res = col_target;
            for (int i = 0; i < ndiag; ++i) {
                row_res[i] = std::max(0.0, row_res[i] - spec[i]);
                col_res[i] = std::max(0.0, col_res[i] - spec[i]);
            }
            const double diffuse_total = total - specular_budget;
            auto rescale = [&](std::vector<double>& v) {
                const double s = std::accumulate(v.begin(), v.end(), 0.0);
                if (s > 0.0)
                    for (double& x : v) x *= diffuse_total / s;
            };
            rescale(row_res);
            rescale(col_res);

            RealMatrix w(nr, nt);
            if (diffuse_total > 0.0) {
                // Start from the 1/(1+K)-scaled separable coupling and rebalance
                // so the combined matrix still matches the marginal profiles.
                for (int m = 0; m < nr; ++m)
                    for (int i = 0; i < nt; ++i)
                        w(m, i) = total * basis.pi_r[m] * basis.pi_t[i] / (1.0 + k);
                w = fit_marginals(std::move(w), row_res, col_res);
            }

            for (int i = 0; i < ndiag; ++i) model.d(i, i) = std::sqrt(spec[i]);
            model.m = w;
            for (double& v : model.m.a) v = std::sqrt(v);
            model.omega = RealMatrix(nr, nt);
            for (int m = 0; m < nr; ++m)
                for (int i = 0; i < nt; ++i)
                    model.omega(m, i) = std::norm(model.d(m, i)) + w(m, i);
            return model;
        }
    }
    throw std::invalid_argument("build_coupling: unknown kind");
}

ChannelSample sample_channel(const CouplingModel& model, const EigenBasis& basis, RngStream& rng) {
    const int nr = model.nr(), nt = model.nt();
    if (static_cast<int>(basis.pi_r.size()) != nr || static_cast<int>(basis.pi_t.size()) != nt)
        throw std::invalid_argument("sample_channel: basis/model dimension mismatch");
    ChannelSample s;
    s.htilde = ComplexMatrix(nr, nt);
    for (int m = 0; m < nr; ++m)
        for (int i = 0; i < nt; ++i)
            s.htilde(m, i) = model.d(m, i) + model.m(m, i) * rng.next_cn01();
    s.h = multiply(basis.ur, multiply(s.htilde, adjoint(basis.ut)));
    return s;
}

nlohmann::ordered_json coupling_to_json(const CouplingModel& model) {
    nlohmann::ordered_json doc;
    doc["nr"] = model.nr();
    doc["nt"] = model.nt();
    auto& d = doc["d"] = nlohmann::ordered_json::array();
    for (int m = 0; m < model.nr(); ++m) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int i = 0; i < model.nt(); ++i)
            row.push_back({model.d(m, i).real(), model.d(m, i).imag()});
        d.push_back(std::move(row));
    }
    auto dump_real = [&](const RealMatrix& mat) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (int m = 0; m < mat.rows; ++m) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (int i = 0; i < mat.cols; ++i) row.push_back(mat(m, i));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    doc["m"] = dump_real(model.m);
    doc["omega"] = dump_real(model.omega);
    return doc;
}

CouplingModel coupling_from_json(const nlohmann::ordered_json& doc) {
    const int nr = doc.at("nr").get<int>();
    const int nt = doc.at("nt").get<int>();
    if (nr < 1 || nt < 1) throw std::invalid_argument("coupling_from_json: bad dimensions");
    CouplingModel model;
    model.d = ComplexMatrix(nr, nt);
    model.m = RealMatrix(nr, nt);
    model.omega = RealMatrix(nr, nt);
    const auto& d = doc.at("d");
    const auto& m = doc.at("m");
    const auto& omega = doc.at("omega");
    for (int r = 0; r < nr; ++r)
        for (int c = 0; c < nt; ++c) {
            model.d(r, c) = cxd(d.at(r).at(c).at(0).get<double>(), d.at(r).at(c).at(1).get<double>());
            model.m(r, c) = m.at(r).at(c).get<double>();
            model.omega(r, c) = omega.at(r).at(c).get<double>();
        }
    double scale = 0.0;
    for (double v : model.omega.a) scale = std::max(scale, std::abs(v));
    for (int r = 0; r < nr; ++r)
        for (int c = 0; c < nt; ++c) {
            const double expect = std::norm(model.d(r, c)) + model.m(r, c) * model.m(r, c);
            if (std::abs(expect - model.omega(r, c)) > 1e-9 * std::max(1.0, scale))
                throw std::invalid_argument(
                    "coupling_from_json: omega is inconsistent with d and m");
        }
    return model;
}

}  // namespace fas
