#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "s2/common.hpp"
#include "s2/evd.hpp"
#include "s2/graph.hpp"
#include "s2/tensor.hpp"

namespace s2 {

struct PEConfig {
    double sigma = 0.001;
    bool negative_softmax_arg = true;  // softmax(-(lam_j - lam)^2 / sigma^2); the sign-convention flag
};

// RBF weights around eigenvalue j: softmax over the kept eigenvalues of the
// (negated) squared distances divided by sigma^2. Weights sum to 1; exact
// repeats of lambda_j share the mass evenly.
inline std::vector<double> rbf_weights(index_t j, const std::vector<double>& eigvals,
                                       const PEConfig& cfg = {}) {
    require(cfg.sigma > 0, "PE sigma must be positive");
    require(j >= 0 && j < static_cast<index_t>(eigvals.size()), "rbf_weights: j out of range");
    const double s2 = cfg.sigma * cfg.sigma;
    const double sgn = cfg.negative_softmax_arg ? -1.0 : 1.0;
    std::vector<double> logits(eigvals.size());
    double mx = -1e300;
    for (std::size_t i = 0; i < eigvals.size(); ++i) {
        const double d = eigvals[j] - eigvals[i];
        logits[i] = sgn * d * d / s2;
        mx = std::max(mx, logits[i]);
    }
    double z = 0.0;
    for (auto& l : logits) z += (l = std::exp(l - mx));
    for (auto& l : logits) l /= z;
    return logits;
}

// PE(V, lambda): column j is [(V h_j(lambda) V^H) .* A] 1 over the binary
// (symmetrized) adjacency. Evaluated edgewise as
//   PE_j[u] = sum_i h_{j,i} V_{u,i} (A conj(V))_{u,i},
// which costs O(k m + n k^2) and never materializes V h V^H.
// Complex eigenvectors (directed graphs) produce [Re || Im], n x 2k.
inline Tensor compute_pe(const PartialEVD& evd, const Graph& g, const PEConfig& cfg = {}) {
    require(evd.n == g.n, "KMismatch: EVD size does not match graph");
    const index_t n = g.n, k = evd.k_eff;
    const Graph gs = g.directed ? symmetrize(g) : g;

    // S = A conj(V) on the binary adjacency (weights ignored)
    const bool cplx = evd.complex_vectors;
    std::vector<Cplx> S(static_cast<std::size_t>(n) * k, Cplx{0, 0});
    for (index_t u = 0; u < n; ++u)
        for (index_t e = gs.row_ptr[u]; e < gs.row_ptr[u + 1]; ++e) {
            const index_t v = gs.col[e];
            for (index_t i = 0; i < k; ++i) S[u * k + i] += conj(evd.vec(v, i));
        }
    // T = V .* S
    std::vector<Cplx> T(static_cast<std::size_t>(n) * k);
    for (index_t u = 0; u < n; ++u)
        for (index_t i = 0; i < k; ++i) T[u * k + i] = evd.vec(u, i) * S[u * k + i];

    Tensor pe(n, cplx ? 2 * k : k);
    for (index_t j = 0; j < k; ++j) {
        const auto w = rbf_weights(j, evd.eigvals, cfg);
        for (index_t u = 0; u < n; ++u) {
            Cplx acc{0, 0};
            for (index_t i = 0; i < k; ++i) acc += w[i] * T[u * k + i];
            pe.at(u, j) = acc.re;
            if (cplx) pe.at(u, k + j) = acc.im;
        }
    }
    return pe;
}

// Permutation-invariant summary: per-column sums plus the multiset of rows.
// Rows are quantized to 1e-8 before the lexicographic sort so that exact ties
// (automorphic nodes) order identically across independent eigensolves.
struct PESignature {
    std::vector<double> col_sums;
    std::vector<std::vector<double>> sorted_rows;
};

inline PESignature pe_graph_signature(const Tensor& pe) {
    PESignature s;
    s.col_sums.assign(pe.cols, 0.0);
    s.sorted_rows.resize(pe.rows);
    for (index_t r = 0; r < pe.rows; ++r) {
        s.sorted_rows[r].resize(pe.cols);
        for (index_t c = 0; c < pe.cols; ++c) {
            s.col_sums[c] += pe.at(r, c);
            s.sorted_rows[r][c] = std::round(pe.at(r, c) * 1e8) / 1e8;
        }
    }
    std::sort(s.sorted_rows.begin(), s.sorted_rows.end());
    return s;
}

inline double signature_distance(const PESignature& a, const PESignature& b) {
    if (a.col_sums.size() != b.col_sums.size() || a.sorted_rows.size() != b.sorted_rows.size())
        return std::numeric_limits<double>::infinity();
    double d = 0.0;
    for (std::size_t i = 0; i < a.col_sums.size(); ++i)
        d = std::max(d, std::abs(a.col_sums[i] - b.col_sums[i]));
    for (std::size_t r = 0; r < a.sorted_rows.size(); ++r)
        for (std::size_t c = 0; c < a.sorted_rows[r].size(); ++c)
            d = std::max(d, std::abs(a.sorted_rows[r][c] - b.sorted_rows[r][c]));
    return d;
}

// The negative result the PE fixes: on any degree-regular graph, a pure
// spectral readout V diag(g(lambda)) V^T 1 is constant across nodes.
// Throws NotRegular for irregular inputs.
inline std::vector<double> degree_regular_spectral_collapse(
    const Graph& g, const std::function<double(double)>& filter) {
    require(!g.directed, "degree_regular_spectral_collapse expects an undirected graph");
    const index_t deg0 = g.row_ptr[1] - g.row_ptr[0];
    for (index_t u = 0; u < g.n; ++u)
        if (g.row_ptr[u + 1] - g.row_ptr[u] != deg0) throw Error("NotRegular");
    PartialEVD full = dense_evd(build_laplacian(g, LaplacianKind::sym_normalized()));
    std::vector<double> xh(full.k_eff, 0.0);
    for (index_t j = 0; j < full.k_eff; ++j) {
        double acc = 0.0;
        for (index_t u = 0; u < g.n; ++u) acc += full.vecs[u * full.k_eff + j];
        xh[j] = filter(full.eigvals[j]) * acc;
    }
    std::vector<double> out(g.n, 0.0);
    for (index_t u = 0; u < g.n; ++u) {
        double acc = 0.0;
        for (index_t j = 0; j < full.k_eff; ++j) acc += full.vecs[u * full.k_eff + j] * xh[j];
        out[u] = acc;
    }
    return out;
}

} // namespace s2
