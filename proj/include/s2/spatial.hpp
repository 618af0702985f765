#pragma once

#include <functional>
#include <vector>

#include "s2/common.hpp"
#include "s2/graph.hpp"
#include "s2/sparse.hpp"
#include "s2/tensor.hpp"

namespace s2 {

// ---------------------------------------------------------------------------
// Propagation operators
// ---------------------------------------------------------------------------

// Receiver-normalized propagation along edge direction: P = D_in^{-1} A^T,
// or against it (reverse=true): P = D_out^{-1} A. Zero-degree rows are zero.
inline SparseProp directed_prop(const Graph& g, bool reverse) {
    SparseProp p;
    p.n = g.n;
    std::vector<std::vector<std::pair<index_t, double>>> rows(g.n);
    for (index_t u = 0; u < g.n; ++u)
        for (index_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
            const index_t v = g.col[e];
            const double w = g.weight_at(e);
            if (!reverse)
                rows[v].push_back({u, w});  // v receives from u along u->v
            else
                rows[u].push_back({v, w});
        }
    p.row_ptr.assign(static_cast<std::size_t>(g.n) + 1, 0);
    for (index_t u = 0; u < g.n; ++u) {
        double deg = 0.0;
        for (auto& [v, w] : rows[u]) deg += w;
        std::sort(rows[u].begin(), rows[u].end());
        for (auto& [v, w] : rows[u]) {
            p.col.push_back(v);
            p.val.push_back(deg > 0 ? w / deg : 0.0);
        }
        p.row_ptr[u + 1] = static_cast<index_t>(p.col.size());
    }
    p.finalize_transpose();
    return p;
}

// ---------------------------------------------------------------------------
// Polynomial spectral filter applied spatially: sum_j gamma_j L^j H
// ---------------------------------------------------------------------------

inline constexpr index_t kMaxPolynomialOrder = 64;

inline ad::VarId polynomial_forward(ad::Tape& t, ad::VarId H, const SparseHermitian* L,
                                    const std::vector<ad::VarId>& gamma) {
    require(!gamma.empty(), "polynomial needs at least gamma_0");
    if (static_cast<index_t>(gamma.size()) - 1 > kMaxPolynomialOrder)
        throw Error("OrderGuard: polynomial order > 64");
    // Horner: y = gamma_p H; y = L y + gamma_j H
    ad::VarId y = ad::mul_scalar_var(t, H, gamma.back());
    for (index_t j = static_cast<index_t>(gamma.size()) - 2; j >= 0; --j) {
        y = ad::spmm_sym(t, L, y);
        y = ad::add(t, y, ad::mul_scalar_var(t, H, gamma[j]));
    }
    return y;
}

// tape-free variant for analysis sweeps
inline Tensor polynomial_apply_plain(const SparseHermitian& L, const std::vector<double>& gamma,
                                     const Tensor& H) {
    require(!gamma.empty(), "polynomial needs at least gamma_0");
    if (static_cast<index_t>(gamma.size()) - 1 > kMaxPolynomialOrder)
        throw Error("OrderGuard: polynomial order > 64");
    Tensor y(H.rows, H.cols);
    for (index_t i = 0; i < H.size(); ++i) y.v[i] = gamma.back() * H.v[i];
    Tensor tmp(H.rows, H.cols);
    for (index_t j = static_cast<index_t>(gamma.size()) - 2; j >= 0; --j) {
        L.apply_rows(y.v.data(), tmp.v.data(), H.cols);
        for (index_t i = 0; i < H.size(); ++i) y.v[i] = tmp.v[i] + gamma[j] * H.v[i];
    }
    return y;
}

// ---------------------------------------------------------------------------
// GCN layer: act( (gamma_0 I + gamma_1 L) H W + 1 b^T )
// ---------------------------------------------------------------------------

using Activation = std::function<ad::VarId(ad::Tape&, ad::VarId)>;

struct GCNLayerVars {
    ad::VarId W = -1;       // d_in x d_out
    ad::VarId b = -1;       // 1 x d_out
    ad::VarId gamma0 = -1;  // 1x1
    ad::VarId gamma1 = -1;  // 1x1
};

inline ad::VarId gcn_forward(ad::Tape& t, ad::VarId H, const SparseHermitian* L,
                             const GCNLayerVars& p, const Activation& act) {
    ad::VarId mixed = ad::add(t, ad::mul_scalar_var(t, H, p.gamma0),
                              ad::mul_scalar_var(t, ad::spmm_sym(t, L, H), p.gamma1));
    ad::VarId pre = ad::add_rowvec(t, ad::matmul(t, mixed, p.W), p.b);
    return act ? act(t, pre) : pre;
}

// Directed variant: half-width transforms on the two directions, concatenated,
// plus a self term. out = act( [P_fwd H W_f || P_bwd H W_b] + H W_self + 1 b^T )
struct DirGCNLayerVars {
    ad::VarId W_self = -1;  // d x d
    ad::VarId W_f = -1;     // d x d/2
    ad::VarId W_b = -1;     // d x d/2
    ad::VarId b = -1;       // 1 x d
};

inline ad::VarId dir_gcn_forward(ad::Tape& t, ad::VarId H, const SparseProp* fwd,
                                 const SparseProp* bwd, const DirGCNLayerVars& p,
                                 const Activation& act) {
    ad::VarId mf = ad::spmm(t, fwd, ad::matmul(t, H, p.W_f));
    ad::VarId mb = ad::spmm(t, bwd, ad::matmul(t, H, p.W_b));
    ad::VarId pre = ad::add(t, ad::concat_cols(t, mf, mb), ad::matmul(t, H, p.W_self));
    pre = ad::add_rowvec(t, pre, p.b);
    return act ? act(t, pre) : pre;
}

// ---------------------------------------------------------------------------
// Block composition (additive Eq.-1 style and sequential Eq.-2 style)
// ---------------------------------------------------------------------------

struct BlockSpec {
    enum class Mode { Additive, Sequential };
    struct LayerDesc {
        enum class Kind { Spatial, Spectral };
        Kind kind = Kind::Spatial;
        bool residual = false;  // default: on for spectral, off for spatial (set by builder)
    };
    Mode mode = Mode::Sequential;
    std::vector<LayerDesc> layers;

    void check() const {
        if (mode == Mode::Additive) {
            index_t spat = 0, spec = 0;
            for (const auto& l : layers)
                (l.kind == LayerDesc::Kind::Spatial ? spat : spec)++;
            require(spat == 1 && spec == 1, "additive block pairs one spatial with one spectral");
        }
    }
};

using LayerFn = std::function<ad::VarId(ad::Tape&, ad::VarId)>;

// Additive: out = Spatial(H) + Spectral(H) (+ H when residual).
inline ad::VarId s2_block_forward(ad::Tape& t, ad::VarId H, const BlockSpec& spec,
                                  const LayerFn& spatial, const LayerFn& spectral) {
    spec.check();
    if (spec.mode == BlockSpec::Mode::Additive) {
        bool residual = false;
        for (const auto& l : spec.layers) residual |= l.residual;
        ad::VarId out = ad::add(t, spatial(t, H), spectral(t, H));
        if (residual) out = ad::add(t, out, H);
        return out;
    }
    ad::VarId cur = H;
    for (const auto& l : spec.layers) {
        ad::VarId y = (l.kind == BlockSpec::LayerDesc::Kind::Spatial) ? spatial(t, cur) : spectral(t, cur);
        cur = l.residual ? ad::add(t, y, cur) : y;
    }
    return cur;
}

} // namespace s2
