#pragma once

#include <cmath>
#include <vector>

#include "s2/common.hpp"
#include "s2/cplx.hpp"
#include "s2/graph.hpp"

namespace s2 {

struct LaplacianKind {
    enum class Type { SymNormalized, RandomWalk, Unnormalized, Magnetic };
    Type type = Type::SymNormalized;
    double q = 0.0;  // Magnetic potential, valid range [0, 2*pi]

    static LaplacianKind sym_normalized() { return {Type::SymNormalized, 0.0}; }
    static LaplacianKind random_walk() { return {Type::RandomWalk, 0.0}; }
    static LaplacianKind unnormalized() { return {Type::Unnormalized, 0.0}; }
    static LaplacianKind magnetic(double q) {
        require(q >= 0.0 && q <= 6.283185307179586477, "Magnetic q outside [0, 2*pi]");
        return {Type::Magnetic, q};
    }
};

// Hermitian sparse matrix in CSR form. Complex entries are stored as separate
// (re, im) arrays; im is empty for real matrices. For the RandomWalk kind the
// stored matrix is the symmetric similarity core C with L_rw = S^{-1} C S,
// S = diag(similarity_scale); eigenvalues agree, and apply() applies L_rw.
struct SparseHermitian {
    index_t n = 0;
    std::vector<index_t> row_ptr, col;
    std::vector<double> re;
    std::vector<double> im;                  // empty => real symmetric
    std::vector<double> similarity_scale;    // empty => stored matrix is the operator
    std::vector<double> null_hint;           // known eigenvector of the 0 eigenvalue, if any

    bool is_complex() const { return !im.empty(); }

    Cplx entry(index_t u, index_t v) const {
        for (index_t e = row_ptr[u]; e < row_ptr[u + 1]; ++e)
            if (col[e] == v) return {re[e], im.empty() ? 0.0 : im[e]};
        return {0.0, 0.0};
    }

    // y = C x for the stored (Hermitian) core, real path
    void apply_core(const double* x, double* y) const {
        for (index_t u = 0; u < n; ++u) {
            double acc = 0.0;
            for (index_t e = row_ptr[u]; e < row_ptr[u + 1]; ++e) acc += re[e] * x[col[e]];
            y[u] = acc;
        }
    }

    // complex core application on interleaved (re, im) vectors
    void apply_core(const Cplx* x, Cplx* y) const {
        for (index_t u = 0; u < n; ++u) {
            Cplx acc{0.0, 0.0};
            for (index_t e = row_ptr[u]; e < row_ptr[u + 1]; ++e) {
                const Cplx a{re[e], im.empty() ? 0.0 : im[e]};
                acc += a * x[col[e]];
            }
            y[u] = acc;
        }
    }

    // y = L x for the represented operator (handles the similarity scaling)
    void apply(const double* x, double* y) const {
        if (similarity_scale.empty()) {
            apply_core(x, y);
            return;
        }
        std::vector<double> t(n);
        for (index_t i = 0; i < n; ++i) t[i] = similarity_scale[i] * x[i];
        apply_core(t.data(), y);
        for (index_t i = 0; i < n; ++i) y[i] /= similarity_scale[i];
    }

    // multi-column apply on row-major X (n x d) -> Y (n x d)
    void apply_rows(const double* X, double* Y, index_t d) const {
        std::vector<double> xs(similarity_scale.empty() ? 0 : n * d);
        const double* src = X;
        if (!similarity_scale.empty()) {
            for (index_t i = 0; i < n; ++i)
                for (index_t j = 0; j < d; ++j) xs[i * d + j] = similarity_scale[i] * X[i * d + j];
            src = xs.data();
        }
        for (index_t u = 0; u < n; ++u) {
            double* out = Y + u * d;
            for (index_t j = 0; j < d; ++j) out[j] = 0.0;
            for (index_t e = row_ptr[u]; e < row_ptr[u + 1]; ++e) {
                const double w = re[e];
                const double* in = src + col[e] * d;
                for (index_t j = 0; j < d; ++j) out[j] += w * in[j];
            }
            if (!similarity_scale.empty())
                for (index_t j = 0; j < d; ++j) out[j] /= similarity_scale[u];
        }
    }

    double hermitian_defect() const {
        double worst = 0.0;
        for (index_t u = 0; u < n; ++u)
            for (index_t e = row_ptr[u]; e < row_ptr[u + 1]; ++e) {
                const Cplx a{re[e], im.empty() ? 0.0 : im[e]};
                const Cplx b = entry(col[e], u);
                worst = std::max(worst, std::max(std::abs(a.re - b.re), std::abs(a.im + b.im)));
            }
        return worst;
    }
};

namespace detail {

inline std::vector<double> weighted_degrees(const Graph& g) {
    std::vector<double> d(g.n, 0.0);
    for (index_t u = 0; u < g.n; ++u)
        for (index_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) d[u] += g.weight_at(e);
    return d;
}

// CSR skeleton of A plus the full diagonal.
struct Skeleton {
    std::vector<index_t> row_ptr, col;
    std::vector<index_t> diag_pos;  // entry index of (u,u) per row
};

inline Skeleton skeleton_with_diagonal(const Graph& g) {
    Skeleton s;
    s.row_ptr.assign(static_cast<std::size_t>(g.n) + 1, 0);
    s.diag_pos.assign(g.n, -1);
    for (index_t u = 0; u < g.n; ++u) {
        bool placed = false;
        for (index_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
            if (!placed && g.col[e] > u) {
                s.diag_pos[u] = static_cast<index_t>(s.col.size());
                s.col.push_back(u);
                placed = true;
            }
            s.col.push_back(g.col[e]);
        }
        if (!placed) {
            s.diag_pos[u] = static_cast<index_t>(s.col.size());
            s.col.push_back(u);
        }
        s.row_ptr[u + 1] = static_cast<index_t>(s.col.size());
    }
    return s;
}

} // namespace detail

inline SparseHermitian build_laplacian(const Graph& g, LaplacianKind kind) {
    using T = LaplacianKind::Type;
    if (!g.weights.empty())
        for (double w : g.weights)
            if (w < 0.0) throw Error("NegativeWeight");

    SparseHermitian M;
    M.n = g.n;

    if (kind.type == T::Magnetic) {
        // magnitudes from the symmetrized graph, phase from A - A^T
        const Graph gs = symmetrize(g);
        auto ds = detail::weighted_degrees(gs);
        for (index_t u = 0; u < g.n; ++u)
            if (ds[u] <= 0.0) throw Error("ZeroDegreeNode");
        auto sk = detail::skeleton_with_diagonal(gs);
        M.row_ptr = std::move(sk.row_ptr);
        M.col = std::move(sk.col);
        M.re.assign(M.col.size(), 0.0);
        M.im.assign(M.col.size(), 0.0);
        for (index_t u = 0; u < gs.n; ++u) {
            index_t ge = gs.row_ptr[u];
            for (index_t e = M.row_ptr[u]; e < M.row_ptr[u + 1]; ++e) {
                const index_t v = M.col[e];
                if (v == u) {
                    M.re[e] = 1.0;
                    continue;
                }
                const double w = gs.weight_at(ge++);
                const double mag = w / std::sqrt(ds[u] * ds[v]);
                double wf = 0.0, wb = 0.0;  // weights of u->v and v->u in the input
                for (index_t a = g.row_ptr[u]; a < g.row_ptr[u + 1]; ++a)
                    if (g.col[a] == v) wf = g.weight_at(a);
                if (g.directed) {
                    for (index_t a = g.row_ptr[v]; a < g.row_ptr[v + 1]; ++a)
                        if (g.col[a] == u) wb = g.weight_at(a);
                } else {
                    wb = wf;
                }
                const Cplx ph = expi(6.283185307179586477 * kind.q * (wf - wb));
                M.re[e] = -mag * ph.re;
                M.im[e] = -mag * ph.im;
            }
        }
        return M;
    }

    require(!g.directed, "non-magnetic Laplacian kinds need an undirected graph");
    auto d = detail::weighted_degrees(g);
    if (kind.type != T::Unnormalized)
        for (index_t u = 0; u < g.n; ++u)
            if (d[u] <= 0.0) throw Error("ZeroDegreeNode");

    auto sk = detail::skeleton_with_diagonal(g);
    M.row_ptr = std::move(sk.row_ptr);
    M.col = std::move(sk.col);
    M.re.assign(M.col.size(), 0.0);

    for (index_t u = 0; u < g.n; ++u) {
        index_t ge = g.row_ptr[u];
        for (index_t e = M.row_ptr[u]; e < M.row_ptr[u + 1]; ++e) {
            const index_t v = M.col[e];
            if (v == u) {
                M.re[e] = (kind.type == T::Unnormalized) ? d[u] : 1.0;
                continue;
            }
            const double w = g.weight_at(ge++);
            switch (kind.type) {
                case T::Unnormalized: M.re[e] = -w; break;
                // RandomWalk stores the symmetric similarity core, which matches
                // the SymNormalized matrix; the scale vector carries D^{1/2}.
                case T::SymNormalized:
                case T::RandomWalk: M.re[e] = -w / std::sqrt(d[u] * d[v]); break;
                default: break;
            }
        }
    }
    if (kind.type == T::RandomWalk) {
        M.similarity_scale.resize(g.n);
        for (index_t u = 0; u < g.n; ++u) M.similarity_scale[u] = std::sqrt(d[u]);
    }
    if (kind.type == T::SymNormalized || kind.type == T::RandomWalk) {
        if (is_connected(g)) {
            // known zero-eigenvector of the core: D^{1/2} 1 normalized
            M.null_hint.resize(g.n);
            double nrm = 0.0;
            for (index_t u = 0; u < g.n; ++u) {
                M.null_hint[u] = std::sqrt(d[u]);
                nrm += d[u];
            }
            nrm = std::sqrt(nrm);
            for (auto& x : M.null_hint) x /= nrm;
        }
    } else if (kind.type == T::Unnormalized) {
        if (is_connected(g)) {
            M.null_hint.assign(g.n, 1.0 / std::sqrt(static_cast<double>(g.n)));
        }
    }
    return M;
}

} // namespace s2
