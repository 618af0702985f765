#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "s2/common.hpp"
#include "s2/cplx.hpp"
#include "s2/rng.hpp"
#include "s2/sparse.hpp"

namespace s2 {

// Partial eigendecomposition: ascending eigenvalues with column-orthonormal
// eigenvectors. Real eigenvectors live in vecs (n x k_eff row-major); complex
// ones as interleaved pairs in cvecs (n x k_eff pairs).
struct PartialEVD {
    std::vector<double> eigvals;     // size k_eff, ascending
    std::vector<double> vecs;        // n x k_eff (real case)
    std::vector<Cplx> cvecs;         // n x k_eff (complex case)
    std::vector<double> residuals;   // per kept pair
    index_t n = 0;
    index_t k_requested = 0;
    index_t k_eff = 0;
    double lambda_next = std::numeric_limits<double>::quiet_NaN();  // the (k+1)-th value used by the drop rule
    bool complex_vectors = false;

    Cplx vec(index_t node, index_t j) const {
        return complex_vectors ? cvecs[node * k_eff + j] : Cplx{vecs[node * k_eff + j], 0.0};
    }

    double max_orthonormality_defect() const {
        double worst = 0.0;
        for (index_t a = 0; a < k_eff; ++a)
            for (index_t b = a; b < k_eff; ++b) {
                Cplx acc{0, 0};
                for (index_t i = 0; i < n; ++i) acc += conj(vec(i, a)) * vec(i, b);
                if (a == b) acc.re -= 1.0;
                worst = std::max(worst, std::max(std::abs(acc.re), std::abs(acc.im)));
            }
        return worst;
    }
};

struct LanczosConfig {
    index_t max_iter = 10000;
    double tol = 1e-10;        // residual tolerance
    double eq_tol = 1e-8;      // absolute equality tolerance for the trailing drop
    std::uint64_t seed = 1;
    bool full_reorth = true;   // selective reorthogonalization if false
};

namespace detail {

// Implicit-shift QL for a symmetric tridiagonal matrix. d holds the diagonal,
// e the subdiagonal (e[i] = T(i, i+1), e[n-1] unused). z is an m x n row-major
// matrix whose columns get rotated along (pass m = 0 to skip accumulation).
inline void tql2(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z, index_t m) {
    const index_t n = static_cast<index_t>(d.size());
    if (n == 0) return;
    e[n - 1] = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();
    for (index_t l = 0; l < n; ++l) {
        int iter = 0;
        index_t mm;
        do {
            for (mm = l; mm + 1 < n; ++mm) {
                const double dd = std::abs(d[mm]) + std::abs(d[mm + 1]);
                if (std::abs(e[mm]) <= eps * dd) break;
            }
            if (mm != l) {
                if (iter++ == 80) throw NumericalError("tql2: no convergence");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[mm] - d[l] + e[l] / (g + (g >= 0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                for (index_t i = mm; i-- > l;) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[mm] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (index_t k = 0; k < m; ++k) {
                        f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
                if (r == 0.0 && mm - l > 1) continue;
                d[l] -= p;
                e[l] = g;
                e[mm] = 0.0;
            }
        } while (mm != l);
    }
}

inline void sort_columns(std::vector<double>& d, std::vector<double>& z, index_t m) {
    const index_t n = static_cast<index_t>(d.size());
    std::vector<index_t> idx(n);
    for (index_t i = 0; i < n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](index_t a, index_t b) { return d[a] < d[b]; });
    std::vector<double> d2(n);
    std::vector<double> z2(z.size());
    for (index_t j = 0; j < n; ++j) {
        d2[j] = d[idx[j]];
        for (index_t k = 0; k < m; ++k) z2[k * n + j] = z[k * n + idx[j]];
    }
    d = std::move(d2);
    z = std::move(z2);
}

// Dense real-symmetric EVD via Householder tridiagonalization + QL.
// A is n x n row-major and gets destroyed. Returns ascending eigenvalues;
// vecs (n x n row-major) holds eigenvectors as columns.
inline void dense_sym_evd(std::vector<double>& A, index_t n, std::vector<double>& vals,
                          std::vector<double>& vecs) {
    std::vector<double> d(n, 0.0), e(n, 0.0);
    std::vector<std::vector<double>> hh;  // householder vectors (length n-k-1)
    for (index_t k = 0; k + 2 < n; ++k) {
        const index_t m = n - k - 1;
        std::vector<double> x(m);
        for (index_t i = 0; i < m; ++i) x[i] = A[(k + 1 + i) * n + k];
        double nrm = 0.0;
        for (double v : x) nrm += v * v;
        nrm = std::sqrt(nrm);
        if (nrm < 1e-300) {
            e[k] = 0.0;
            hh.emplace_back();
            continue;
        }
        const double alpha = (x[0] >= 0 ? -nrm : nrm);
        std::vector<double> v = x;
        v[0] -= alpha;
        double vn = 0.0;
        for (double t : v) vn += t * t;
        vn = std::sqrt(vn);
        if (vn < 1e-300) {
            e[k] = alpha;
            hh.emplace_back();
            continue;
        }
        for (double& t : v) t /= vn;
        // p = A_sub v ; K = v^T p ; q = p - K v ; A_sub -= 2 v q^T + 2 q v^T
        std::vector<double> p(m, 0.0);
        for (index_t i = 0; i < m; ++i) {
            double acc = 0.0;
            const double* row = &A[(k + 1 + i) * n + (k + 1)];
            for (index_t j = 0; j < m; ++j) acc += row[j] * v[j];
            p[i] = acc;
        }
        double K = 0.0;
        for (index_t i = 0; i < m; ++i) K += v[i] * p[i];
        std::vector<double> q(m);
        for (index_t i = 0; i < m; ++i) q[i] = p[i] - K * v[i];
        for (index_t i = 0; i < m; ++i) {
            double* row = &A[(k + 1 + i) * n + (k + 1)];
            for (index_t j = 0; j < m; ++j) row[j] -= 2.0 * (v[i] * q[j] + q[i] * v[j]);
        }
        e[k] = alpha;
        hh.push_back(std::move(v));
    }
    if (n >= 2) e[n - 2] = A[(n - 1) * n + (n - 2)];
    for (index_t i = 0; i < n; ++i) d[i] = A[i * n + i];

    // accumulate Q by applying reflectors to the identity
    vecs.assign(n * n, 0.0);
    for (index_t i = 0; i < n; ++i) vecs[i * n + i] = 1.0;
    for (index_t k = static_cast<index_t>(hh.size()); k-- > 0;) {
        const auto& v = hh[k];
        if (v.empty()) continue;
        const index_t m = static_cast<index_t>(v.size());
        // Q <- H_k Q applied on rows k+1.. : Q = (I - 2 v v^T) Q
        for (index_t c = 0; c < n; ++c) {
            double acc = 0.0;
            for (index_t i = 0; i < m; ++i) acc += v[i] * vecs[(k + 1 + i) * n + c];
            for (index_t i = 0; i < m; ++i) vecs[(k + 1 + i) * n + c] -= 2.0 * v[i] * acc;
        }
    }
    std::vector<double> subd(n, 0.0);
    for (index_t i = 0; i + 1 < n; ++i) subd[i] = e[i];
    tql2(d, subd, vecs, n);
    sort_columns(d, vecs, n);
    vals = std::move(d);
}

// Dense Hermitian EVD. A is n x n row-major complex, destroyed.
inline void dense_herm_evd(std::vector<Cplx>& A, index_t n, std::vector<double>& vals,
                           std::vector<Cplx>& vecs) {
    std::vector<double> d(n, 0.0);
    std::vector<Cplx> e(n, Cplx{0, 0});
    std::vector<std::vector<Cplx>> hh;
    for (index_t k = 0; k + 2 < n; ++k) {
        const index_t m = n - k - 1;
        std::vector<Cplx> x(m);
        for (index_t i = 0; i < m; ++i) x[i] = A[(k + 1 + i) * n + k];
        double nrm = 0.0;
        for (auto v : x) nrm += abs2(v);
        nrm = std::sqrt(nrm);
        if (nrm < 1e-300) {
            e[k] = {0, 0};
            hh.emplace_back();
            continue;
        }
        const double ax0 = cabs(x[0]);
        const Cplx phase = (ax0 > 1e-300) ? Cplx{x[0].re / ax0, x[0].im / ax0} : Cplx{1, 0};
        const Cplx alpha = -1.0 * nrm * phase;
        std::vector<Cplx> v = x;
        v[0] -= alpha;
        double vn = 0.0;
        for (auto t : v) vn += abs2(t);
        vn = std::sqrt(vn);
        if (vn < 1e-300) {
            e[k] = alpha;
            hh.emplace_back();
            continue;
        }
        for (auto& t : v) t = (1.0 / vn) * t;
        std::vector<Cplx> p(m, Cplx{0, 0});
        for (index_t i = 0; i < m; ++i) {
            Cplx acc{0, 0};
            const Cplx* row = &A[(k + 1 + i) * n + (k + 1)];
            for (index_t j = 0; j < m; ++j) acc += row[j] * v[j];
            p[i] = acc;
        }
        Cplx Kc{0, 0};
        for (index_t i = 0; i < m; ++i) Kc += conj(v[i]) * p[i];  // real for Hermitian A
        std::vector<Cplx> q(m);
        for (index_t i = 0; i < m; ++i) q[i] = p[i] - Kc.re * v[i];
        for (index_t i = 0; i < m; ++i) {
            Cplx* row = &A[(k + 1 + i) * n + (k + 1)];
            for (index_t j = 0; j < m; ++j) row[j] -= 2.0 * (v[i] * conj(q[j]) + q[i] * conj(v[j]));
        }
        e[k] = alpha;
        hh.push_back(std::move(v));
    }
    if (n >= 2) e[n - 2] = A[(n - 1) * n + (n - 2)];
    for (index_t i = 0; i < n; ++i) d[i] = A[i * n + i].re;

    vecs.assign(n * n, Cplx{0, 0});
    for (index_t i = 0; i < n; ++i) vecs[i * n + i] = {1, 0};
    for (index_t k = static_cast<index_t>(hh.size()); k-- > 0;) {
        const auto& v = hh[k];
        if (v.empty()) continue;
        const index_t m = static_cast<index_t>(v.size());
        for (index_t c = 0; c < n; ++c) {
            Cplx acc{0, 0};
            for (index_t i = 0; i < m; ++i) acc += conj(v[i]) * vecs[(k + 1 + i) * n + c];
            for (index_t i = 0; i < m; ++i) vecs[(k + 1 + i) * n + c] -= 2.0 * (v[i] * acc);
        }
    }
    // rotate subdiagonal phases away: T(real) = D^H T_c D with |delta| = 1
    std::vector<Cplx> delta(n, Cplx{1, 0});
    std::vector<double> subd(n, 0.0);
    for (index_t i = 0; i + 1 < n; ++i) {
        const double a = cabs(e[i]);
        subd[i] = a;
        if (a > 1e-300)
            delta[i + 1] = delta[i] * Cplx{e[i].re / a, e[i].im / a};
        else
            delta[i + 1] = delta[i];
    }
    // columns of Q pick up delta: V = Q diag(delta) S (S real from tql2)
    for (index_t r = 0; r < n; ++r)
        for (index_t c = 0; c < n; ++c) vecs[r * n + c] = vecs[r * n + c] * delta[c];
    std::vector<double> s(n * n, 0.0);
    for (index_t i = 0; i < n; ++i) s[i * n + i] = 1.0;
    tql2(d, subd, s, n);
    sort_columns(d, s, n);
    // V <- V * S
    std::vector<Cplx> out(n * n, Cplx{0, 0});
    for (index_t r = 0; r < n; ++r)
        for (index_t j = 0; j < n; ++j) {
            Cplx acc{0, 0};
            for (index_t c = 0; c < n; ++c) acc += vecs[r * n + c] * s[c * n + j];
            out[r * n + j] = acc;
        }
    vecs = std::move(out);
    vals = std::move(d);
}

} // namespace detail

// Eigenvalue rescalings for filters that must work across graph sizes.
struct EigTransform {
    enum class Kind { None, Arccos, NArccos };
    Kind kind = Kind::None;
    double n = 0.0;  // NArccos scale

    static EigTransform none() { return {Kind::None, 0.0}; }
    static EigTransform arccos() { return {Kind::Arccos, 0.0}; }
    static EigTransform n_arccos(double n) { return {Kind::NArccos, n}; }

    double operator()(double lam) const {
        if (kind == Kind::None) return lam;
        if (lam < -1e-9 || lam > 2.0 + 1e-9) throw Error("OutOfDomain: eigenvalue outside [0,2]");
        const double x = std::clamp(1.0 - lam, -1.0, 1.0);
        // arccos(1-lam) through atan2 for accuracy near the ends
        const double acos_val = std::atan2(std::sqrt(std::max(0.0, 1.0 - x * x)), x);
        const double scale = (kind == Kind::Arccos) ? 1.0 / 3.14159265358979323846
                                                    : n / 3.14159265358979323846;
        return scale * acos_val;
    }
};

inline std::vector<double> eigenvalue_transform(const std::vector<double>& vals, EigTransform t) {
    std::vector<double> out(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) out[i] = t(vals[i]);
    return out;
}

// Full dense decomposition; test oracle and small-n fallback.
inline PartialEVD dense_evd(const SparseHermitian& L) {
    require(L.n <= 512, "SizeGuard: dense_evd limited to n <= 512");
    PartialEVD out;
    out.n = L.n;
    out.k_requested = L.n;
    out.k_eff = L.n;
    const index_t n = L.n;
    if (!L.is_complex()) {
        std::vector<double> A(n * n, 0.0);
        for (index_t u = 0; u < n; ++u)
            for (index_t e = L.row_ptr[u]; e < L.row_ptr[u + 1]; ++e) A[u * n + L.col[e]] = L.re[e];
        detail::dense_sym_evd(A, n, out.eigvals, out.vecs);
    } else {
        std::vector<Cplx> A(n * n, Cplx{0, 0});
        for (index_t u = 0; u < n; ++u)
            for (index_t e = L.row_ptr[u]; e < L.row_ptr[u + 1]; ++e)
                A[u * n + L.col[e]] = {L.re[e], L.im[e]};
        detail::dense_herm_evd(A, n, out.eigvals, out.cvecs);
        out.complex_vectors = true;
    }
    // residuals
    out.residuals.assign(n, 0.0);
    if (!out.complex_vectors) {
        std::vector<double> x(n), y(n);
        for (index_t j = 0; j < n; ++j) {
            for (index_t i = 0; i < n; ++i) x[i] = out.vecs[i * n + j];
            L.apply_core(x.data(), y.data());
            double r = 0.0;
            for (index_t i = 0; i < n; ++i) {
                const double t = y[i] - out.eigvals[j] * x[i];
                r += t * t;
            }
            out.residuals[j] = std::sqrt(r);
        }
    } else {
        std::vector<Cplx> x(n), y(n);
        for (index_t j = 0; j < n; ++j) {
            for (index_t i = 0; i < n; ++i) x[i] = out.cvecs[i * n + j];
            L.apply_core(x.data(), y.data());
            double r = 0.0;
            for (index_t i = 0; i < n; ++i) r += abs2(y[i] - out.eigvals[j] * x[i]);
            out.residuals[j] = std::sqrt(r);
        }
    }
    return out;
}

namespace detail {

// One deflated Lanczos pass on the Hermitian core of L: builds a Krylov basis
// orthogonal to `locked`, returns Ritz pairs. Scalar is double or Cplx.
template <typename Scalar>
struct LanczosRun {
    std::vector<double> theta;           // Ritz values
    std::vector<std::vector<Scalar>> y;  // Ritz vectors
    std::vector<double> resid;
};

inline double sdot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}
inline Cplx sdot(const std::vector<Cplx>& a, const std::vector<Cplx>& b) {
    Cplx s{0, 0};
    for (std::size_t i = 0; i < a.size(); ++i) s += conj(a[i]) * b[i];
    return s;
}
inline double real_part(double x) { return x; }
inline double real_part(Cplx x) { return x.re; }
inline void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}
inline void axpy(std::vector<Cplx>& y, Cplx a, const std::vector<Cplx>& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}
inline void axpy(std::vector<Cplx>& y, double a, const std::vector<Cplx>& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}
inline double norm2(const std::vector<double>& a) { return std::sqrt(sdot(a, a)); }
inline double norm2(const std::vector<Cplx>& a) {
    double s = 0.0;
    for (auto v : a) s += abs2(v);
    return std::sqrt(s);
}
inline void fill_random(std::vector<double>& v, Rng& rng) {
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
}
inline void fill_random(std::vector<Cplx>& v, Rng& rng) {
    for (auto& x : v) x = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
}

template <typename Scalar>
LanczosRun<Scalar> lanczos_pass(const SparseHermitian& L, const std::vector<std::vector<Scalar>>& locked,
                                index_t want, const LanczosConfig& cfg, Rng& rng, index_t max_steps) {
    const index_t n = L.n;
    auto project_out = [&](std::vector<Scalar>& w, const std::vector<std::vector<Scalar>>& basis) {
        for (const auto& b : basis) {
            auto c = sdot(b, w);
            axpy(w, -1.0 * c, b);
        }
    };

    std::vector<std::vector<Scalar>> V;
    std::vector<double> alpha, beta;  // beta[j] links v_j and v_{j+1}
    std::vector<Scalar> v(n), w(n);
    fill_random(v, rng);
    project_out(v, locked);
    double nv = norm2(v);
    if (nv < 1e-12) return {};
    for (auto& x : v) x = (1.0 / nv) * x;
    V.push_back(v);

    const index_t m_max = std::min<index_t>(n - static_cast<index_t>(locked.size()), max_steps);
    for (index_t j = 0; j < m_max; ++j) {
        L.apply_core(V[j].data(), w.data());
        if (j > 0) axpy(w, -beta[j - 1], V[j - 1]);
        const double a = real_part(sdot(V[j], w));
        alpha.push_back(a);
        axpy(w, -a, V[j]);
        project_out(w, locked);
        if (cfg.full_reorth) {
            project_out(w, V);
            project_out(w, V);  // second pass removes rounding leakage
        }
        const double b = norm2(w);
        if (b < 1e-13) break;  // invariant subspace exhausted
        beta.push_back(b);
        for (auto& x : w) x = (1.0 / b) * x;
        V.push_back(w);
        if (static_cast<index_t>(V.size()) > m_max) {
            V.pop_back();
            break;
        }
    }

    const index_t m = static_cast<index_t>(alpha.size());
    if (m == 0) return {};
    std::vector<double> d = alpha, e(m, 0.0), S(m * m, 0.0);
    for (index_t i = 0; i + 1 < m; ++i) e[i] = beta[i];
    for (index_t i = 0; i < m; ++i) S[i * m + i] = 1.0;
    tql2(d, e, S, m);
    sort_columns(d, S, m);

    LanczosRun<Scalar> run;
    const index_t take = std::min(want, m);
    const double beta_last = (static_cast<index_t>(beta.size()) >= m) ? beta[m - 1] : 0.0;
    for (index_t t = 0; t < take; ++t) {
        std::vector<Scalar> y(n, Scalar{});
        for (index_t j = 0; j < m; ++j) {
            const double c = S[j * m + t];
            if (c != 0.0) axpy(y, c, V[j]);
        }
        // cheap residual estimate from the Lanczos identity
        const double est = std::abs(beta_last * S[(m - 1) * m + t]);
        run.theta.push_back(d[t]);
        run.y.push_back(std::move(y));
        run.resid.push_back(est);
    }
    return run;
}

template <typename Scalar>
double explicit_residual(const SparseHermitian& L, const std::vector<Scalar>& v, double lam) {
    std::vector<Scalar> y(v.size());
    L.apply_core(v.data(), y.data());
    std::vector<Scalar> diff = y;
    axpy(diff, -lam, v);
    return norm2(diff);
}

template <typename Scalar>
void lanczos_smallest(const SparseHermitian& L, index_t count, const LanczosConfig& cfg,
                      std::vector<double>& vals, std::vector<std::vector<Scalar>>& vecs) {
    const index_t n = L.n;
    Rng rng(cfg.seed);
    std::vector<std::vector<Scalar>> locked;
    std::vector<double> locked_vals;

    // a known exact null vector is locked up front
    if (!L.null_hint.empty()) {
        std::vector<Scalar> h(n);
        for (index_t i = 0; i < n; ++i) {
            if constexpr (std::is_same_v<Scalar, double>)
                h[i] = L.null_hint[i];
            else
                h[i] = Cplx{L.null_hint[i], 0.0};
        }
        if (explicit_residual(L, h, 0.0) <= cfg.tol) {
            locked.push_back(std::move(h));
            locked_vals.push_back(0.0);
        }
    }

    index_t steps_budget = cfg.max_iter;
    index_t stage = std::max<index_t>(2 * count + 16, 32);
    int stagnant = 0;
    while (static_cast<index_t>(locked.size()) < count) {
        if (steps_budget <= 0)
            throw NumericalError("NotConverged: Lanczos iteration budget exhausted");
        const index_t missing = count - static_cast<index_t>(locked.size());
        const index_t steps = std::min<index_t>(stage, steps_budget);
        auto run = lanczos_pass<Scalar>(L, locked, missing + 2, cfg, rng, steps);
        steps_budget -= steps;
        bool any = false;
        for (std::size_t t = 0; t < run.theta.size(); ++t) {
            if (static_cast<index_t>(locked.size()) >= count) break;
            const double res = explicit_residual(L, run.y[t], run.theta[t]);
            if (res <= cfg.tol * std::max(1.0, std::abs(run.theta[t])) + cfg.tol) {
                // re-orthogonalize against locked set before accepting
                auto y = run.y[t];
                for (const auto& b : locked) {
                    auto c = sdot(b, y);
                    axpy(y, -1.0 * c, b);
                }
                const double ny = norm2(y);
                if (ny < 0.5) continue;  // duplicate of an already locked vector
                for (auto& x : y) x = (1.0 / ny) * x;
                if (explicit_residual(L, y, run.theta[t]) > cfg.tol * 100 + cfg.tol) continue;
                locked.push_back(std::move(y));
                locked_vals.push_back(run.theta[t]);
                any = true;
            }
        }
        if (!any) {
            if (++stagnant > 6) throw NumericalError("NotConverged: Lanczos stagnated");
            stage = std::min<index_t>(stage * 2, std::max<index_t>(n, 64));
        } else {
            stagnant = 0;
        }
        if (static_cast<index_t>(locked.size()) >= n) break;
    }

    // ascending order
    std::vector<index_t> idx(locked.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<index_t>(i);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](index_t a, index_t b) { return locked_vals[a] < locked_vals[b]; });
    vals.clear();
    vecs.clear();
    for (auto i : idx) {
        vals.push_back(locked_vals[i]);
        vecs.push_back(std::move(locked[i]));
    }
}

// closure check: one more deflated pass must not reveal an eigenvalue below
// the current (count)-th smallest by more than eq_tol.
template <typename Scalar>
bool closure_ok(const SparseHermitian& L, const LanczosConfig& cfg,
                const std::vector<double>& vals, const std::vector<std::vector<Scalar>>& vecs) {
    if (static_cast<index_t>(vecs.size()) >= L.n) return true;
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    auto run = lanczos_pass<Scalar>(L, vecs, 1, cfg, rng,
                                    std::max<index_t>(64, 2 * static_cast<index_t>(vals.size()) + 16));
    if (run.theta.empty()) return true;
    return run.theta.front() >= vals.back() - cfg.eq_tol;
}

} // namespace detail

// k+1 smallest eigenpairs with the trailing-repeated-eigenvalue drop:
// every kept index j with |lambda_j - lambda_{k+1}| <= eq_tol is discarded so
// no eigenspace is split across the cut.
inline PartialEVD partial_evd(const SparseHermitian& L, index_t k, const LanczosConfig& cfg = {}) {
    const index_t n = L.n;
    if (k < 1 || k >= n) throw Error("KTooLarge: need 1 <= k < n");
    require(cfg.tol > 0, "tol must be positive");
    require(cfg.max_iter >= k + 1, "max_iter must be at least k+1");

    std::vector<double> vals;
    std::vector<double> rvecs_flat;
    std::vector<Cplx> cvecs_flat;
    index_t found = 0;

    if (!L.is_complex()) {
        std::vector<std::vector<double>> vecs;
        detail::lanczos_smallest<double>(L, k + 1, cfg, vals, vecs);
        while (!detail::closure_ok<double>(L, cfg, vals, vecs)) {
            detail::lanczos_smallest<double>(L, static_cast<index_t>(vals.size()) + 1, cfg, vals, vecs);
        }
        found = std::min<index_t>(k + 1, static_cast<index_t>(vals.size()));
        rvecs_flat.assign(n * found, 0.0);
        for (index_t j = 0; j < found; ++j)
            for (index_t i = 0; i < n; ++i) rvecs_flat[i * found + j] = vecs[j][i];
    } else {
        std::vector<std::vector<Cplx>> vecs;
        detail::lanczos_smallest<Cplx>(L, k + 1, cfg, vals, vecs);
        while (!detail::closure_ok<Cplx>(L, cfg, vals, vecs)) {
            detail::lanczos_smallest<Cplx>(L, static_cast<index_t>(vals.size()) + 1, cfg, vals, vecs);
        }
        found = std::min<index_t>(k + 1, static_cast<index_t>(vals.size()));
        cvecs_flat.assign(n * found, Cplx{0, 0});
        for (index_t j = 0; j < found; ++j)
            for (index_t i = 0; i < n; ++i) cvecs_flat[i * found + j] = vecs[j][i];
    }
    vals.resize(found);

    PartialEVD out;
    out.n = n;
    out.k_requested = k;
    out.complex_vectors = L.is_complex();
    const double lambda_next = vals[found - 1];
    out.lambda_next = lambda_next;
    index_t keff = found - 1;
    while (keff > 0 && std::abs(vals[keff - 1] - lambda_next) <= cfg.eq_tol) --keff;
    out.k_eff = keff;
    out.eigvals.assign(vals.begin(), vals.begin() + keff);
    if (!out.complex_vectors) {
        out.vecs.assign(n * keff, 0.0);
        for (index_t i = 0; i < n; ++i)
            for (index_t j = 0; j < keff; ++j) out.vecs[i * keff + j] = rvecs_flat[i * found + j];
    } else {
        out.cvecs.assign(n * keff, Cplx{0, 0});
        for (index_t i = 0; i < n; ++i)
            for (index_t j = 0; j < keff; ++j) out.cvecs[i * keff + j] = cvecs_flat[i * found + j];
    }
    // explicit residuals for the kept pairs
    out.residuals.assign(keff, 0.0);
    for (index_t j = 0; j < keff; ++j) {
        if (!out.complex_vectors) {
            std::vector<double> x(n), y(n);
            for (index_t i = 0; i < n; ++i) x[i] = out.vecs[i * keff + j];
            L.apply_core(x.data(), y.data());
            double r = 0.0;
            for (index_t i = 0; i < n; ++i) {
                const double t = y[i] - out.eigvals[j] * x[i];
                r += t * t;
            }
            out.residuals[j] = std::sqrt(r);
        } else {
            std::vector<Cplx> x(n), y(n);
            for (index_t i = 0; i < n; ++i) x[i] = out.cvecs[i * keff + j];
            L.apply_core(x.data(), y.data());
            double r = 0.0;
            for (index_t i = 0; i < n; ++i) r += abs2(y[i] - out.eigvals[j] * x[i]);
            out.residuals[j] = std::sqrt(r);
        }
    }
    return out;
}

// Truncate a full decomposition to the k smallest pairs with the same
// trailing-drop rule (used when k+1 >= n or for dense fallbacks).
inline PartialEVD truncate_with_drop(const PartialEVD& full, index_t k, double eq_tol = 1e-8) {
    PartialEVD out;
    out.n = full.n;
    out.k_requested = k;
    out.complex_vectors = full.complex_vectors;
    if (k + 1 >= full.k_eff) {
        out = full;
        out.k_requested = k;
        return out;
    }
    const double lambda_next = full.eigvals[k];
    out.lambda_next = lambda_next;
    index_t keff = k;
    while (keff > 0 && std::abs(full.eigvals[keff - 1] - lambda_next) <= eq_tol) --keff;
    out.k_eff = keff;
    out.eigvals.assign(full.eigvals.begin(), full.eigvals.begin() + keff);
    out.residuals.assign(full.residuals.begin(), full.residuals.begin() + keff);
    if (!full.complex_vectors) {
        out.vecs.assign(full.n * keff, 0.0);
        for (index_t i = 0; i < full.n; ++i)
            for (index_t j = 0; j < keff; ++j) out.vecs[i * keff + j] = full.vecs[i * full.k_eff + j];
    } else {
        out.cvecs.assign(full.n * keff, Cplx{0, 0});
        for (index_t i = 0; i < full.n; ++i)
            for (index_t j = 0; j < keff; ++j) out.cvecs[i * keff + j] = full.cvecs[i * full.k_eff + j];
    }
    return out;
}

} // namespace s2
