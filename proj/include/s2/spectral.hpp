#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "s2/common.hpp"
#include "s2/evd.hpp"
#include "s2/tensor.hpp"

namespace s2 {

// ---------------------------------------------------------------------------
// Windows
// ---------------------------------------------------------------------------

struct WindowSpec {
    enum class Kind { None, Tukey, Exponential };
    Kind kind = Kind::Tukey;
    double param = 0.2;  // Tukey taper fraction, or exponential rate

    static WindowSpec none() { return {Kind::None, 0.0}; }
    static WindowSpec tukey(double taper = 0.2) { return {Kind::Tukey, taper}; }
    static WindowSpec exponential(double rate) { return {Kind::Exponential, rate}; }

    // window value on [0, cut]; 0 beyond the cut (bandlimit rule)
    double operator()(double lam, double cut) const {
        if (lam > cut) return 0.0;
        switch (kind) {
            case Kind::None: return 1.0;
            case Kind::Exponential: return std::exp(-param * lam);
            case Kind::Tukey: {
                const double t0 = (1.0 - param) * cut;
                if (lam <= t0 || param <= 0.0) return 1.0;
                const double x = (lam - t0) / (param * cut);
                return 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(x, 1.0)));
            }
        }
        return 1.0;
    }
};

// ---------------------------------------------------------------------------
// Filter parametrization: Gaussian smearing + learned linear map + window
// ---------------------------------------------------------------------------

// Static configuration; the learned weight map W (z x f) and optional bias
// (1 x f) live in a ParamStore owned by the model.
struct SpectralFilterConfig {
    index_t z = 16;          // number of Gaussian basis functions
    double lam_cut = 2.0;    // frequency cutoff on the (transformed) axis
    double sigma_s = 0.0;    // smearing width; 0 -> center spacing
    index_t num_filters = 0; // f distinct filters, 0 -> one per channel
    index_t width = 0;       // d, output channels
    WindowSpec window = WindowSpec::tukey();
    EigTransform transform = EigTransform::none();
    bool smearing_bias = false;  // off by default

    double sigma() const {
        if (sigma_s > 0) return sigma_s;
        return (z > 1) ? lam_cut / static_cast<double>(z - 1) : std::max(lam_cut, 1e-12);
    }
    index_t filters() const { return num_filters > 0 ? std::min(num_filters, width) : width; }

    std::vector<double> centers() const {
        std::vector<double> c(z);
        for (index_t i = 0; i < z; ++i)
            c[i] = (z > 1) ? lam_cut * static_cast<double>(i) / static_cast<double>(z - 1) : 0.0;
        return c;
    }
};

// Unnormalized Gaussian basis: a center hit yields exactly 1.
inline Tensor smearing_matrix(const std::vector<double>& lam_in, const SpectralFilterConfig& cfg) {
    const auto cs = cfg.centers();
    const double s2 = 2.0 * cfg.sigma() * cfg.sigma();
    Tensor B(static_cast<index_t>(lam_in.size()), cfg.z);
    for (index_t i = 0; i < B.rows; ++i)
        for (index_t j = 0; j < cfg.z; ++j) {
            const double d = lam_in[i] - cs[j];
            B.at(i, j) = std::exp(-d * d / s2);
        }
    return B;
}

inline Tensor window_column(const std::vector<double>& lam, const SpectralFilterConfig& cfg) {
    Tensor w(static_cast<index_t>(lam.size()), 1);
    for (index_t i = 0; i < w.rows; ++i) w.at(i, 0) = cfg.window(lam[i], cfg.lam_cut);
    return w;
}

// round-robin filter-to-channel assignment, as an f x d selection matrix
inline Tensor expansion_matrix(index_t f, index_t d) {
    Tensor E(f, d);
    for (index_t j = 0; j < d; ++j) E.at(j % f, j) = 1.0;
    return E;
}

// Per-graph constant pieces of the filter evaluation.
struct SpectralPrep {
    std::vector<double> lam_t;  // transformed eigenvalues, size k_eff
    Tensor B;                   // k_eff x z smearing basis
    Tensor window;              // k_eff x 1
    Tensor expand;              // f x d
};

inline SpectralPrep spectral_prep(const std::vector<double>& eigvals, const SpectralFilterConfig& cfg) {
    SpectralPrep p;
    p.lam_t = eigenvalue_transform(eigvals, cfg.transform);
    p.B = smearing_matrix(p.lam_t, cfg);
    p.window = window_column(p.lam_t, cfg);
    p.expand = expansion_matrix(cfg.filters(), cfg.width);
    return p;
}

// Plain (tape-free) filter response: (B W + 1 b) .* window, expanded f -> d.
// Eigenvalues beyond the cutoff get response exactly 0 via the window rule.
inline Tensor filter_response(const std::vector<double>& eigvals, const SpectralFilterConfig& cfg,
                              const Tensor& W, const Tensor* bias = nullptr) {
    require(W.rows == cfg.z && W.cols == cfg.filters(), "filter weight shape mismatch");
    SpectralPrep p = spectral_prep(eigvals, cfg);
    Tensor rf = linalg::matmul(p.B, false, W, false);  // k x f
    if (cfg.smearing_bias && bias)
        for (index_t i = 0; i < rf.rows; ++i)
            for (index_t j = 0; j < rf.cols; ++j) rf.at(i, j) += bias->at(0, j);
    for (index_t i = 0; i < rf.rows; ++i)
        for (index_t j = 0; j < rf.cols; ++j) rf.at(i, j) *= p.window.at(i, 0);
    return linalg::matmul(rf, false, p.expand, false);  // k x d
}

// Tape variant; W (and bias) are tape vars.
inline ad::VarId filter_response_var(ad::Tape& t, const SpectralPrep& p, const SpectralFilterConfig& cfg,
                                     ad::VarId W, std::optional<ad::VarId> bias = {}) {
    ad::VarId B = t.leaf(p.B);
    ad::VarId rf = ad::matmul(t, B, W);
    if (cfg.smearing_bias && bias) rf = ad::add_rowvec(t, rf, *bias);
    rf = ad::mul_colvec(t, rf, t.leaf(p.window));
    return ad::matmul(t, rf, t.leaf(p.expand));
}

// ---------------------------------------------------------------------------
// Gating feature transform f_theta
// ---------------------------------------------------------------------------

// f(H) = H .* silu(H W_G + 1 b^T)
inline ad::VarId gate(ad::Tape& t, ad::VarId H, ad::VarId W_G, ad::VarId b) {
    ad::VarId pre = ad::add_rowvec(t, ad::matmul(t, H, W_G), b);
    return ad::mul(t, H, ad::silu(t, pre));
}

// complex gate: H .* (silu(H W_re + b_re) + i silu(H W_im + b_im))
inline ad::CVar gate_complex(ad::Tape& t, ad::VarId H, ad::VarId W_re, ad::VarId b_re,
                             ad::VarId W_im, ad::VarId b_im) {
    ad::VarId fre = ad::mul(t, H, ad::silu(t, ad::add_rowvec(t, ad::matmul(t, H, W_re), b_re)));
    ad::VarId fim = ad::mul(t, H, ad::silu(t, ad::add_rowvec(t, ad::matmul(t, H, W_im), b_im)));
    return {fre, fim};
}

// ---------------------------------------------------------------------------
// Spectral-domain neural network s_zeta (Eq. with gate K constant over rows)
// ---------------------------------------------------------------------------

// One layer: Hh <- (Hh .* sigmoid(1^T |Hh| W_gate)) W_lin, both maps bias-free.
// The gate factor is invariant to any elementwise sign pattern; the dense
// channel-mixing W_lin keeps row-wise (eigenvector gauge) sign equivariance.
struct SpectralMLPVars {
    std::vector<ad::VarId> gate_w;  // each d x d
    std::vector<ad::VarId> lin_w;   // each d x d
};

inline ad::VarId spectral_mlp(ad::Tape& t, ad::VarId Hh, const SpectralMLPVars& p) {
    ad::VarId cur = Hh;
    for (std::size_t l = 0; l < p.gate_w.size(); ++l) {
        ad::VarId K = ad::matmul(t, ad::colsum(t, ad::abs(t, cur)), p.gate_w[l]);  // 1 x d
        cur = ad::mul_rowvec(t, cur, ad::sigmoid(t, K));
        cur = ad::matmul(t, cur, p.lin_w[l]);
    }
    return cur;
}

// complex variant: the gate reads the modulus, multiplies both parts; linear
// maps are real and act on re/im separately.
inline ad::CVar spectral_mlp_complex(ad::Tape& t, ad::CVar Hh, const SpectralMLPVars& p) {
    ad::CVar cur = Hh;
    for (std::size_t l = 0; l < p.gate_w.size(); ++l) {
        ad::VarId mod = ad::sqrt_op(
            t, ad::add(t, ad::mul(t, cur.re, cur.re), ad::mul(t, cur.im, cur.im)));
        ad::VarId K = ad::matmul(t, ad::colsum(t, mod), p.gate_w[l]);
        ad::VarId s = ad::sigmoid(t, K);
        cur = {ad::mul_rowvec(t, cur.re, s), ad::mul_rowvec(t, cur.im, s)};
        cur = {ad::matmul(t, cur.re, p.lin_w[l]), ad::matmul(t, cur.im, p.lin_w[l])};
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Spectral normalization (per-column blend with the unit-norm signal)
// ---------------------------------------------------------------------------

// Hh_j <- (1 - a_j) Hh_j + a_j Hh_j / ||Hh_j||_2 ; zero columns pass through.
// `a` is a 1 x d var; values are clamped into [0, 1] by the caller/init.
inline ad::VarId spectral_normalize(ad::Tape& t, ad::VarId Hh, ad::VarId a) {
    const index_t rows = t.val(Hh).rows, cols = t.val(Hh).cols;
    Tensor invn(1, cols);
    {
        const Tensor& x = t.val(Hh);
        for (index_t c = 0; c < cols; ++c) {
            double s = 0.0;
            for (index_t r = 0; r < rows; ++r) s += x.at(r, c) * x.at(r, c);
            s = std::sqrt(s);
            invn.at(0, c) = (s > 1e-300) ? 1.0 / s : 0.0;  // zero column -> passthrough of 0
        }
    }
    // treat the norm as a constant w.r.t. the tape (stop-gradient on 1/||.||);
    // the blend itself stays differentiable in Hh and a
    ad::VarId inv = t.leaf(invn);
    ad::VarId one = t.leaf(Tensor(1, cols, 1.0));
    ad::VarId normed = ad::mul_rowvec(t, Hh, inv);
    ad::VarId keep = ad::mul_rowvec(t, Hh, ad::sub(t, one, a));
    return ad::add(t, keep, ad::mul_rowvec(t, normed, a));
}

inline ad::CVar spectral_normalize_complex(ad::Tape& t, ad::CVar Hh, ad::VarId a) {
    const index_t rows = t.val(Hh.re).rows, cols = t.val(Hh.re).cols;
    Tensor invn(1, cols);
    {
        const Tensor& xr = t.val(Hh.re);
        const Tensor& xi = t.val(Hh.im);
        for (index_t c = 0; c < cols; ++c) {
            double s = 0.0;
            for (index_t r = 0; r < rows; ++r)
                s += xr.at(r, c) * xr.at(r, c) + xi.at(r, c) * xi.at(r, c);
            s = std::sqrt(s);
            invn.at(0, c) = (s > 1e-300) ? 1.0 / s : 0.0;
        }
    }
    ad::VarId inv = t.leaf(invn);
    ad::VarId one = t.leaf(Tensor(1, cols, 1.0));
    ad::VarId oneminus = ad::sub(t, one, a);
    auto blend = [&](ad::VarId part) {
        return ad::add(t, ad::mul_rowvec(t, part, oneminus),
                       ad::mul_rowvec(t, ad::mul_rowvec(t, part, inv), a));
    };
    return {blend(Hh.re), blend(Hh.im)};
}

// ---------------------------------------------------------------------------
// Spectral readout: sum over k of |Hh| (modulus in the complex case)
// ---------------------------------------------------------------------------

inline ad::VarId spectral_readout(ad::Tape& t, ad::VarId Hh) { return ad::colsum(t, ad::abs(t, Hh)); }

inline ad::VarId spectral_readout_complex(ad::Tape& t, ad::CVar Hh) {
    ad::VarId mod =
        ad::sqrt_op(t, ad::add(t, ad::mul(t, Hh.re, Hh.re), ad::mul(t, Hh.im, Hh.im)));
    return ad::colsum(t, mod);
}

// ---------------------------------------------------------------------------
// The spectral layer forward: V ( g(lambda) .* [V^H f(H)] )
// ---------------------------------------------------------------------------

struct EVDTensors {
    Tensor Vre;  // n x k_eff
    Tensor Vim;  // n x k_eff, zero-size if real
    bool complex_vectors = false;
};

inline EVDTensors evd_tensors(const PartialEVD& evd) {
    EVDTensors out;
    out.complex_vectors = evd.complex_vectors;
    out.Vre = Tensor(evd.n, evd.k_eff);
    if (evd.complex_vectors) {
        out.Vim = Tensor(evd.n, evd.k_eff);
        for (index_t i = 0; i < evd.n; ++i)
            for (index_t j = 0; j < evd.k_eff; ++j) {
                out.Vre.at(i, j) = evd.cvecs[i * evd.k_eff + j].re;
                out.Vim.at(i, j) = evd.cvecs[i * evd.k_eff + j].im;
            }
    } else {
        for (index_t i = 0; i < evd.n; ++i)
            for (index_t j = 0; j < evd.k_eff; ++j) out.Vre.at(i, j) = evd.vecs[i * evd.k_eff + j];
    }
    return out;
}

// Real path. F is the gated feature map (n x d); response is k_eff x d.
// Optional spectral MLP and normalization act between analysis and synthesis.
struct SpectralStageOpts {
    const SpectralMLPVars* mlp = nullptr;
    std::optional<ad::VarId> norm_a;           // 1 x d blend weights
    ad::VarId* readout_accum = nullptr;        // out-param: spectral readout (1 x d)
};

inline ad::VarId spectral_forward_real(ad::Tape& t, ad::VarId F, const EVDTensors& V,
                                       ad::VarId response, const SpectralStageOpts& opts = {}) {
    require(!V.complex_vectors, "spectral_forward_real needs a real eigenbasis");
    ad::VarId Vre = t.leaf(V.Vre);
    ad::VarId Hh = ad::matmul(t, Vre, F, /*tA=*/true);  // k x d
    Hh = ad::mul(t, response, Hh);
    if (opts.norm_a) Hh = spectral_normalize(t, Hh, *opts.norm_a);
    if (opts.mlp) Hh = spectral_mlp(t, Hh, *opts.mlp);
    if (opts.readout_accum) *opts.readout_accum = spectral_readout(t, Hh);
    return ad::matmul(t, Vre, Hh);  // n x d
}

// Complex path: Hh = V^H F with F = Fre + i Fim; output mapped back to the
// real domain by the caller via w_re, w_im.
inline ad::CVar spectral_forward_complex(ad::Tape& t, ad::CVar F, const EVDTensors& V,
                                         ad::VarId response, const SpectralStageOpts& opts = {}) {
    require(V.complex_vectors, "spectral_forward_complex needs a complex eigenbasis");
    ad::VarId Vre = t.leaf(V.Vre);
    ad::VarId Vim = t.leaf(V.Vim);
    // V^H F = (Vre^T - i Vim^T)(Fre + i Fim)
    ad::VarId hr = ad::add(t, ad::matmul(t, Vre, F.re, true), ad::matmul(t, Vim, F.im, true));
    ad::VarId hi = ad::sub(t, ad::matmul(t, Vre, F.im, true), ad::matmul(t, Vim, F.re, true));
    ad::CVar Hh{ad::mul(t, response, hr), ad::mul(t, response, hi)};
    if (opts.norm_a) Hh = spectral_normalize_complex(t, Hh, *opts.norm_a);
    if (opts.mlp) Hh = spectral_mlp_complex(t, Hh, *opts.mlp);
    if (opts.readout_accum) *opts.readout_accum = spectral_readout_complex(t, Hh);
    // Y = V Hh = (Vre + i Vim)(hr + i hi)
    ad::VarId yr = ad::sub(t, ad::matmul(t, Vre, Hh.re), ad::matmul(t, Vim, Hh.im));
    ad::VarId yi = ad::add(t, ad::matmul(t, Vre, Hh.im), ad::matmul(t, Vim, Hh.re));
    return {yr, yi};
}

// ---------------------------------------------------------------------------
// Plain (tape-free) spectral application for tests and analysis:
// Y = V (resp .* (V^H X))
// ---------------------------------------------------------------------------

inline Tensor spectral_apply_plain(const PartialEVD& evd, const Tensor& resp, const Tensor& X) {
    require(X.rows == evd.n, "ShapeMismatch: spectral_apply_plain");
    require(resp.rows == evd.k_eff && resp.cols == X.cols, "response shape mismatch");
    if (!evd.complex_vectors) {
        EVDTensors V = evd_tensors(evd);
        Tensor Hh = linalg::matmul(V.Vre, true, X, false);
        for (index_t i = 0; i < Hh.rows; ++i)
            for (index_t j = 0; j < Hh.cols; ++j) Hh.at(i, j) *= resp.at(i, j);
        return linalg::matmul(V.Vre, false, Hh, false);
    }
    EVDTensors V = evd_tensors(evd);
    Tensor hr = linalg::matmul(V.Vre, true, X, false);
    Tensor hi = linalg::matmul(V.Vim, true, X, false);
    for (index_t i = 0; i < hr.rows; ++i)
        for (index_t j = 0; j < hr.cols; ++j) {
            hr.at(i, j) *= resp.at(i, j);
            hi.at(i, j) *= -resp.at(i, j);  // V^H X has -Vim^T X in the imag part
        }
    // real part of V Hh
    Tensor out = linalg::matmul(V.Vre, false, hr, false);
    Tensor t2 = linalg::matmul(V.Vim, false, hi, false);
    for (index_t i = 0; i < out.size(); ++i) out.v[i] -= t2.v[i];
    return out;
}

} // namespace s2
