#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "s2/common.hpp"
#include "s2/evd.hpp"
#include "s2/graph.hpp"
#include "s2/sparse.hpp"
#include "s2/spectral.hpp"
#include "s2/tensor.hpp"

namespace s2 {

// ---------------------------------------------------------------------------
// Closed-form target filters on [0, 2]
// ---------------------------------------------------------------------------

struct FilterSpec {
    enum class Kind { Indicator0, PolyPlusJump, OneOverLambda, ElectrostaticSigma, Custom };
    Kind kind = Kind::Indicator0;
    std::vector<double> coeffs;  // PolyPlusJump polynomial coefficients (ascending)
    double jump = 1.0;           // PolyPlusJump jump height at lambda = 0
    double sigma = 3.0;          // ElectrostaticSigma
    std::vector<double> grid, samples;  // Custom: piecewise-linear samples

    static FilterSpec indicator0() { return {Kind::Indicator0, {}, 1.0, 3.0, {}, {}}; }
    static FilterSpec poly_plus_jump(std::vector<double> c, double j) {
        return {Kind::PolyPlusJump, std::move(c), j, 3.0, {}, {}};
    }
    static FilterSpec one_over_lambda() { return {Kind::OneOverLambda, {}, 1.0, 3.0, {}, {}}; }
    static FilterSpec electrostatic(double s) { return {Kind::ElectrostaticSigma, {}, 1.0, s, {}, {}}; }
    static FilterSpec custom(std::vector<double> g, std::vector<double> s) {
        return {Kind::Custom, {}, 1.0, 3.0, std::move(g), std::move(s)};
    }

    double operator()(double lam) const;
};

// ---------------------------------------------------------------------------
// Electrostatic ground-truth filter (Brillouin-zone sum)
// ---------------------------------------------------------------------------

// g_sigma(lam) = (1/2pi) sum_m phi_sigma(arccos(1-lam)/(2pi) + m), truncated at
// |m| <= m_max with the analytic polygamma tail folded in so the truncation
// error is O(m_max^-3). sigma = infinity uses phi(k) = 1/(pi k^2) and equals
// 1/lam exactly.
inline double electrostatic_filter(double lam, double sigma, index_t m_max = 10000) {
    require(m_max >= 100, "m_max truncation too small");
    const bool inf_sigma = !(sigma > 0.0) || std::isinf(sigma);
    if (lam <= 0.0) {
        if (inf_sigma) throw Error("LambdaZero: 1/lambda diverges at 0");
        lam = 0.0;
    }
    require(lam <= 2.0 + 1e-12, "lambda outside (0, 2]");
    const double pi = 3.14159265358979323846;
    const double x = std::clamp(1.0 - lam, -1.0, 1.0);
    const double z = std::atan2(std::sqrt(std::max(0.0, 1.0 - x * x)), x) / (2.0 * pi);
    auto phi_hat = [&](double kappa) {
        if (inf_sigma) return 1.0 / (pi * kappa * kappa);
        if (std::abs(kappa) < 1e-12) return sigma * sigma / (2.0 * pi);  // continuous extension
        const double k2 = kappa * kappa;
        return (1.0 - std::exp(-0.5 * sigma * sigma * k2)) / (pi * k2);
    };
    double s = 0.0;
    for (index_t m = 0; m <= m_max; ++m) {
        s += phi_hat(z + static_cast<double>(m));
        s += phi_hat(1.0 - z + static_cast<double>(m));
    }
    // polygamma tail: sum_{m > M} 1/(x+m)^2 ~ 1/X + 1/(2 X^2) + 1/(6 X^3), X = x + M + 1
    for (double x0 : {z, 1.0 - z}) {
        const double X = x0 + static_cast<double>(m_max) + 1.0;
        s += (1.0 / X + 1.0 / (2.0 * X * X) + 1.0 / (6.0 * X * X * X)) / pi;
    }
    return s / (2.0 * pi);
}

inline double FilterSpec::operator()(double lam) const {
    switch (kind) {
        case Kind::Indicator0: return lam <= 1e-12 ? 1.0 : 0.0;
        case Kind::PolyPlusJump: {
            double p = 0.0;
            for (index_t j = static_cast<index_t>(coeffs.size()); j-- > 0;) p = p * lam + coeffs[j];
            return p + (lam <= 1e-12 ? jump : 0.0);
        }
        case Kind::OneOverLambda:
            require(lam > 0, "OneOverLambda undefined at 0");
            return 1.0 / lam;
        case Kind::ElectrostaticSigma: return electrostatic_filter(lam, sigma);
        case Kind::Custom: {
            require(grid.size() >= 2 && grid.size() == samples.size(), "bad Custom filter");
            if (lam <= grid.front()) return samples.front();
            if (lam >= grid.back()) return samples.back();
            auto it = std::upper_bound(grid.begin(), grid.end(), lam);
            const std::size_t i = static_cast<std::size_t>(it - grid.begin());
            const double t = (lam - grid[i - 1]) / (grid[i] - grid[i - 1]);
            return samples[i - 1] + t * (samples[i] - samples[i - 1]);
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Chebyshev interpolation (the polynomial oracle; within a constant of minimax)
// ---------------------------------------------------------------------------

struct ChebyshevFit {
    std::vector<double> coeffs;  // Chebyshev-basis coefficients
    double a = 0.0, b = 2.0;

    double operator()(double x) const {
        const double t = (2.0 * x - (a + b)) / (b - a);
        double b1 = 0.0, b2 = 0.0;
        for (index_t k = static_cast<index_t>(coeffs.size()) - 1; k >= 1; --k) {
            const double tmp = 2.0 * t * b1 - b2 + coeffs[k];
            b2 = b1;
            b1 = tmp;
        }
        return t * b1 - b2 + coeffs[0];
    }
};

inline ChebyshevFit chebyshev_fit(const std::function<double(double)>& target, index_t degree,
                                  double a, double b) {
    require(degree >= 0, "degree must be nonnegative");
    if (!(b > a)) throw Error("DegenerateInterval");
    const index_t m = degree + 1;
    const double pi = 3.14159265358979323846;
    std::vector<double> y(m);
    for (index_t j = 0; j < m; ++j) {
        const double xj = std::cos((2.0 * j + 1.0) * pi / (2.0 * m));
        y[j] = target(0.5 * (b - a) * xj + 0.5 * (a + b));
    }
    ChebyshevFit fit;
    fit.a = a;
    fit.b = b;
    fit.coeffs.assign(m, 0.0);
    for (index_t k = 0; k < m; ++k) {
        double s = 0.0;
        for (index_t j = 0; j < m; ++j) s += y[j] * std::cos(k * (2.0 * j + 1.0) * pi / (2.0 * m));
        fit.coeffs[k] = 2.0 / m * s;
    }
    fit.coeffs[0] *= 0.5;
    return fit;
}

// sup error on a dense grid; the discontinuity at 0 is probed from both sides
inline double sup_error_on_grid(const std::function<double(double)>& approx, const FilterSpec& target,
                                double a, double b, index_t points = 10000) {
    double worst = 0.0;
    for (index_t i = 0; i <= points; ++i) {
        const double lam = a + (b - a) * static_cast<double>(i) / static_cast<double>(points);
        worst = std::max(worst, std::abs(approx(lam) - target(lam)));
    }
    if (a == 0.0) {
        worst = std::max(worst, std::abs(approx(0.0) - target(0.0)));
        worst = std::max(worst, std::abs(approx(1e-9) - target(1e-9)));  // one-sided limit
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Approximation sweep (spatial vs truncated-spectral vs S^2)
// ---------------------------------------------------------------------------

struct ApproxReport {
    std::vector<index_t> degrees;
    std::vector<double> grid_errors;
    std::vector<double> operator_errors;  // on the probe graph's spectrum
    double fitted_exponent = 0.0;
};

namespace detail {
inline double fit_log_slope(const std::vector<index_t>& xs, const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    index_t n = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(ys[i] > 1e-13)) continue;  // numerical floor
        const double lx = std::log(static_cast<double>(xs[i])), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return -std::numeric_limits<double>::infinity();
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}
} // namespace detail

struct ApproxSweep {
    ApproxReport spatial, spectral_truncated, s2;
};

// Errors are evaluated on the [0,2] grid and as operator error on a probe
// graph (max |approx - target| over the probe's eigenvalues; the Fig.-4
// setting uses the 21-node path with the random-walk Laplacian).
inline ApproxSweep approximation_sweep(const FilterSpec& target, const std::vector<index_t>& degrees,
                                       double lam_cut, index_t probe_path_n = 21) {
    require(lam_cut > 0.0 && lam_cut < 2.0, "lam_cut must be inside (0,2)");
    ApproxSweep out;
    out.spatial.degrees = out.spectral_truncated.degrees = out.s2.degrees = degrees;

    Graph probe = path_graph(probe_path_n);
    PartialEVD pevd = dense_evd(build_laplacian(probe, LaplacianKind::random_walk()));

    auto op_error = [&](const std::function<double(double)>& approx) {
        double worst = 0.0;
        for (double lam : pevd.eigvals) worst = std::max(worst, std::abs(approx(lam) - target(lam)));
        return worst;
    };

    // truncated-spectral branch: exact below the cut, zero above (degree-free)
    auto spec_only = [&](double lam) { return lam <= lam_cut ? target(lam) : 0.0; };

    for (index_t p : degrees) {
        ChebyshevFit spat = chebyshev_fit([&](double x) { return target(x); }, p, 0.0, 2.0);
        out.spatial.grid_errors.push_back(sup_error_on_grid(spat, target, 0.0, 2.0));
        out.spatial.operator_errors.push_back(op_error(spat));

        out.spectral_truncated.grid_errors.push_back(sup_error_on_grid(spec_only, target, 0.0, 2.0));
        out.spectral_truncated.operator_errors.push_back(op_error(spec_only));

        ChebyshevFit tail = chebyshev_fit([&](double x) { return target(x); }, p, lam_cut, 2.0);
        auto s2fn = [&](double lam) { return lam <= lam_cut ? target(lam) : tail(lam); };
        out.s2.grid_errors.push_back(sup_error_on_grid(s2fn, target, 0.0, 2.0));
        out.s2.operator_errors.push_back(op_error(s2fn));
    }
    out.spatial.fitted_exponent = detail::fit_log_slope(degrees, out.spatial.grid_errors);
    out.spectral_truncated.fitted_exponent =
        detail::fit_log_slope(degrees, out.spectral_truncated.grid_errors);
    out.s2.fitted_exponent = detail::fit_log_slope(degrees, out.s2.grid_errors);
    return out;
}

// Adversarial placement: realize the worst grid point of |fit - target| as an
// actual graph eigenvalue (alternating-weight C4 gadget covers all of [0,2]).
// Returns (grid sup error, operator error on the adversarial graph).
inline std::pair<double, double> adversarial_operator_error(const FilterSpec& target, index_t degree) {
    ChebyshevFit fit = chebyshev_fit([&](double x) { return target(x); }, degree, 0.0, 2.0);
    double worst = 0.0, arg = 0.0;
    const index_t points = 10000;
    for (index_t i = 0; i <= points; ++i) {
        const double lam = 2.0 * static_cast<double>(i) / static_cast<double>(points);
        const double e = std::abs(fit(lam) - target(lam));
        if (e > worst) {
            worst = e;
            arg = lam;
        }
    }
    Graph adv = graph_with_eigenvalue(arg);
    PartialEVD evd = dense_evd(build_laplacian(adv, LaplacianKind::sym_normalized()));
    double op = 0.0;
    for (double lam : evd.eigvals) op = std::max(op, std::abs(fit(lam) - target(lam)));
    return {worst, op};
}

// ---------------------------------------------------------------------------
// Ringing demo (ideal low-pass on a path graph, with and without a window)
// ---------------------------------------------------------------------------

struct RingingReport {
    std::vector<double> response;  // per-node reconstruction
    double overshoot = 0.0;        // max response minus the top plateau (1.0)
};

inline RingingReport ringing_demo(index_t n, index_t cutoff_k, WindowSpec window) {
    require(n >= 8 && cutoff_k >= 1 && cutoff_k <= n, "bad ringing configuration");
    Graph p = path_graph(n);
    SparseHermitian L = build_laplacian(p, LaplacianKind::random_walk());
    PartialEVD evd = dense_evd(L);  // eigvecs of the symmetric core
    const auto& s = L.similarity_scale;

    std::vector<double> x(n, 0.0);
    for (index_t i = n / 4; i < 3 * n / 4; ++i) x[i] = 1.0;

    // L_rw eigvecs: D^{-1/2} W; analysis uses W^T D^{1/2} x
    std::vector<double> xh(n, 0.0);
    for (index_t j = 0; j < n; ++j)
        for (index_t i = 0; i < n; ++i) xh[j] += evd.vecs[i * n + j] * s[i] * x[i];
    const double lam_cut = evd.eigvals[cutoff_k - 1] * (1.0 + 1e-12);
    std::vector<double> g(n, 0.0);
    for (index_t j = 0; j < cutoff_k; ++j) g[j] = window(evd.eigvals[j], lam_cut);

    RingingReport rep;
    rep.response.assign(n, 0.0);
    for (index_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (index_t j = 0; j < cutoff_k; ++j) acc += evd.vecs[i * n + j] * g[j] * xh[j];
        rep.response[i] = acc / s[i];
    }
    double mx = -1e300;
    for (double y : rep.response) mx = std::max(mx, y);
    rep.overshoot = mx - 1.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Jacobian sensitivity via reverse-mode sweeps
// ---------------------------------------------------------------------------

// ||d h_v / d h_u||_{L1} for a differentiable map builder(tape, input) built on
// top of the n x d input features; runs one backward pass per output channel.
inline double jacobian_sensitivity(
    const std::function<ad::VarId(ad::Tape&, ad::VarId)>& builder, const Tensor& H0, index_t u,
    index_t v) {
    ad::Tape t;
    ad::VarId h0 = t.leaf(H0, /*requires_grad=*/true);
    ad::VarId out = builder(t, h0);
    const Tensor& val = t.val(out);
    require(v >= 0 && v < val.rows && u >= 0 && u < H0.rows, "node index out of range");
    double total = 0.0;
    for (index_t i = 0; i < val.cols; ++i) {
        t.reset_grads();
        Tensor seed(val.rows, val.cols);
        seed.at(v, i) = 1.0;
        t.backward_seeded(out, seed);
        if (t.has_grad(h0)) {
            const Tensor& g = t.grad(h0);
            for (index_t j = 0; j < H0.cols; ++j) total += std::abs(g.at(u, j));
        }
    }
    return total;
}

} // namespace s2
