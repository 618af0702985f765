#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "s2/analysis.hpp"
#include "s2/graph.hpp"
#include "s2/rng.hpp"
#include "s2/spatial.hpp"
#include "s2/spectral.hpp"

using namespace s2;

TEST_CASE("chebyshev_fit reproduces a degree-2 polynomial exactly") {
    auto target = [](double x) { return 1.5 - 0.7 * x + 0.25 * x * x; };
    ChebyshevFit fit = chebyshev_fit(target, 2, 0.0, 2.0);
    for (double x = 0.0; x <= 2.0; x += 0.05)
        CHECK(std::abs(fit(x) - target(x)) < 1e-12);
    CHECK_THROWS_AS(chebyshev_fit(target, 2, 1.0, 1.0), Error);
}

TEST_CASE("chebyshev on 1/lambda over [0.1, 2]: error decays with fitted exponent <= -1") {
    FilterSpec t = FilterSpec::one_over_lambda();
    std::vector<index_t> ps = {4, 8, 16, 32, 64};
    std::vector<double> errs;
    for (auto p : ps) {
        ChebyshevFit fit = chebyshev_fit([&](double x) { return t(x); }, p, 0.1, 2.0);
        double worst = 0.0;
        for (index_t i = 0; i <= 4000; ++i) {
            const double x = 0.1 + 1.9 * i / 4000.0;
            worst = std::max(worst, std::abs(fit(x) - t(x)));
        }
        errs.push_back(worst);
    }
    const double slope = detail::fit_log_slope(ps, errs);
    MESSAGE("1/lambda decay exponent: ", slope);
    CHECK(slope <= -1.0);
}

TEST_CASE("indicator at 0: no Chebyshev degree up to 64 beats the half-jump floor") {
    FilterSpec t = FilterSpec::indicator0();
    for (index_t p : {1, 2, 4, 8, 16, 32, 64}) {
        ChebyshevFit fit = chebyshev_fit([&](double x) { return t(x); }, p, 0.0, 2.0);
        CHECK(sup_error_on_grid(fit, t, 0.0, 2.0) >= 0.45);
    }
}

TEST_CASE("approximation sweep: poly + jump target") {
    FilterSpec target = FilterSpec::poly_plus_jump({0.3, -0.8, 0.5, 0.2}, 1.0);
    std::vector<index_t> degrees = {3, 8, 16, 32, 64};
    ApproxSweep sweep = approximation_sweep(target, degrees, 0.3);
    // spatial branch plateaus above the half jump for every degree
    for (double e : sweep.spatial.grid_errors) CHECK(e >= 0.45);
    // the S^2 branch nails the smooth remainder once p >= 3
    for (std::size_t i = 0; i < degrees.size(); ++i)
        CHECK(sweep.s2.grid_errors[i] <= 1e-10);
    // truncated-spectral branch keeps the full tail error above the cut
    for (double e : sweep.spectral_truncated.grid_errors) CHECK(e > 0.1);
    // smooth target: all three converge and S^2 <= spatial everywhere
    FilterSpec smooth = FilterSpec::poly_plus_jump({0.1, 0.4, -0.2, 0.05}, 0.0);
    ApproxSweep s2 = approximation_sweep(smooth, degrees, 0.3);
    for (std::size_t i = 0; i < degrees.size(); ++i)
        CHECK(s2.s2.grid_errors[i] <= s2.spatial.grid_errors[i] + 1e-12);
}

TEST_CASE("approximation sweep: C^1 target decays at the Jackson rate (r=1 with slack)") {
    // |lambda - 1.2|^{1.5} has a bounded first derivative on [0.3, 2]
    FilterSpec target = FilterSpec::custom({}, {});
    std::vector<double> grid, samp;
    for (index_t i = 0; i <= 4000; ++i) {
        const double x = 2.0 * i / 4000.0;
        grid.push_back(x);
        samp.push_back(std::pow(std::abs(x - 1.2), 1.5));
    }
    target = FilterSpec::custom(grid, samp);
    std::vector<index_t> degrees = {4, 8, 16, 32, 64, 128};
    ApproxSweep sweep = approximation_sweep(target, degrees, 0.3);
    MESSAGE("S2 exponent: ", sweep.s2.fitted_exponent);
    CHECK(sweep.s2.fitted_exponent <= -0.7);
}

TEST_CASE("adversarial placement: operator error reaches the grid sup error") {
    FilterSpec target = FilterSpec::poly_plus_jump({0.3, -0.8, 0.5, 0.2}, 1.0);
    for (index_t p : {3, 16, 48}) {
        auto [grid_err, op_err] = adversarial_operator_error(target, p);
        CHECK(op_err >= grid_err - 1e-9);
    }
}

TEST_CASE("electrostatic filter: truncated sum equals 1/lambda within 1e-6") {
    for (double lam = 0.05; lam <= 2.0; lam += 0.0613) {
        const double g = electrostatic_filter(lam, std::numeric_limits<double>::infinity());
        CHECK(std::abs(g - 1.0 / lam) <= 1e-6);
    }
    CHECK(electrostatic_filter(1.0, std::numeric_limits<double>::infinity()) ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(electrostatic_filter(0.5, std::numeric_limits<double>::infinity()) ==
          doctest::Approx(2.0).epsilon(1e-9));
    CHECK_THROWS_AS(electrostatic_filter(0.0, std::numeric_limits<double>::infinity()), Error);
    CHECK_NOTHROW(electrostatic_filter(0.0, 3.0));  // finite sigma is continuously extended
}

TEST_CASE("electrostatic filter: finite-sigma derivative bounded by 1/lambda^2") {
    const double h = 1e-5, sigma = 3.0;
    for (double lam = 0.2; lam <= 1.99; lam += 0.0457) {
        const double d =
            (electrostatic_filter(lam + h, sigma, 2000) - electrostatic_filter(lam - h, sigma, 2000)) /
            (2.0 * h);
        CHECK(std::abs(d) <= 1.0 / (lam * lam) + 1e-9);
    }
}

TEST_CASE("ringing demo: unwindowed overshoot, windowed strictly smaller, constant exact") {
    RingingReport plain = ringing_demo(100, 25, WindowSpec::none());
    CHECK(plain.overshoot > 0.05);
    // full-band taper; narrow tapers do not suppress the overshoot here
    RingingReport windowed = ringing_demo(100, 25, WindowSpec::tukey(1.0));
    CHECK(windowed.overshoot < plain.overshoot);

    // constant input reconstructs exactly under any window with g(0) = 1:
    // handled by the lambda=0 mode alone
    Graph p = path_graph(60);
    SparseHermitian L = build_laplacian(p, LaplacianKind::random_walk());
    PartialEVD evd = dense_evd(L);
    std::vector<double> x(60, 1.0), xh(60, 0.0);
    for (index_t j = 0; j < 60; ++j)
        for (index_t i = 0; i < 60; ++i)
            xh[j] += evd.vecs[i * 60 + j] * L.similarity_scale[i] * x[i];
    for (index_t i = 0; i < 60; ++i) {
        double acc = 0.0;
        for (index_t j = 0; j < 25; ++j)
            acc += evd.vecs[i * 60 + j] * (evd.eigvals[j] < 1e-9 ? 1.0 : 1.0) * xh[j];
        // reconstruct with an ideal low pass: only mode 0 carries the constant
        double lowpass = 0.0;
        for (index_t j = 0; j < 25; ++j) lowpass += evd.vecs[i * 60 + j] * xh[j];
        CHECK(std::abs(lowpass / L.similarity_scale[i] - 1.0) < 1e-10);
        (void)acc;
    }
}

TEST_CASE("jacobian_sensitivity: identity model gives d on the diagonal, 0 off") {
    Tensor H0(5, 3, 0.0);
    Rng rng(1);
    for (auto& v : H0.v) v = rng.uniform(-1, 1);
    auto ident = [](ad::Tape& t, ad::VarId h) { return scale(t, h, 1.0); };
    CHECK(jacobian_sensitivity(ident, H0, 2, 2) == doctest::Approx(3.0));
    CHECK(jacobian_sensitivity(ident, H0, 1, 3) == doctest::Approx(0.0));
}

TEST_CASE("jacobian_sensitivity: l-layer GCN is exactly zero beyond l hops") {
    Graph g = path_graph(12);
    SparseHermitian L = build_laplacian(g, LaplacianKind::sym_normalized());
    Rng rng(2);
    const index_t d = 2, ell = 3;
    Tensor H0(12, d);
    for (auto& v : H0.v) v = rng.uniform(-1, 1);
    Tensor Wv(d, d);
    for (auto& v : Wv.v) v = rng.uniform(-1, 1);
    auto builder = [&](ad::Tape& t, ad::VarId h) {
        ad::VarId cur = h;
        for (index_t l = 0; l < ell; ++l) {
            GCNLayerVars p;
            p.W = t.leaf(Wv);
            p.b = t.leaf(Tensor(1, d, 0.1));
            p.gamma0 = t.leaf(Tensor::scalar(0.9));
            p.gamma1 = t.leaf(Tensor::scalar(-0.7));
            cur = gcn_forward(t, cur, &L, p, [](ad::Tape& a, ad::VarId b) { return ad::gelu(a, b); });
        }
        return cur;
    };
    CHECK(jacobian_sensitivity(builder, H0, 0, ell) > 0.0);
    CHECK(jacobian_sensitivity(builder, H0, 0, ell + 1) == 0.0);
    CHECK(jacobian_sensitivity(builder, H0, 0, 11) == 0.0);
}
