#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "s2/evd.hpp"
#include "s2/graph.hpp"
#include "s2/rng.hpp"
#include "s2/sparse.hpp"

using namespace s2;

namespace {

Graph random_connected_graph(index_t n, double extra_p, Rng& rng) {
    GraphBuilder gb(n, false);
    for (index_t v = 1; v < n; ++v) gb.add_edge(v, rng.uniform_int(0, v - 1));  // random tree backbone
    for (index_t u = 0; u < n; ++u)
        for (index_t v = u + 1; v < n; ++v)
            if (rng.uniform() < extra_p) gb.add_edge(u, v);
    return symmetrize(gb.build());
}

double subspace_angle_defect(const PartialEVD& a, const PartialEVD& b, index_t k) {
    // || Va^T Vb || close to identity in singular values when subspaces agree;
    // we check the projector difference on the first k columns instead.
    double worst = 0.0;
    for (index_t i = 0; i < a.n; ++i)
        for (index_t j = 0; j < a.n; ++j) {
            double pa = 0.0, pb = 0.0;
            for (index_t c = 0; c < k; ++c) {
                pa += a.vecs[i * a.k_eff + c] * a.vecs[j * a.k_eff + c];
                pb += b.vecs[i * b.k_eff + c] * b.vecs[j * b.k_eff + c];
            }
            worst = std::max(worst, std::abs(pa - pb));
        }
    return worst;
}

} // namespace

TEST_CASE("dense_evd: 1x1 matrix") {
    GraphBuilder gb(1, false);
    Graph g = gb.build();
    SparseHermitian L = build_laplacian(g, LaplacianKind::unnormalized());
    PartialEVD evd = dense_evd(L);
    REQUIRE(evd.eigvals.size() == 1);
    CHECK(evd.eigvals[0] == doctest::Approx(0.0));
}

TEST_CASE("dense_evd: size guard") {
    SparseHermitian L;
    L.n = 600;
    CHECK_THROWS_AS(dense_evd(L), Error);
}

TEST_CASE("partial_evd: C4 k=2 drop rule keeps only {0}") {
    SparseHermitian L = build_laplacian(cycle_graph(4), LaplacianKind::sym_normalized());
    PartialEVD evd = partial_evd(L, 2);
    CHECK(evd.k_requested == 2);
    CHECK(evd.k_eff == 1);
    CHECK(evd.eigvals[0] == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(evd.lambda_next == doctest::Approx(1.0));
}

TEST_CASE("partial_evd: P3 RandomWalk keeps {0, 1}") {
    SparseHermitian L = build_laplacian(path_graph(3), LaplacianKind::random_walk());
    PartialEVD evd = partial_evd(L, 2);
    CHECK(evd.k_eff == 2);
    CHECK(evd.eigvals[0] == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(evd.eigvals[1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(evd.lambda_next == doctest::Approx(2.0));
}

TEST_CASE("partial_evd: lowest eigenvector of connected SymNormalized graph is D^{1/2} 1") {
    Rng rng(5);
    Graph g = random_connected_graph(40, 0.05, rng);
    SparseHermitian L = build_laplacian(g, LaplacianKind::sym_normalized());
    PartialEVD evd = partial_evd(L, 3);
    CHECK(evd.eigvals[0] == doctest::Approx(0.0).epsilon(1e-10));
    std::vector<double> deg(g.n, 0.0);
    for (index_t u = 0; u < g.n; ++u) deg[u] = g.out_degree(u);
    double twoE = 0.0;
    for (double d : deg) twoE += d;
    // eigenvector equals sqrt(d_u / 2|E|) up to sign
    const double sgn = evd.vecs[0 * evd.k_eff + 0] >= 0 ? 1.0 : -1.0;
    for (index_t u = 0; u < g.n; ++u)
        CHECK(sgn * evd.vecs[u * evd.k_eff + 0] ==
              doctest::Approx(std::sqrt(deg[u] / twoE)).epsilon(1e-8));
}

TEST_CASE("partial_evd errors") {
    SparseHermitian L = build_laplacian(path_graph(6), LaplacianKind::sym_normalized());
    CHECK_THROWS_AS(partial_evd(L, 0), Error);
    CHECK_THROWS_AS(partial_evd(L, 6), Error);
}

TEST_CASE("oracle equivalence on random graphs incl. repeated eigenvalues") {
    Rng rng(11);
    for (int trial = 0; trial < 12; ++trial) {
        const index_t n = 20 + static_cast<index_t>(rng.uniform_int(0, 180));
        Graph g = random_connected_graph(n, 3.0 / static_cast<double>(n), rng);
        SparseHermitian L = build_laplacian(g, LaplacianKind::sym_normalized());
        const index_t k = 5;
        LanczosConfig cfg;
        cfg.seed = 1000 + trial;
        PartialEVD lz = partial_evd(L, k, cfg);
        PartialEVD dn = dense_evd(L);
        for (index_t j = 0; j < lz.k_eff; ++j)
            CHECK(lz.eigvals[j] == doctest::Approx(dn.eigvals[j]).epsilon(1e-8));
        for (double r : lz.residuals) CHECK(r <= 1e-8);
        CHECK(lz.max_orthonormality_defect() <= 1e-8);
    }
}

TEST_CASE("oracle equivalence: cycles with degenerate pairs") {
    for (index_t n : {6, 10, 16}) {
        SparseHermitian L = build_laplacian(cycle_graph(n), LaplacianKind::sym_normalized());
        PartialEVD lz = partial_evd(L, 4);
        PartialEVD dn = dense_evd(L);
        for (index_t j = 0; j < lz.k_eff; ++j)
            CHECK(lz.eigvals[j] == doctest::Approx(dn.eigvals[j]).epsilon(1e-9));
        // no eigenspace split: every kept value differs from lambda_next by > eq_tol
        for (index_t j = 0; j < lz.k_eff; ++j)
            CHECK(std::abs(lz.eigvals[j] - lz.lambda_next) > 1e-8);
    }
}

TEST_CASE("subspace agreement via projectors on clean-gap spectra") {
    Rng rng(17);
    Graph g = random_connected_graph(60, 0.08, rng);
    SparseHermitian L = build_laplacian(g, LaplacianKind::sym_normalized());
    PartialEVD lz = partial_evd(L, 6);
    PartialEVD dn = dense_evd(L);
    // compare spectral projectors on the kept band (gauge-invariant)
    index_t k = lz.k_eff;
    PartialEVD dn_cut = truncate_with_drop(dn, lz.k_requested);
    REQUIRE(dn_cut.k_eff == k);
    CHECK(subspace_angle_defect(lz, dn_cut, k) < 1e-6);
}

TEST_CASE("complex Hermitian path: magnetic cycle eigenvalues") {
    // directed cycle C_n with potential q: eigenvalues 1 - cos(2 pi (k + q n)/n)
    const index_t n = 8;
    const double q = 0.03;
    GraphBuilder gb(n, true);
    for (index_t i = 0; i < n; ++i) gb.add_edge(i, (i + 1) % n);
    SparseHermitian L = build_laplacian(gb.build(), LaplacianKind::magnetic(q));
    PartialEVD dn = dense_evd(L);
    std::vector<double> expect;
    for (index_t k = 0; k < n; ++k)
        expect.push_back(1.0 -
                         std::cos(2.0 * 3.14159265358979323846 * (static_cast<double>(k) + q * n) / n));
    std::sort(expect.begin(), expect.end());
    for (index_t j = 0; j < n; ++j) CHECK(dn.eigvals[j] == doctest::Approx(expect[j]).epsilon(1e-9));

    PartialEVD lz = partial_evd(L, 3);
    for (index_t j = 0; j < lz.k_eff; ++j)
        CHECK(lz.eigvals[j] == doctest::Approx(dn.eigvals[j]).epsilon(1e-8));
    CHECK(lz.max_orthonormality_defect() <= 1e-8);
    // Hermitian inputs yield real eigenvalues: Rayleigh-quotient imaginary part
    for (index_t j = 0; j < lz.k_eff; ++j) {
        std::vector<Cplx> x(n), y(n);
        for (index_t i = 0; i < n; ++i) x[i] = lz.cvecs[i * lz.k_eff + j];
        L.apply_core(x.data(), y.data());
        Cplx rq{0, 0};
        for (index_t i = 0; i < n; ++i) rq += conj(x[i]) * y[i];
        CHECK(std::abs(rq.im) <= 1e-12);
    }
}

TEST_CASE("determinism: same seed gives bitwise-identical eigenvalues") {
    Rng rng(23);
    Graph g = random_connected_graph(80, 0.05, rng);
    SparseHermitian L = build_laplacian(g, LaplacianKind::sym_normalized());
    LanczosConfig cfg;
    cfg.seed = 7;
    PartialEVD a = partial_evd(L, 5, cfg);
    PartialEVD b = partial_evd(L, 5, cfg);
    REQUIRE(a.k_eff == b.k_eff);
    for (index_t j = 0; j < a.k_eff; ++j) CHECK(a.eigvals[j] == b.eigvals[j]);  // bitwise
    for (index_t i = 0; i < a.n * a.k_eff; ++i) CHECK(a.vecs[i] == b.vecs[i]);
}

TEST_CASE("eigenvalue_transform") {
    EigTransform ac = EigTransform::arccos();
    CHECK(ac(1.0) == doctest::Approx(0.5));
    CHECK(ac(0.0) == doctest::Approx(0.0));
    CHECK(ac(2.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(ac(2.5), Error);

    // path-graph eigenvalues are exactly 1 - cos(pi j/(n-1)); NArccos(n) maps
    // them to j n/(n-1), i.e. approximately the mode index j
    const index_t n = 30;
    PartialEVD evd = dense_evd(build_laplacian(path_graph(n), LaplacianKind::sym_normalized()));
    auto mapped = eigenvalue_transform(evd.eigvals, EigTransform::n_arccos(static_cast<double>(n)));
    for (index_t j = 0; j < n; ++j) {
        // absolute tolerance: arccos amplifies fp noise near lambda = 0 as sqrt
        CHECK(std::abs(mapped[j] - static_cast<double>(j) * n / (n - 1.0)) <= 1e-5);
        CHECK(std::abs(mapped[j] - static_cast<double>(j)) <= 1.0 + 1e-5);
    }
}

TEST_CASE("random symmetric 20x20: Lanczos k=5 matches dense to 1e-8") {
    // a dense random symmetric matrix exercises the solver beyond Laplacians
    Rng rng(31);
    const index_t n = 20;
    std::vector<double> A(n * n, 0.0);
    for (index_t i = 0; i < n; ++i)
        for (index_t j = i; j < n; ++j) A[i * n + j] = A[j * n + i] = rng.uniform(-1.0, 1.0);
    SparseHermitian M;
    M.n = n;
    M.row_ptr.resize(n + 1);
    for (index_t i = 0; i < n; ++i) {
        M.row_ptr[i] = static_cast<index_t>(M.col.size());
        for (index_t j = 0; j < n; ++j) {
            M.col.push_back(j);
            M.re.push_back(A[i * n + j]);
        }
    }
    M.row_ptr[n] = static_cast<index_t>(M.col.size());
    PartialEVD lz = partial_evd(M, 5);
    PartialEVD dn = dense_evd(M);
    for (index_t j = 0; j < lz.k_eff; ++j)
        CHECK(lz.eigvals[j] == doctest::Approx(dn.eigvals[j]).epsilon(1e-8));
}
