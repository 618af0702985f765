#pragma once

#include <cmath>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "s2/common.hpp"
#include "s2/sparse.hpp"

namespace s2 {

// Dense row-major f64 matrix; scalars are 1x1, row vectors 1xd.
struct Tensor {
    index_t rows = 0, cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(index_t r, index_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    static Tensor scalar(double x) {
        Tensor t(1, 1);
        t.v[0] = x;
        return t;
    }

    index_t size() const { return rows * cols; }
    double& at(index_t r, index_t c) { return v[r * cols + c]; }
    double at(index_t r, index_t c) const { return v[r * cols + c]; }
    double item() const {
        require(size() == 1, "item() needs a scalar tensor");
        return v[0];
    }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

inline index_t env_threads() {
    static index_t cached = [] {
        const char* s = std::getenv("S2_THREADS");
        if (!s) return index_t{1};
        const long v = std::strtol(s, nullptr, 10);
        return v >= 1 ? static_cast<index_t>(v) : index_t{1};
    }();
    return cached;
}

// Row-partitioned parallel loop. The partition depends only on the row count
// and thread cap, and each output row is written by exactly one thread, so
// results are bitwise deterministic.
template <typename F>
void parallel_rows(index_t rows, F&& body, index_t min_rows_per_thread = 64) {
    const index_t want = env_threads();
    if (want <= 1 || rows < 2 * min_rows_per_thread) {
        body(index_t{0}, rows);
        return;
    }
    const index_t nt = std::min(want, std::max<index_t>(1, rows / min_rows_per_thread));
    std::vector<std::thread> ts;
    const index_t chunk = (rows + nt - 1) / nt;
    for (index_t t = 0; t < nt; ++t) {
        const index_t lo = t * chunk, hi = std::min(rows, lo + chunk);
        if (lo >= hi) break;
        ts.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& th : ts) th.join();
}

namespace linalg {

inline void matmul_into(const Tensor& A, bool tA, const Tensor& B, bool tB, Tensor& C) {
    const index_t m = tA ? A.cols : A.rows;
    const index_t k = tA ? A.rows : A.cols;
    const index_t k2 = tB ? B.cols : B.rows;
    const index_t n = tB ? B.rows : B.cols;
    require(k == k2, "ShapeMismatch: matmul inner dimensions");
    C.rows = m;
    C.cols = n;
    C.v.assign(static_cast<std::size_t>(m) * n, 0.0);
    parallel_rows(m, [&](index_t lo, index_t hi) {
        for (index_t i = lo; i < hi; ++i) {
            double* crow = &C.v[i * n];
            for (index_t p = 0; p < k; ++p) {
                const double a = tA ? A.v[p * A.cols + i] : A.v[i * A.cols + p];
                if (a == 0.0) continue;
                if (!tB) {
                    const double* brow = &B.v[p * B.cols];
                    for (index_t j = 0; j < n; ++j) crow[j] += a * brow[j];
                } else {
                    for (index_t j = 0; j < n; ++j) crow[j] += a * B.v[j * B.cols + p];
                }
            }
        }
    });
}

inline Tensor matmul(const Tensor& A, bool tA, const Tensor& B, bool tB) {
    Tensor C;
    matmul_into(A, tA, B, tB, C);
    return C;
}

} // namespace linalg

// Real sparse matrix for propagation operators (normalized adjacencies and
// similar); not necessarily symmetric, so the transpose is stored for the
// backward pass.
struct SparseProp {
    index_t n = 0;
    std::vector<index_t> row_ptr, col;
    std::vector<double> val;
    std::vector<index_t> t_row_ptr, t_col;
    std::vector<double> t_val;

    void finalize_transpose() {
        t_row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
        t_col.assign(col.size(), 0);
        t_val.assign(val.size(), 0.0);
        for (auto c : col) t_row_ptr[c + 1]++;
        for (index_t i = 0; i < n; ++i) t_row_ptr[i + 1] += t_row_ptr[i];
        std::vector<index_t> cur(t_row_ptr.begin(), t_row_ptr.end() - 1);
        for (index_t u = 0; u < n; ++u)
            for (index_t e = row_ptr[u]; e < row_ptr[u + 1]; ++e) {
                const index_t pos = cur[col[e]]++;
                t_col[pos] = u;
                t_val[pos] = val[e];
            }
    }

    void apply_rows(const double* X, double* Y, index_t d, bool transpose) const {
        const auto& rp = transpose ? t_row_ptr : row_ptr;
        const auto& cc = transpose ? t_col : col;
        const auto& vv = transpose ? t_val : val;
        parallel_rows(n, [&](index_t lo, index_t hi) {
            for (index_t u = lo; u < hi; ++u) {
                double* out = Y + u * d;
                for (index_t j = 0; j < d; ++j) out[j] = 0.0;
                for (index_t e = rp[u]; e < rp[u + 1]; ++e) {
                    const double w = vv[e];
                    const double* in = X + cc[e] * d;
                    for (index_t j = 0; j < d; ++j) out[j] += w * in[j];
                }
            }
        });
    }
};

namespace ad {

using VarId = int;

// Reverse-mode tape: topologically ordered op records (creation order);
// backward() visits each record once in reverse and accumulates gradients
// additively. Single-owner during forward/backward.
class Tape {
public:
    VarId push(Tensor val, bool requires_grad, std::function<void(Tape&)> back = nullptr) {
        Node n;
        n.val = std::move(val);
        n.requires_grad = requires_grad;
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<VarId>(nodes_.size()) - 1;
    }

    VarId leaf(Tensor val, bool requires_grad = false) { return push(std::move(val), requires_grad); }

    Tensor& val(VarId id) { return nodes_[id].val; }
    const Tensor& val(VarId id) const { return nodes_[id].val; }
    bool requires_grad(VarId id) const { return nodes_[id].requires_grad; }

    Tensor& grad(VarId id) {
        Node& n = nodes_[id];
        if (!n.grad_ready) {
            n.grad = Tensor(n.val.rows, n.val.cols);
            n.grad_ready = true;
        }
        return n.grad;
    }
    bool has_grad(VarId id) const { return nodes_[id].grad_ready; }

    void add_grad(VarId id, const Tensor& g) {
        if (!nodes_[id].requires_grad) return;
        Tensor& dst = grad(id);
        require(dst.same_shape(g), "gradient shape mismatch");
        for (index_t i = 0; i < g.size(); ++i) dst.v[i] += g.v[i];
    }

    void backward(VarId loss) {
        if (val(loss).size() != 1) throw Error("NotScalar: backward needs a scalar loss");
        grad(loss).v[0] = 1.0;
        for (VarId id = loss; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.back && n.grad_ready) n.back(*this);
        }
    }

    // backward sweep from an arbitrary output with a caller-provided cotangent
    void backward_seeded(VarId out, const Tensor& seed) {
        require(seed.same_shape(val(out)), "seed shape mismatch");
        grad(out) = seed;
        for (VarId id = out; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.back && n.grad_ready) n.back(*this);
        }
    }

    void reset_grads() {
        for (auto& n : nodes_) n.grad_ready = false;
    }

    void clear() { nodes_.clear(); }
    index_t size() const { return static_cast<index_t>(nodes_.size()); }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool requires_grad = false;
        bool grad_ready = false;
        std::function<void(Tape&)> back;
    };
    std::vector<Node> nodes_;
};

namespace detail {
template <typename F>
VarId unary_op(Tape& t, VarId a, F&& fwd, std::function<double(double, double)> dfn) {
    const Tensor& x = t.val(a);
    Tensor y(x.rows, x.cols);
    for (index_t i = 0; i < x.size(); ++i) y.v[i] = fwd(x.v[i]);
    const bool req = t.requires_grad(a);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(y), req, !req ? std::function<void(Tape&)>() : [a, out, dfn](Tape& tp) {
        const Tensor& g = tp.grad(out);
        const Tensor& x = tp.val(a);
        const Tensor& y = tp.val(out);
        Tensor ga(x.rows, x.cols);
        for (index_t i = 0; i < x.size(); ++i) ga.v[i] = g.v[i] * dfn(x.v[i], y.v[i]);
        tp.add_grad(a, ga);
    });
}
} // namespace detail

inline VarId matmul(Tape& t, VarId a, VarId b, bool tA = false, bool tB = false) {
    Tensor c = linalg::matmul(t.val(a), tA, t.val(b), tB);
    const bool req = t.requires_grad(a) || t.requires_grad(b);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(c), req, !req ? std::function<void(Tape&)>() : [a, b, tA, tB, out](Tape& tp) {
        const Tensor& g = tp.grad(out);
        if (tp.requires_grad(a)) {
            // dA = op(G . op(B)^T), arranged per transpose flags
            Tensor ga = !tA ? linalg::matmul(g, false, tp.val(b), !tB)
                            : linalg::matmul(tp.val(b), tB, g, true);
            tp.add_grad(a, ga);
        }
        if (tp.requires_grad(b)) {
            Tensor gb = !tB ? linalg::matmul(tp.val(a), !tA, g, false)
                            : linalg::matmul(g, true, tp.val(a), tA);
            tp.add_grad(b, gb);
        }
    });
}

inline VarId add(Tape& t, VarId a, VarId b) {
    const Tensor& x = t.val(a);
    const Tensor& y = t.val(b);
    require(x.same_shape(y), "ShapeMismatch: add");
    Tensor z(x.rows, x.cols);
    for (index_t i = 0; i < x.size(); ++i) z.v[i] = x.v[i] + y.v[i];
    const bool req = t.requires_grad(a) || t.requires_grad(b);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req, !req ? std::function<void(Tape&)>() : [a, b, out](Tape& tp) {
        tp.add_grad(a, tp.grad(out));
        tp.add_grad(b, tp.grad(out));
    });
}

inline VarId sub(Tape& t, VarId a, VarId b) {
    const Tensor& x = t.val(a);
    const Tensor& y = t.val(b);
    require(x.same_shape(y), "ShapeMismatch: sub");
    Tensor z(x.rows, x.cols);
    for (index_t i = 0; i < x.size(); ++i) z.v[i] = x.v[i] - y.v[i];
    const bool req = t.requires_grad(a) || t.requires_grad(b);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req, !req ? std::function<void(Tape&)>() : [a, b, out](Tape& tp) {
        tp.add_grad(a, tp.grad(out));
        const Tensor& g = tp.grad(out);
        Tensor gb(g.rows, g.cols);
        for (index_t i = 0; i < g.size(); ++i) gb.v[i] = -g.v[i];
        tp.add_grad(b, gb);
    });
}

// elementwise product
inline VarId mul(Tape& t, VarId a, VarId b) {
    const Tensor& x = t.val(a);
    const Tensor& y = t.val(b);
    require(x.same_shape(y), "ShapeMismatch: mul");
    Tensor z(x.rows, x.cols);
    for (index_t i = 0; i < x.size(); ++i) z.v[i] = x.v[i] * y.v[i];
    const bool req = t.requires_grad(a) || t.requires_grad(b);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req, !req ? std::function<void(Tape&)>() : [a, b, out](Tape& tp) {
        const Tensor& g = tp.grad(out);
        if (tp.requires_grad(a)) {
            const Tensor& y = tp.val(b);
            Tensor ga(g.rows, g.cols);
            for (index_t i = 0; i < g.size(); ++i) ga.v[i] = g.v[i] * y.v[i];
            tp.add_grad(a, ga);
        }
        if (tp.requires_grad(b)) {
            const Tensor& x = tp.val(a);
            Tensor gb(g.rows, g.cols);
            for (index_t i = 0; i < g.size(); ++i) gb.v[i] = g.v[i] * x.v[i];
            tp.add_grad(b, gb);
        }
    });
}

inline VarId scale(Tape& t, VarId a, double s) {
    return detail::unary_op(t, a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline VarId silu(Tape& t, VarId a) {
    return detail::unary_op(
        t, a, [](double x) { return x / (1.0 + std::exp(-x)); },
        [](double x, double) {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 + x * (1.0 - s));
        });
}

inline VarId sigmoid(Tape& t, VarId a) {
    return detail::unary_op(
        t, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

inline VarId gelu(Tape& t, VarId a) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    return detail::unary_op(
        t, a, [=](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
        [=](double x, double) {
            const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            return cdf + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
        });
}

inline VarId relu(Tape& t, VarId a) {
    return detail::unary_op(
        t, a, [](double x) { return x > 0 ? x : 0.0; },
        [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

inline VarId abs(Tape& t, VarId a) {
    return detail::unary_op(
        t, a, [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

inline VarId sqrt_op(Tape& t, VarId a) {
    return detail::unary_op(
        t, a, [](double x) { return std::sqrt(x); },
        [](double, double y) { return y > 0 ? 0.5 / y : 0.0; });
}

// row-wise softmax (numerically stabilized)
inline VarId softmax_rows(Tape& t, VarId a) {
    const Tensor& x = t.val(a);
    Tensor y(x.rows, x.cols);
    for (index_t r = 0; r < x.rows; ++r) {
        double mx = -1e300;
        for (index_t c = 0; c < x.cols; ++c) mx = std::max(mx, x.at(r, c));
        double s = 0.0;
        for (index_t c = 0; c < x.cols; ++c) s += (y.at(r, c) = std::exp(x.at(r, c) - mx));
        for (index_t c = 0; c < x.cols; ++c) y.at(r, c) /= s;
    }
    const bool req = t.requires_grad(a);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(y), req, !req ? std::function<void(Tape&)>() : [a, out](Tape& tp) {
        const Tensor& y = tp.val(out);
        const Tensor& g = tp.grad(out);
        Tensor ga(y.rows, y.cols);
        for (index_t r = 0; r < y.rows; ++r) {
            double dot = 0.0;
            for (index_t c = 0; c < y.cols; ++c) dot += g.at(r, c) * y.at(r, c);
            for (index_t c = 0; c < y.cols; ++c) ga.at(r, c) = y.at(r, c) * (g.at(r, c) - dot);
        }
        tp.add_grad(a, ga);
    });
}

// broadcast add of a 1 x d bias row to every row
inline VarId add_rowvec(Tape& t, VarId a, VarId bias) {
    const Tensor& x = t.val(a);
    const Tensor& b = t.val(bias);
    require(b.rows == 1 && b.cols == x.cols, "ShapeMismatch: add_rowvec");
    Tensor z = x;
    for (index_t r = 0; r < x.rows; ++r)
        for (index_t c = 0; c < x.cols; ++c) z.at(r, c) += b.at(0, c);
    const bool req = t.requires_grad(a) || t.requires_grad(bias);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req, !req ? std::function<void(Tape&)>() : [a, bias, out](Tape& tp) {
        const Tensor& g = tp.grad(out);
        tp.add_grad(a, g);
        if (tp.requires_grad(bias)) {
            Tensor gb(1, g.cols);
            for (index_t r = 0; r < g.rows; ++r)
                for (index_t c = 0; c < g.cols; ++c) gb.at(0, c) += g.at(r, c);
            tp.add_grad(bias, gb);
        }
    });
}

// multiply every row elementwise by a 1 x d vector
inline VarId mul_rowvec(Tape& t, VarId a, VarId vec) {
    const Tensor& x = t.val(a);
    const Tensor& w = t.val(vec);
    require(w.rows == 1 && w.cols == x.cols, "ShapeMismatch: mul_rowvec");
    Tensor z(x.rows, x.cols);
    for (index_t r = 0; r < x.rows; ++r)
        for (index_t c = 0; c < x.cols; ++c) z.at(r, c) = x.at(r, c) * w.at(0, c);
    const bool req = t.requires_grad(a) || t.requires_grad(vec);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req, !req ? std::function<void(Tape&)>() : [a, vec, out](Tape& tp) {
        const Tensor& g = tp.grad(out);
        if (tp.requires_grad(a)) {
            const Tensor& w = tp.val(vec);
            Tensor ga(g.rows, g.cols);
            for (index_t r = 0; r < g.rows; ++r)
                for (index_t c = 0; c < g.cols; ++c) ga.at(r, c) = g.at(r, c) * w.at(0, c);
            tp.add_grad(a, ga);
        }
        if (tp.requires_grad(vec)) {
            const Tensor& x = tp.val(a);
            Tensor gw(1, g.cols);
            for (index_t r = 0; r < g.rows; ++r)
                for (index_t c = 0; c < g.cols; ++c) gw.at(0, c) += g.at(r, c) * x.at(r, c);
            tp.add_grad(vec, gw);
        }
    });
}

// multiply every column elementwise by a k x 1 vector
inline VarId mul_colvec(Tape& t, VarId a, VarId vec) {
    const Tensor& x = t.val(a);
    const Tensor& w = t.val(vec);
    require(w.cols == 1 && w.rows == x.rows, "ShapeMismatch: mul_colvec");
    Tensor z(x.rows, x.cols);
    for (index_t r = 0; r < x.rows; ++r)
        for (index_t c = 0; c < x.cols; ++c) z.at(r, c) = x.at(r, c) * w.at(r, 0);
    const bool req = t.requires_grad(a) || t.requires_grad(vec);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req, !req ? std::function<void(Tape&)>() : [a, vec, out](Tape& tp) {
        const Tensor& g = tp.grad(out);
        if (tp.requires_grad(a)) {
            const Tensor& w = tp.val(vec);
            Tensor ga(g.rows, g.cols);
            for (index_t r = 0; r < g.rows; ++r)
                for (index_t c = 0; c < g.cols; ++c) ga.at(r, c) = g.at(r, c) * w.at(r, 0);
            tp.add_grad(a, ga);
        }
        if (tp.requires_grad(vec)) {
            const Tensor& x = tp.val(a);
            Tensor gw(g.rows, 1);
            for (index_t r = 0; r < g.rows; ++r)
                for (index_t c = 0; c < g.cols; ++c) gw.at(r, 0) += g.at(r, c) * x.at(r, c);
            tp.add_grad(vec, gw);
        }
    });
}

// multiply a tensor by a 1x1 scalar var
inline VarId mul_scalar_var(Tape& t, VarId a, VarId s) {
    const Tensor& x = t.val(a);
    const Tensor& sv = t.val(s);
    require(sv.size() == 1, "mul_scalar_var needs a scalar second arg");
    Tensor z(x.rows, x.cols);
    const double sc = sv.v[0];
    for (index_t i = 0; i < x.size(); ++i) z.v[i] = sc * x.v[i];
    const bool req = t.requires_grad(a) || t.requires_grad(s);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req, !req ? std::function<void(Tape&)>() : [a, s, out](Tape& tp) {
        const Tensor& g = tp.grad(out);
        if (tp.requires_grad(a)) {
            const double sc = tp.val(s).v[0];
            Tensor ga(g.rows, g.cols);
            for (index_t i = 0; i < g.size(); ++i) ga.v[i] = sc * g.v[i];
            tp.add_grad(a, ga);
        }
        if (tp.requires_grad(s)) {
            const Tensor& x = tp.val(a);
            double acc = 0.0;
            for (index_t i = 0; i < g.size(); ++i) acc += g.v[i] * x.v[i];
            tp.add_grad(s, Tensor::scalar(acc));
        }
    });
}

inline VarId sum(Tape& t, VarId a) {
    const Tensor& x = t.val(a);
    double s = 0.0;
    for (double v : x.v) s += v;
    const bool req = t.requires_grad(a);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(Tensor::scalar(s), req, !req ? std::function<void(Tape&)>() : [a, out](Tape& tp) {
        const double g = tp.grad(out).v[0];
        const Tensor& x = tp.val(a);
        Tensor ga(x.rows, x.cols, g);
        tp.add_grad(a, ga);
    });
}

// sum over rows -> 1 x d
inline VarId colsum(Tape& t, VarId a) {
    const Tensor& x = t.val(a);
    Tensor z(1, x.cols);
    for (index_t r = 0; r < x.rows; ++r)
        for (index_t c = 0; c < x.cols; ++c) z.at(0, c) += x.at(r, c);
    const bool req = t.requires_grad(a);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req, !req ? std::function<void(Tape&)>() : [a, out](Tape& tp) {
        const Tensor& g = tp.grad(out);
        const Tensor& x = tp.val(a);
        Tensor ga(x.rows, x.cols);
        for (index_t r = 0; r < x.rows; ++r)
            for (index_t c = 0; c < x.cols; ++c) ga.at(r, c) = g.at(0, c);
        tp.add_grad(a, ga);
    });
}

inline VarId concat_cols(Tape& t, VarId a, VarId b) {
    const Tensor& x = t.val(a);
    const Tensor& y = t.val(b);
    require(x.rows == y.rows, "ShapeMismatch: concat_cols");
    Tensor z(x.rows, x.cols + y.cols);
    for (index_t r = 0; r < x.rows; ++r) {
        for (index_t c = 0; c < x.cols; ++c) z.at(r, c) = x.at(r, c);
        for (index_t c = 0; c < y.cols; ++c) z.at(r, x.cols + c) = y.at(r, c);
    }
    const bool req = t.requires_grad(a) || t.requires_grad(b);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req, !req ? std::function<void(Tape&)>() : [a, b, out](Tape& tp) {
        const Tensor& g = tp.grad(out);
        const Tensor& x = tp.val(a);
        const Tensor& y = tp.val(b);
        if (tp.requires_grad(a)) {
            Tensor ga(x.rows, x.cols);
            for (index_t r = 0; r < x.rows; ++r)
                for (index_t c = 0; c < x.cols; ++c) ga.at(r, c) = g.at(r, c);
            tp.add_grad(a, ga);
        }
        if (tp.requires_grad(b)) {
            Tensor gb(y.rows, y.cols);
            for (index_t r = 0; r < y.rows; ++r)
                for (index_t c = 0; c < y.cols; ++c) gb.at(r, c) = g.at(r, x.cols + c);
            tp.add_grad(b, gb);
        }
    });
}

inline VarId slice_rows(Tape& t, VarId a, index_t r0, index_t nrows) {
    const Tensor& x = t.val(a);
    require(r0 >= 0 && r0 + nrows <= x.rows, "slice_rows out of range");
    Tensor z(nrows, x.cols);
    for (index_t r = 0; r < nrows; ++r)
        for (index_t c = 0; c < x.cols; ++c) z.at(r, c) = x.at(r0 + r, c);
    const bool req = t.requires_grad(a);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req, !req ? std::function<void(Tape&)>() : [a, r0, out](Tape& tp) {
        const Tensor& g = tp.grad(out);
        const Tensor& x = tp.val(a);
        Tensor ga(x.rows, x.cols);
        for (index_t r = 0; r < g.rows; ++r)
            for (index_t c = 0; c < g.cols; ++c) ga.at(r0 + r, c) = g.at(r, c);
        tp.add_grad(a, ga);
    });
}

inline VarId concat_rows(Tape& t, const std::vector<VarId>& parts) {
    require(!parts.empty(), "concat_rows needs at least one part");
    index_t rows = 0;
    const index_t cols = t.val(parts[0]).cols;
    bool req = false;
    for (VarId p : parts) {
        require(t.val(p).cols == cols, "ShapeMismatch: concat_rows");
        rows += t.val(p).rows;
        req |= t.requires_grad(p);
    }
    Tensor z(rows, cols);
    index_t r0 = 0;
    for (VarId p : parts) {
        const Tensor& x = t.val(p);
        std::copy(x.v.begin(), x.v.end(), z.v.begin() + r0 * cols);
        r0 += x.rows;
    }
    const VarId out = static_cast<VarId>(t.size());
    auto parts_copy = parts;
    return t.push(std::move(z), req,
                  !req ? std::function<void(Tape&)>() : [parts_copy, out](Tape& tp) {
                      const Tensor& g = tp.grad(out);
                      index_t r0 = 0;
                      for (VarId p : parts_copy) {
                          const Tensor& x = tp.val(p);
                          if (tp.requires_grad(p)) {
                              Tensor gp(x.rows, x.cols);
                              std::copy(g.v.begin() + r0 * g.cols,
                                        g.v.begin() + (r0 + x.rows) * g.cols, gp.v.begin());
                              tp.add_grad(p, gp);
                          }
                          r0 += x.rows;
                      }
                  });
}

inline VarId gather_rows(Tape& t, VarId a, std::vector<index_t> idx) {
    const Tensor& x = t.val(a);
    Tensor z(static_cast<index_t>(idx.size()), x.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        require(idx[r] >= 0 && idx[r] < x.rows, "gather_rows index out of range");
        for (index_t c = 0; c < x.cols; ++c) z.at(static_cast<index_t>(r), c) = x.at(idx[r], c);
    }
    const bool req = t.requires_grad(a);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req,
                  !req ? std::function<void(Tape&)>() : [a, idx = std::move(idx), out](Tape& tp) {
                      const Tensor& g = tp.grad(out);
                      const Tensor& x = tp.val(a);
                      Tensor ga(x.rows, x.cols);
                      for (std::size_t r = 0; r < idx.size(); ++r)
                          for (index_t c = 0; c < g.cols; ++c)
                              ga.at(idx[r], c) += g.at(static_cast<index_t>(r), c);
                      tp.add_grad(a, ga);
                  });
}

// rows of `a` scattered (accumulated) into an n_out-row zero matrix
inline VarId scatter_rows(Tape& t, VarId a, std::vector<index_t> idx, index_t n_out) {
    const Tensor& x = t.val(a);
    require(static_cast<index_t>(idx.size()) == x.rows, "scatter_rows index count mismatch");
    Tensor z(n_out, x.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        require(idx[r] >= 0 && idx[r] < n_out, "scatter_rows index out of range");
        for (index_t c = 0; c < x.cols; ++c) z.at(idx[r], c) += x.at(static_cast<index_t>(r), c);
    }
    const bool req = t.requires_grad(a);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req,
                  !req ? std::function<void(Tape&)>() : [a, idx = std::move(idx), out](Tape& tp) {
                      const Tensor& g = tp.grad(out);
                      const Tensor& x = tp.val(a);
                      Tensor ga(x.rows, x.cols);
                      for (std::size_t r = 0; r < idx.size(); ++r)
                          for (index_t c = 0; c < g.cols; ++c)
                              ga.at(static_cast<index_t>(r), c) = g.at(idx[r], c);
                      tp.add_grad(a, ga);
                  });
}

// X -> P X for a fixed sparse propagation operator P (backward applies P^T)
inline VarId spmm(Tape& t, const SparseProp* P, VarId a) {
    const Tensor& x = t.val(a);
    require(x.rows == P->n, "ShapeMismatch: spmm");
    Tensor z(x.rows, x.cols);
    P->apply_rows(x.v.data(), z.v.data(), x.cols, false);
    const bool req = t.requires_grad(a);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req, !req ? std::function<void(Tape&)>() : [a, P, out](Tape& tp) {
        const Tensor& g = tp.grad(out);
        Tensor ga(g.rows, g.cols);
        P->apply_rows(g.v.data(), ga.v.data(), g.cols, true);
        tp.add_grad(a, ga);
    });
}

// X -> L X for a fixed Hermitian operator (real path; self-adjoint backward)
inline VarId spmm_sym(Tape& t, const SparseHermitian* L, VarId a) {
    const Tensor& x = t.val(a);
    require(x.rows == L->n, "ShapeMismatch: spmm_sym");
    require(!L->is_complex(), "spmm_sym is the real path");
    Tensor z(x.rows, x.cols);
    L->apply_rows(x.v.data(), z.v.data(), x.cols);
    const bool req = t.requires_grad(a);
    const VarId out = static_cast<VarId>(t.size());
    return t.push(std::move(z), req, !req ? std::function<void(Tape&)>() : [a, L, out](Tape& tp) {
        const Tensor& g = tp.grad(out);
        Tensor ga(g.rows, g.cols);
        if (L->similarity_scale.empty()) {
            L->apply_rows(g.v.data(), ga.v.data(), g.cols);
        } else {
            // adjoint of S^{-1} C S is S C S^{-1}
            const auto& s = L->similarity_scale;
            Tensor tmp(g.rows, g.cols);
            for (index_t i = 0; i < g.rows; ++i)
                for (index_t c = 0; c < g.cols; ++c) tmp.at(i, c) = g.at(i, c) / s[i];
            std::vector<double> y(g.rows * g.cols);
            // apply core
            SparseHermitian core = *L;
            core.similarity_scale.clear();
            core.apply_rows(tmp.v.data(), y.data(), g.cols);
            for (index_t i = 0; i < g.rows; ++i)
                for (index_t c = 0; c < g.cols; ++c) ga.at(i, c) = y[i * g.cols + c] * s[i];
        }
        tp.add_grad(a, ga);
    });
}

// ----- complex pairs: explicit (re, im) rules composed from real ops -----

struct CVar {
    VarId re = -1;
    VarId im = -1;
};

inline CVar cadd(Tape& t, CVar a, CVar b) { return {add(t, a.re, b.re), add(t, a.im, b.im)}; }

inline CVar cmul(Tape& t, CVar a, CVar b) {
    VarId rr = sub(t, mul(t, a.re, b.re), mul(t, a.im, b.im));
    VarId ii = add(t, mul(t, a.re, b.im), mul(t, a.im, b.re));
    return {rr, ii};
}

inline CVar cconj(Tape& t, CVar a) { return {a.re, scale(t, a.im, -1.0)}; }

inline VarId creal(Tape&, CVar a) { return a.re; }
inline VarId cimag(Tape&, CVar a) { return a.im; }

// complex modulus sqrt(re^2 + im^2); gradient guarded at 0
inline VarId cmod(Tape& t, CVar a) {
    VarId s = add(t, mul(t, a.re, a.re), mul(t, a.im, a.im));
    return sqrt_op(t, s);
}

} // namespace ad
} // namespace s2
