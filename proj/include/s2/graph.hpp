#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <deque>
#include <istream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "s2/common.hpp"
#include "s2/rng.hpp"

namespace s2 {

// Sparse graph in canonical CSR form: column indices sorted ascending per row,
// duplicate edges merged by weight summation, zero-weight edges removed.
// For undirected graphs the edge set is stored symmetrically.
struct Graph {
    index_t n = 0;
    std::vector<index_t> row_ptr;  // size n+1
    std::vector<index_t> col;      // size m
    std::vector<double> weights;   // size m or empty (unweighted)
    bool directed = false;

    std::vector<double> node_features;  // n x feat_dim, row-major, or empty
    index_t feat_dim = 0;
    std::vector<std::int64_t> node_labels;   // per-node classes, -1 = unlabeled
    std::vector<double> node_targets;        // per-node regression targets
    std::optional<std::int64_t> graph_label;

    index_t num_edges() const { return static_cast<index_t>(col.size()); }
    bool weighted() const { return !weights.empty(); }

    double weight_at(index_t e) const { return weights.empty() ? 1.0 : weights[e]; }

    double out_degree(index_t u) const {
        double d = 0.0;
        for (index_t e = row_ptr[u]; e < row_ptr[u + 1]; ++e) d += weight_at(e);
        return d;
    }

    bool has_edge(index_t u, index_t v) const {
        return std::binary_search(col.begin() + row_ptr[u], col.begin() + row_ptr[u + 1], v);
    }

    void check_invariants() const {
        require(row_ptr.size() == static_cast<std::size_t>(n) + 1, "row_ptr size mismatch");
        require(row_ptr.front() == 0 && row_ptr.back() == num_edges(), "row_ptr ends mismatch");
        for (index_t u = 0; u < n; ++u) {
            require(row_ptr[u] <= row_ptr[u + 1], "row_ptr not monotone");
            for (index_t e = row_ptr[u]; e < row_ptr[u + 1]; ++e) {
                require(col[e] >= 0 && col[e] < n, "column index out of range");
                if (e > row_ptr[u]) require(col[e] > col[e - 1], "columns not strictly sorted");
                if (!weights.empty()) require(weights[e] > 0.0, "nonpositive stored weight");
            }
        }
    }
};

// Incremental edge-list builder producing canonical CSR.
class GraphBuilder {
public:
    explicit GraphBuilder(index_t n, bool directed) : n_(n), directed_(directed) {
        require(n >= 1, "InvalidSize: graph needs at least one node");
    }

    void add_edge(index_t u, index_t v, double w = 1.0) {
        require(u >= 0 && u < n_ && v >= 0 && v < n_, "edge endpoint out of range");
        require(u != v, "self loops are not supported");
        if (w < 0.0) throw Error("NegativeWeight");
        edges_.push_back({u, v, w});
        if (!directed_) edges_.push_back({v, u, w});
        weighted_ |= (w != 1.0);
    }

    Graph build() const {
        auto es = edges_;
        std::sort(es.begin(), es.end(), [](const E& a, const E& b) {
            return a.u != b.u ? a.u < b.u : a.v < b.v;
        });
        // merge duplicates by weight summation, drop zero weights
        std::vector<E> merged;
        for (const auto& e : es) {
            if (!merged.empty() && merged.back().u == e.u && merged.back().v == e.v)
                merged.back().w += e.w;
            else
                merged.push_back(e);
        }
        std::erase_if(merged, [](const E& e) { return e.w == 0.0; });

        Graph g;
        g.n = n_;
        g.directed = directed_;
        g.row_ptr.assign(static_cast<std::size_t>(n_) + 1, 0);
        for (const auto& e : merged) g.row_ptr[e.u + 1]++;
        std::partial_sum(g.row_ptr.begin(), g.row_ptr.end(), g.row_ptr.begin());
        g.col.reserve(merged.size());
        for (const auto& e : merged) g.col.push_back(e.v);
        if (weighted_) {
            g.weights.reserve(merged.size());
            for (const auto& e : merged) g.weights.push_back(e.w);
        }
        return g;
    }

private:
    struct E {
        index_t u, v;
        double w;
    };
    index_t n_;
    bool directed_;
    bool weighted_ = false;
    std::vector<E> edges_;
};

// Undirected graph with edge set A v A^T; weights merge by elementwise max.
inline Graph symmetrize(const Graph& g) {
    if (!g.directed) return g;
    struct E {
        index_t u, v;
        double w;
    };
    std::vector<E> es;
    es.reserve(g.col.size());
    for (index_t u = 0; u < g.n; ++u)
        for (index_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
            index_t a = std::min(u, g.col[e]), b = std::max(u, g.col[e]);
            es.push_back({a, b, g.weight_at(e)});
        }
    std::sort(es.begin(), es.end(), [](const E& a, const E& b) {
        return a.u != b.u ? a.u < b.u : a.v < b.v;
    });
    GraphBuilder gb(g.n, false);
    for (std::size_t i = 0; i < es.size(); ++i) {
        if (i + 1 < es.size() && es[i + 1].u == es[i].u && es[i + 1].v == es[i].v) {
            es[i + 1].w = std::max(es[i].w, es[i + 1].w);
            continue;
        }
        gb.add_edge(es[i].u, es[i].v, es[i].w);
    }
    Graph out = gb.build();
    out.node_features = g.node_features;
    out.feat_dim = g.feat_dim;
    out.node_labels = g.node_labels;
    out.node_targets = g.node_targets;
    out.graph_label = g.graph_label;
    return out;
}

// ---------------------------------------------------------------------------
// Special constructors
// ---------------------------------------------------------------------------

inline Graph path_graph(index_t n) {
    GraphBuilder gb(n, false);
    for (index_t i = 0; i + 1 < n; ++i) gb.add_edge(i, i + 1);
    return gb.build();
}

inline Graph directed_path_graph(index_t n) {
    GraphBuilder gb(n, true);
    for (index_t i = 0; i + 1 < n; ++i) gb.add_edge(i, i + 1);
    return gb.build();
}

inline Graph cycle_graph(index_t n) {
    require(n >= 3, "InvalidSize: cycle needs n >= 3");
    GraphBuilder gb(n, false);
    for (index_t i = 0; i < n; ++i) gb.add_edge(i, (i + 1) % n);
    return gb.build();
}

inline Graph ring_graph(index_t n) { return cycle_graph(n); }

inline Graph clique_graph(index_t n) {
    GraphBuilder gb(n, false);
    for (index_t i = 0; i < n; ++i)
        for (index_t j = i + 1; j < n; ++j) gb.add_edge(i, j);
    return gb.build();
}

// Clique with a path tail attached at clique node 0. Nodes [0, clique_size)
// form the clique; nodes [clique_size, clique_size+path_len) the tail.
inline Graph clique_path_graph(index_t clique_size, index_t path_len) {
    require(clique_size >= 1 && path_len >= 0, "InvalidSize");
    const index_t n = clique_size + path_len;
    GraphBuilder gb(n, false);
    for (index_t i = 0; i < clique_size; ++i)
        for (index_t j = i + 1; j < clique_size; ++j) gb.add_edge(i, j);
    if (path_len > 0) {
        gb.add_edge(0, clique_size);
        for (index_t i = 0; i + 1 < path_len; ++i) gb.add_edge(clique_size + i, clique_size + i + 1);
    }
    return gb.build();
}

// Uniform random labeled tree via Pruefer decoding; undirected.
inline Graph random_tree(index_t n, std::uint64_t seed) {
    require(n >= 1, "InvalidSize");
    GraphBuilder gb(n, false);
    if (n == 1) return gb.build();
    if (n == 2) {
        gb.add_edge(0, 1);
        return gb.build();
    }
    Rng rng(seed);
    std::vector<index_t> pruefer(static_cast<std::size_t>(n) - 2);
    for (auto& p : pruefer) p = rng.uniform_int(0, n - 1);
    std::vector<index_t> deg(n, 1);
    for (auto p : pruefer) deg[p]++;
    std::vector<index_t> leaves;
    for (index_t v = 0; v < n; ++v)
        if (deg[v] == 1) leaves.push_back(v);
    std::make_heap(leaves.begin(), leaves.end(), std::greater<>());
    for (auto p : pruefer) {
        std::pop_heap(leaves.begin(), leaves.end(), std::greater<>());
        index_t leaf = leaves.back();
        leaves.pop_back();
        gb.add_edge(leaf, p);
        if (--deg[p] == 1) {
            leaves.push_back(p);
            std::push_heap(leaves.begin(), leaves.end(), std::greater<>());
        }
    }
    std::pop_heap(leaves.begin(), leaves.end(), std::greater<>());
    index_t a = leaves.back();
    leaves.pop_back();
    gb.add_edge(a, leaves.front());
    return gb.build();
}

inline std::vector<index_t> bfs_distances(const Graph& g, index_t src, bool follow_direction = false);

// Directed tree: edges oriented away from a random source (the unique
// in-degree-0 root). Returns the graph and the source index.
inline std::pair<Graph, index_t> random_directed_tree(index_t n, std::uint64_t seed) {
    Graph und = random_tree(n, seed);
    Rng rng(seed ^ 0x5bd1e995u);
    const index_t src = rng.uniform_int(0, n - 1);
    auto dist = bfs_distances(und, src);
    GraphBuilder gb(n, true);
    for (index_t u = 0; u < n; ++u)
        for (index_t e = und.row_ptr[u]; e < und.row_ptr[u + 1]; ++e) {
            index_t v = und.col[e];
            if (dist[u] + 1 == dist[v]) gb.add_edge(u, v);
        }
    return {gb.build(), src};
}

// Random DAG: directed tree plus extra_edges forward edges w.r.t. BFS depth
// (keeps acyclicity and the unique root).
inline std::pair<Graph, index_t> random_dag(index_t n, index_t extra_edges, std::uint64_t seed) {
    Graph und = random_tree(n, seed);
    Rng rng(seed ^ 0x5bd1e995u);
    const index_t src = rng.uniform_int(0, n - 1);
    auto dist = bfs_distances(und, src);
    std::vector<std::pair<index_t, index_t>> extra;
    index_t guard = 0;
    while (static_cast<index_t>(extra.size()) < extra_edges && guard++ < 100 * extra_edges + 1000) {
        index_t u = rng.uniform_int(0, n - 1);
        index_t v = rng.uniform_int(0, n - 1);
        if (u == v || dist[u] == dist[v]) continue;
        if (dist[u] > dist[v]) std::swap(u, v);
        extra.push_back({u, v});
    }
    GraphBuilder gb(n, true);
    for (index_t u = 0; u < n; ++u)
        for (index_t e = und.row_ptr[u]; e < und.row_ptr[u + 1]; ++e) {
            index_t v = und.col[e];
            if (dist[u] + 1 == dist[v]) gb.add_edge(u, v);
        }
    for (auto [u, v] : extra) gb.add_edge(u, v);
    Graph g = gb.build();
    return {g, src};
}

// Weighted 3-cycle from the discontinuity lower-bound construction:
// weight sin^2(theta) on edge (0,1), cos^2(theta) on (1,2) and (2,0).
// Zero-weight edges of the degenerate endpoints are removed.
inline Graph adversarial_triangle(double theta) {
    if (!(theta >= 0.0 && theta <= 1.5707963267948966 + 1e-12))
        throw Error("ThetaOutOfRange");
    double s2 = std::sin(theta) * std::sin(theta);
    double c2 = std::cos(theta) * std::cos(theta);
    if (s2 < 1e-30) s2 = 0.0;
    if (c2 < 1e-30) c2 = 0.0;
    GraphBuilder gb(3, false);
    gb.add_edge(0, 1, s2);
    gb.add_edge(1, 2, c2);
    gb.add_edge(2, 0, c2);
    return gb.build();
}

// Weighted 4-cycle with alternating weights cos^2(theta), sin^2(theta).
// Its SymNormalized spectrum is {0, 2 sin^2(theta), 2 - 2 sin^2(theta), 2},
// so any target eigenvalue in [0, 2] is realizable; used to place adversarial
// eigenvalues for the approximation sweeps.
inline Graph adversarial_c4(double theta) {
    if (!(theta >= 0.0 && theta <= 1.5707963267948966 + 1e-12))
        throw Error("ThetaOutOfRange");
    double a = std::cos(theta) * std::cos(theta);
    double b = std::sin(theta) * std::sin(theta);
    if (a < 1e-30) a = 0.0;
    if (b < 1e-30) b = 0.0;
    GraphBuilder gb(4, false);
    gb.add_edge(0, 1, a);
    gb.add_edge(1, 2, b);
    gb.add_edge(2, 3, a);
    gb.add_edge(3, 0, b);
    return gb.build();
}

inline Graph graph_with_eigenvalue(double lambda) {
    require(lambda >= 0.0 && lambda <= 2.0, "eigenvalue target outside [0,2]");
    return adversarial_c4(std::asin(std::sqrt(lambda / 2.0)));
}

// The five connected 3-regular graphs on 8 nodes (exhaustively enumerated,
// one representative per isomorphism class).
inline std::vector<Graph> cubic8_graphs() {
    static const std::vector<std::vector<std::pair<index_t, index_t>>> edge_lists = {
        // ascending Laplacian order <-> adjacency spectrum {3,1.73,1,0.41,-1,-1,-1.73,-2.41}
        {{0, 5}, {0, 6}, {0, 7}, {1, 4}, {1, 6}, {1, 7}, {2, 3}, {2, 5}, {2, 7}, {3, 4}, {3, 5}, {4, 6}},
        // adjacency spectrum {3,1.56,0.62,0.62,0,-1.62,-1.62,-2.56}
        {{0, 5}, {0, 6}, {0, 7}, {1, 5}, {1, 6}, {1, 7}, {2, 3}, {2, 4}, {2, 7}, {3, 4}, {3, 6}, {4, 5}},
        // adjacency spectrum {3,2.24,1,-1,-1,-1,-1,-2.24}
        {{0, 5}, {0, 6}, {0, 7}, {1, 4}, {1, 6}, {1, 7}, {2, 3}, {2, 4}, {2, 5}, {3, 4}, {3, 5}, {6, 7}},
        // adjacency spectrum {3,1,1,0.41,0.41,-1,-2.41,-2.41}
        {{0, 5}, {0, 6}, {0, 7}, {1, 4}, {1, 6}, {1, 7}, {2, 3}, {2, 5}, {2, 7}, {3, 4}, {3, 6}, {4, 5}},
        // adjacency spectrum {3,1,1,1,-1,-1,-1,-3} (the cube-like graph)
        {{0, 5}, {0, 6}, {0, 7}, {1, 4}, {1, 6}, {1, 7}, {2, 4}, {2, 5}, {2, 7}, {3, 4}, {3, 5}, {3, 6}},
    };
    std::vector<Graph> out;
    for (const auto& el : edge_lists) {
        GraphBuilder gb(8, false);
        for (auto [u, v] : el) gb.add_edge(u, v);
        out.push_back(gb.build());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Traversal helpers
// ---------------------------------------------------------------------------

inline std::vector<index_t> bfs_distances(const Graph& g, index_t src, bool follow_direction) {
    std::vector<index_t> dist(g.n, -1);
    std::deque<index_t> q;
    dist[src] = 0;
    q.push_back(src);
    // for undirected traversal on a directed graph, precompute reverse adjacency
    std::vector<std::vector<index_t>> rev;
    if (g.directed && !follow_direction) {
        rev.resize(g.n);
        for (index_t u = 0; u < g.n; ++u)
            for (index_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) rev[g.col[e]].push_back(u);
    }
    while (!q.empty()) {
        index_t u = q.front();
        q.pop_front();
        for (index_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
            index_t v = g.col[e];
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
        if (!rev.empty())
            for (index_t v : rev[u])
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
    }
    return dist;
}

inline bool is_connected(const Graph& g) {
    if (g.n == 0) return true;
    auto d = bfs_distances(g, 0, false);
    return std::all_of(d.begin(), d.end(), [](index_t x) { return x >= 0; });
}

inline index_t diameter(const Graph& g) {
    index_t best = 0;
    for (index_t s = 0; s < g.n; ++s) {
        auto d = bfs_distances(g, s, false);
        for (auto x : d) best = std::max(best, x);
    }
    return best;
}

// Kahn topological sort; empty result if the graph has a cycle.
inline std::vector<index_t> topological_sort(const Graph& g) {
    std::vector<index_t> indeg(g.n, 0);
    for (index_t e = 0; e < g.num_edges(); ++e) indeg[g.col[e]]++;
    std::deque<index_t> q;
    for (index_t v = 0; v < g.n; ++v)
        if (indeg[v] == 0) q.push_back(v);
    std::vector<index_t> order;
    while (!q.empty()) {
        index_t u = q.front();
        q.pop_front();
        order.push_back(u);
        for (index_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e)
            if (--indeg[g.col[e]] == 0) q.push_back(g.col[e]);
    }
    if (static_cast<index_t>(order.size()) != g.n) order.clear();
    return order;
}

// Plain text importer, one edge per line: "u v" or "u v weight".
inline Graph import_edge_list(std::istream& in, index_t n, bool directed) {
    GraphBuilder gb(n, directed);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        index_t u, v;
        double w = 1.0;
        if (!(ls >> u >> v)) throw ConfigError("malformed edge list line: " + line);
        ls >> w;
        gb.add_edge(u, v, w);
    }
    return gb.build();
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

// Block-diagonal batch; the dense adjacency is never materialized. Members
// keep their identity via node offsets. keff offsets are filled after the
// per-member eigendecompositions are known.
struct BatchedGraph {
    std::vector<Graph> members;
    std::vector<index_t> node_offsets;  // size members+1
    std::vector<index_t> keff_offsets;  // size members+1 once EVDs are attached
    Graph merged;                       // block-diagonal CSR of all members

    index_t total_nodes() const { return node_offsets.back(); }
};

inline BatchedGraph batch(const std::vector<Graph>& graphs) {
    if (graphs.empty()) throw Error("EmptyBatch");
    const index_t fd = graphs.front().feat_dim;
    for (const auto& g : graphs)
        if (g.feat_dim != fd) throw Error("FeatureDimMismatch");

    BatchedGraph b;
    b.members = graphs;
    b.node_offsets.push_back(0);
    for (const auto& g : graphs) b.node_offsets.push_back(b.node_offsets.back() + g.n);

    const index_t N = b.node_offsets.back();
    Graph& m = b.merged;
    m.n = N;
    m.directed = std::any_of(graphs.begin(), graphs.end(), [](const Graph& g) { return g.directed; });
    m.feat_dim = fd;
    m.row_ptr.assign(static_cast<std::size_t>(N) + 1, 0);
    bool weighted = std::any_of(graphs.begin(), graphs.end(), [](const Graph& g) { return g.weighted(); });
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        const Graph& g = graphs[i];
        const index_t off = b.node_offsets[i];
        for (index_t u = 0; u < g.n; ++u) {
            m.row_ptr[off + u + 1] = m.row_ptr[off + u] + (g.row_ptr[u + 1] - g.row_ptr[u]);
            for (index_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
                m.col.push_back(g.col[e] + off);
                if (weighted) m.weights.push_back(g.weight_at(e));
            }
        }
        if (fd > 0)
            m.node_features.insert(m.node_features.end(), g.node_features.begin(), g.node_features.end());
        if (!g.node_labels.empty())
            m.node_labels.insert(m.node_labels.end(), g.node_labels.begin(), g.node_labels.end());
        if (!g.node_targets.empty())
            m.node_targets.insert(m.node_targets.end(), g.node_targets.begin(), g.node_targets.end());
    }
    return b;
}

} // namespace s2
