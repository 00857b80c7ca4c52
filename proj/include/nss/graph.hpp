#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nss/common.hpp"

namespace nss {

// Undirected simple graph. Edge e = (u, v) with u < v; directed edge 2e is
// u -> v and 2e + 1 is v -> u, so the reverse of d is d ^ 1.
class SparseGraph {
 public:
  struct Arc {
    std::size_t neighbor;
    std::size_t edge;
  };

  SparseGraph() = default;

  explicit SparseGraph(std::size_t n_nodes) : adjacency_(n_nodes) {}

  SparseGraph(std::size_t n_nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges)
      : adjacency_(n_nodes) {
    for (auto [u, v] : edges) add_edge(u, v);
    finalize();
  }

  std::size_t n_nodes() const noexcept { return adjacency_.size(); }
  std::size_t n_edges() const noexcept { return edges_.size(); }
  std::size_t n_directed() const noexcept { return 2 * edges_.size(); }

  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept { return edges_; }
  const std::vector<Arc>& arcs(std::size_t i) const { return adjacency_[i]; }
  std::size_t degree(std::size_t i) const { return adjacency_[i].size(); }

  std::size_t tail(std::size_t d) const noexcept {
    const auto& [u, v] = edges_[d >> 1];
    return (d & 1) ? v : u;
  }
  std::size_t head(std::size_t d) const noexcept {
    const auto& [u, v] = edges_[d >> 1];
    return (d & 1) ? u : v;
  }
  static std::size_t directed(std::size_t edge, bool reversed) noexcept { return 2 * edge + (reversed ? 1 : 0); }
  // Directed edge from -> to, given the undirected edge id joining them.
  std::size_t directed_from(std::size_t edge, std::size_t from) const noexcept {
    return directed(edge, edges_[edge].first != from);
  }

  // Transmission probability on directed edge d (tail infects head); graphs
  // without per-edge values defer to the homogeneous one.
  double lambda(std::size_t d, double homogeneous = 1.0) const { return lambda_.empty() ? homogeneous : lambda_[d]; }
  bool has_edge_lambda() const noexcept { return !lambda_.empty(); }
  void set_lambda(double value) { lambda_.assign(n_directed(), check_probability(value)); }
  void set_lambda(std::size_t d, double value) {
    if (lambda_.empty()) lambda_.assign(n_directed(), 1.0);
    lambda_[d] = check_probability(value);
  }

  void add_edge(std::size_t u, std::size_t v) {
    if (u == v) throw std::invalid_argument("self-loop " + std::to_string(u));
    if (u >= n_nodes() || v >= n_nodes()) throw std::out_of_range("edge endpoint out of range");
    if (u > v) std::swap(u, v);
    const std::size_t e = edges_.size();
    edges_.emplace_back(u, v);
    adjacency_[u].push_back({v, e});
    adjacency_[v].push_back({u, e});
    if (!lambda_.empty()) {
      lambda_.push_back(1.0);
      lambda_.push_back(1.0);
    }
  }

  // Sort neighbor lists and reject duplicate edges.
  void finalize() {
    for (auto& arcs : adjacency_) {
      std::sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) { return a.neighbor < b.neighbor; });
      for (std::size_t k = 1; k < arcs.size(); ++k)
        if (arcs[k].neighbor == arcs[k - 1].neighbor) throw std::invalid_argument("duplicate edge");
    }
  }

  bool is_symmetric() const {
    for (std::size_t i = 0; i < n_nodes(); ++i)
      for (const auto& a : adjacency_[i]) {
        const auto& back = adjacency_[a.neighbor];
        if (std::none_of(back.begin(), back.end(), [&](const Arc& b) { return b.neighbor == i && b.edge == a.edge; }))
          return false;
      }
    return true;
  }

 private:
  static double check_probability(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("transmission probability outside [0,1]");
    return p;
  }

  std::vector<std::vector<Arc>> adjacency_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<double> lambda_;
};

class generation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration-model random regular graph; the whole pairing is redrawn
// until it is simple.
inline SparseGraph generate_random_regular(std::size_t n, std::size_t degree, std::uint64_t seed,
                                           std::size_t max_attempts = 100000) {
  if ((n * degree) % 2 != 0) throw std::invalid_argument("n * degree must be even");
  if (degree >= n) throw std::invalid_argument("degree must be smaller than n");
  rng_t rng = make_rng(seed);
  std::vector<std::size_t> stubs(n * degree);
  for (std::size_t i = 0; i < n; ++i) std::fill_n(stubs.begin() + i * degree, degree, i);
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    std::shuffle(stubs.begin(), stubs.end(), rng);
    edges.clear();
    bool simple = true;
    for (std::size_t k = 0; k + 1 < stubs.size(); k += 2) {
      auto u = stubs[k], v = stubs[k + 1];
      if (u == v) {
        simple = false;
        break;
      }
      edges.emplace_back(std::min(u, v), std::max(u, v));
    }
    if (!simple) continue;
    std::vector<std::pair<std::size_t, std::size_t>> sorted = edges;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) continue;
    return SparseGraph(n, sorted);
  }
  throw generation_error("random regular pairing failed after " + std::to_string(max_attempts) + " attempts");
}

// Largest connected component of a graph, nodes relabeled 0..n'-1 in
// increasing original order. `kept` receives the original labels.
inline SparseGraph largest_component(const SparseGraph& g, std::vector<std::size_t>* kept = nullptr) {
  const std::size_t n = g.n_nodes();
  std::vector<std::size_t> comp(n, n);
  std::size_t best = 0, best_size = 0, n_comp = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] != n) continue;
    std::size_t size = 0;
    std::queue<std::size_t> q;
    q.push(s);
    comp[s] = n_comp;
    while (!q.empty()) {
      auto i = q.front();
      q.pop();
      ++size;
      for (const auto& a : g.arcs(i))
        if (comp[a.neighbor] == n) {
          comp[a.neighbor] = n_comp;
          q.push(a.neighbor);
        }
    }
    if (size > best_size) {
      best_size = size;
      best = n_comp;
    }
    ++n_comp;
  }
  std::vector<std::size_t> relabel(n, n), original;
  for (std::size_t i = 0; i < n; ++i)
    if (comp[i] == best) {
      relabel[i] = original.size();
      original.push_back(i);
    }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (auto [u, v] : g.edges())
    if (comp[u] == best) edges.emplace_back(relabel[u], relabel[v]);
  SparseGraph out(original.size(), edges);
  if (g.has_edge_lambda()) {
    std::size_t k = 0;
    // kept edges keep their relative order, so the k-th one is edge k of `out`
    for (std::size_t e = 0; e < g.n_edges(); ++e) {
      if (comp[g.edges()[e].first] != best) continue;
      out.set_lambda(2 * k, g.lambda(2 * e));
      out.set_lambda(2 * k + 1, g.lambda(2 * e + 1));
      ++k;
    }
  }
  if (kept) *kept = std::move(original);
  return out;
}

// Erdos-Renyi G(n, p) with p = avg_degree / (n - 1), all components.
inline SparseGraph generate_erdos_renyi_full(std::size_t n, double avg_degree, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n must be positive");
  if (!(avg_degree >= 0.0) || (n > 1 && avg_degree > static_cast<double>(n - 1)))
    throw std::invalid_argument("average degree must lie in [0, n-1]");
  const double p = n > 1 ? avg_degree / static_cast<double>(n - 1) : 0.0;
  SparseGraph full(n);
  if (p > 0.0) {
    rng_t rng = make_rng(seed);
    if (p >= 1.0) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) full.add_edge(i, j);
    } else {
      // geometric skipping over the pairs (j, i), j < i
      std::geometric_distribution<long> skip(p);
      for (std::size_t i = 1; i < n; ++i)
        for (long j = skip(rng); j < static_cast<long>(i); j += 1 + skip(rng))
          full.add_edge(static_cast<std::size_t>(j), i);
    }
  }
  full.finalize();
  return full;
}

// Largest connected component of G(n, p).
inline SparseGraph generate_erdos_renyi(std::size_t n, double avg_degree, std::uint64_t seed) {
  return largest_component(generate_erdos_renyi_full(n, avg_degree, seed));
}

// Uniform random recursive tree with shuffled labels.
inline SparseGraph generate_random_tree(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("n must be positive");
  rng_t rng = make_rng(seed);
  std::vector<std::size_t> label(n);
  std::iota(label.begin(), label.end(), 0);
  std::shuffle(label.begin(), label.end(), rng);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> parent(0, i - 1);
    auto u = label[i], v = label[parent(rng)];
    edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(edges.begin(), edges.end());
  return SparseGraph(n, edges);
}

// Edge list: "n_nodes n_edges" then "i j lambda_ij [lambda_ji]" per edge.
// The fourth column appears only when the two directions differ.
inline void write_edge_list(std::ostream& os, const SparseGraph& g, double homogeneous_lambda = 1.0) {
  std::ostringstream line;
  line.precision(17);
  os << g.n_nodes() << ' ' << g.n_edges() << '\n';
  for (std::size_t e = 0; e < g.n_edges(); ++e) {
    auto [u, v] = g.edges()[e];
    line.str("");
    const double fwd = g.lambda(2 * e, homogeneous_lambda), back = g.lambda(2 * e + 1, homogeneous_lambda);
    line << u << ' ' << v << ' ' << fwd;
    if (back != fwd) line << ' ' << back;
    os << line.str() << '\n';
  }
}

inline SparseGraph read_edge_list(std::istream& is) {
  std::size_t n = 0, m = 0;
  if (!(is >> n >> m)) throw std::runtime_error("edge list: bad header");
  std::string rest;
  std::getline(is, rest);
  struct Row {
    std::size_t u, v;
    double fwd, back;
  };
  std::vector<Row> rows;
  rows.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    std::string text;
    if (!std::getline(is, text)) throw std::runtime_error("edge list: truncated");
    std::istringstream ls(text);
    Row r{};
    if (!(ls >> r.u >> r.v >> r.fwd)) throw std::runtime_error("edge list: bad line " + std::to_string(k + 2));
    if (!(ls >> r.back)) r.back = r.fwd;
    if (r.u > r.v) {
      std::swap(r.u, r.v);
      std::swap(r.fwd, r.back);
    }
    rows.push_back(r);
  }
  SparseGraph g(n);
  for (const auto& r : rows) g.add_edge(r.u, r.v);
  g.finalize();
  for (std::size_t e = 0; e < rows.size(); ++e) {
    g.set_lambda(2 * e, rows[e].fwd);
    g.set_lambda(2 * e + 1, rows[e].back);
  }
  return g;
}

}  // namespace nss
