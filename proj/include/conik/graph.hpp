#pragma once

#include <boost/dynamic_bitset.hpp>

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "conik/problem.hpp"
#include "conik/sparse.hpp"

namespace conik {

using Bitset = boost::dynamic_bitset<std::uint64_t>;

// Undirected graph on {0, ..., n-1} capturing which entries of a symmetric
// matrix block are structurally nonzero (self-loops excluded).
struct SparsityPattern {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // canonical (i < j), sorted, unique

  bool operator==(const SparsityPattern&) const = default;
};

inline void canonicalize(SparsityPattern& p) {
  for (auto& e : p.edges)
    if (e.first > e.second) std::swap(e.first, e.second);
  std::sort(p.edges.begin(), p.edges.end());
  p.edges.erase(std::unique(p.edges.begin(), p.edges.end()), p.edges.end());
  std::erase_if(p.edges, [](const auto& e) { return e.first == e.second; });
}

inline std::vector<Bitset> adjacency(const SparsityPattern& p) {
  std::vector<Bitset> adj(p.n, Bitset(p.n));
  for (const auto& [u, v] : p.edges) {
    adj[u].set(v);
    adj[v].set(u);
  }
  return adj;
}

inline double pattern_density(const SparsityPattern& p) {
  if (p.n < 2) return 1.0;
  return 2.0 * static_cast<double>(p.edges.size()) / (static_cast<double>(p.n) * (p.n - 1));
}

// Entry (i, j) of packed position t, inverse of svec_index.
inline std::vector<std::pair<int, int>> triangle_coords(int side) {
  std::vector<std::pair<int, int>> out;
  out.reserve(side * (side + 1) / 2);
  for (int j = 0; j < side; ++j)
    for (int i = 0; i <= j; ++i) out.emplace_back(i, j);
  return out;
}

// Union of the nonzero patterns of all data touching one PSD block: the rows
// [row_offset, row_offset + side*(side+1)/2) of A plus the same slice of b.
inline SparsityPattern aggregate_sparsity(const SparseMatrix& A, const Vector& b,
                                          int row_offset, int side) {
  const int len = side * (side + 1) / 2;
  if (row_offset < 0 || row_offset + len > A.rows() || b.size() != A.rows())
    throw std::invalid_argument("aggregate_sparsity: block out of range");
  const auto coords = triangle_coords(side);
  std::vector<bool> hit(len, false);
  for (int j = 0; j < A.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(A, j); it; ++it) {
      const int r = it.row() - row_offset;
      if (r >= 0 && r < len && it.value() != 0.0) hit[r] = true;
    }
  for (int t = 0; t < len; ++t)
    if (b[row_offset + t] != 0.0) hit[t] = true;

  SparsityPattern p;
  p.n = side;
  for (int t = 0; t < len; ++t)
    if (hit[t] && coords[t].first != coords[t].second) p.edges.push_back(coords[t]);
  canonicalize(p);
  return p;
}

// --- Chordality ----------------------------------------------------------------

// Maximum cardinality search. Returns vertices in elimination order alpha
// (alpha[0] eliminated first); the reverse is a perfect elimination ordering
// iff the graph is chordal.
inline std::vector<int> mcs_order(const std::vector<Bitset>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> weight(n, 0), order(n);
  std::vector<bool> used(n, false);
  for (int k = n - 1; k >= 0; --k) {
    int best = -1;
    for (int v = 0; v < n; ++v)
      if (!used[v] && (best == -1 || weight[v] > weight[best])) best = v;
    used[best] = true;
    order[k] = best;
    for (int v = 0; v < n; ++v)
      if (!used[v] && adj[best].test(v)) ++weight[v];
  }
  return order;
}

// Tarjan-Yannakakis zero-fill test on the elimination order.
inline bool is_perfect_elimination(const std::vector<Bitset>& adj,
                                   const std::vector<int>& order) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> rank(n);
  for (int k = 0; k < n; ++k) rank[order[k]] = k;
  for (int k = 0; k < n; ++k) {
    const int v = order[k];
    Bitset madj = adj[v];
    for (int u = 0; u < n; ++u)
      if (madj.test(u) && rank[u] < rank[v]) madj.reset(u);
    if (madj.none()) continue;
    // follower: the earliest-eliminated member of madj(v)
    int u = -1;
    for (int w = static_cast<int>(madj.find_first()); w != -1;
         w = static_cast<int>(madj.find_next(w)))
      if (u == -1 || rank[w] < rank[u]) u = w;
    Bitset rest = madj;
    rest.reset(u);
    if (!rest.is_subset_of(adj[u])) return false;
  }
  return true;
}

inline bool is_chordal(const SparsityPattern& p) {
  const auto adj = adjacency(p);
  return is_perfect_elimination(adj, mcs_order(adj));
}

// Chordal extension by symbolic elimination. Chordal inputs keep their
// pattern (the MCS order is then a perfect elimination order); everything
// else is eliminated under a fill-reducing (AMD) ordering. The result
// contains the input pattern and is verified chordal.
inline SparsityPattern chordal_extension(const SparsityPattern& p) {
  const int n = p.n;
  if (n == 0) return p;

  auto adj = adjacency(p);
  std::vector<int> elim = mcs_order(adj);
  if (!is_perfect_elimination(adj, elim)) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(2 * p.edges.size() + n);
    for (const auto& [u, v] : p.edges) {
      trips.emplace_back(u, v, 1.0);
      trips.emplace_back(v, u, 1.0);
    }
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 1.0);
    SparseMatrix G = sparse_from_triplets(n, n, trips);
    Eigen::AMDOrdering<int> amd;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> Pinv;
    amd(G, Pinv);
    // Pinv lists the vertex eliminated at each position.
    for (int k = 0; k < n; ++k) elim[k] = Pinv.indices()[k];
  }
  std::vector<bool> eliminated(n, false);
  Bitset frontier(n);
  for (int k = 0; k < n; ++k) {
    const int v = elim[k];
    eliminated[v] = true;
    frontier = adj[v];
    for (int u = 0; u < n; ++u)
      if (frontier.test(u) && eliminated[u]) frontier.reset(u);
    // remaining neighbours become a clique
    for (int u = static_cast<int>(frontier.find_first()); u != -1;
         u = static_cast<int>(frontier.find_next(u))) {
      adj[u] |= frontier;
      adj[u].reset(u);
    }
  }

  SparsityPattern out;
  out.n = n;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (adj[u].test(v) || adj[v].test(u)) out.edges.emplace_back(u, v);
  canonicalize(out);

  const auto check = adjacency(out);
  if (!is_perfect_elimination(check, mcs_order(check)))
    throw std::logic_error("chordal_extension: fill-in pass produced a non-chordal graph");
  return out;
}

// --- Clique tree ------------------------------------------------------------------

// Rooted forest over the maximal cliques of a chordal graph. Cliques are
// stored in post order (every clique's descendants occupy the indices just
// below it), so iterating by index processes children before parents.
// separator[k] = clique k intersected with its parent; supernode[k] is the
// rest. Supernodes partition the vertex set.
struct CliqueTree {
  int nvertices = 0;
  std::vector<std::vector<int>> cliques;  // each sorted ascending
  std::vector<int> parent;                // -1 at roots
  std::vector<std::vector<int>> children;
  std::vector<std::vector<int>> separator;
  std::vector<std::vector<int>> supernode;

  int size() const { return static_cast<int>(cliques.size()); }
};

namespace detail {

struct UnionFind {
  std::vector<int> up;
  explicit UnionFind(int n) : up(n) { std::iota(up.begin(), up.end(), 0); }
  int find(int v) {
    while (up[v] != v) {
      up[v] = up[up[v]];
      v = up[v];
    }
    return v;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    up[b] = a;
    return true;
  }
};

inline std::vector<int> sorted_intersection(const std::vector<int>& a,
                                            const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline std::vector<int> sorted_difference(const std::vector<int>& a,
                                          const std::vector<int>& b) {
  std::vector<int> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline std::vector<int> sorted_union(const std::vector<int>& a,
                                     const std::vector<int>& b) {
  std::vector<int> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace detail

// Builds the rooted post-ordered tree from cliques and parent links, and
// verifies the running intersection property (for every vertex, the cliques
// containing it form a connected subtree).
inline CliqueTree finalize_clique_tree(int nvertices,
                                       std::vector<std::vector<int>> cliques,
                                       const std::vector<int>& parent) {
  const int p = static_cast<int>(cliques.size());
  std::vector<std::vector<int>> kids(p);
  for (int k = 0; k < p; ++k)
    if (parent[k] >= 0) kids[parent[k]].push_back(k);

  // iterative post-order, roots in index order, children in index order
  std::vector<int> order;
  order.reserve(p);
  std::vector<std::pair<int, int>> stack;  // (clique, next child position)
  for (int r = 0; r < p; ++r) {
    if (parent[r] != -1) continue;
    stack.emplace_back(r, 0);
    while (!stack.empty()) {
      auto& [node, pos] = stack.back();
      if (pos < static_cast<int>(kids[node].size())) {
        stack.emplace_back(kids[node][pos++], 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }
  if (static_cast<int>(order.size()) != p)
    throw std::logic_error("finalize_clique_tree: parent links contain a cycle");

  std::vector<int> new_index(p);
  for (int k = 0; k < p; ++k) new_index[order[k]] = k;

  CliqueTree t;
  t.nvertices = nvertices;
  t.cliques.resize(p);
  t.parent.assign(p, -1);
  t.children.resize(p);
  t.separator.resize(p);
  t.supernode.resize(p);
  for (int k = 0; k < p; ++k) {
    auto& c = cliques[order[k]];
    std::sort(c.begin(), c.end());
    t.cliques[k] = std::move(c);
    const int par = parent[order[k]];
    t.parent[k] = par == -1 ? -1 : new_index[par];
  }
  for (int k = 0; k < p; ++k)
    if (t.parent[k] >= 0) t.children[t.parent[k]].push_back(k);
  for (int k = 0; k < p; ++k) {
    if (t.parent[k] >= 0)
      t.separator[k] = detail::sorted_intersection(t.cliques[k], t.cliques[t.parent[k]]);
    t.supernode[k] = detail::sorted_difference(t.cliques[k], t.separator[k]);
  }

  // running intersection check via the induced-subtree property
  std::vector<std::vector<int>> holding(nvertices);
  for (int k = 0; k < p; ++k)
    for (int v : t.cliques[k]) holding[v].push_back(k);
  for (int v = 0; v < nvertices; ++v) {
    if (holding[v].empty())
      throw std::logic_error("finalize_clique_tree: vertex missing from all cliques");
    int roots = 0;
    for (int k : holding[v]) {
      const int par = t.parent[k];
      const bool parent_holds =
          par >= 0 && std::binary_search(t.cliques[par].begin(), t.cliques[par].end(), v);
      if (!parent_holds) ++roots;
    }
    if (roots != 1)
      throw std::logic_error("finalize_clique_tree: running intersection property violated");
  }
  return t;
}

// Maximal cliques of a chordal graph via its perfect elimination ordering.
inline std::vector<std::vector<int>> maximal_cliques(const SparsityPattern& p) {
  const auto adj = adjacency(p);
  const auto order = mcs_order(adj);
  if (!is_perfect_elimination(adj, order))
    throw std::invalid_argument("maximal_cliques: pattern is not chordal");
  const int n = p.n;
  std::vector<int> rank(n);
  for (int k = 0; k < n; ++k) rank[order[k]] = k;

  std::vector<Bitset> cand;
  cand.reserve(n);
  for (int k = 0; k < n; ++k) {
    const int v = order[k];
    Bitset c(n);
    c.set(v);
    for (int u = static_cast<int>(adj[v].find_first()); u != -1;
         u = static_cast<int>(adj[v].find_next(u)))
      if (rank[u] > k) c.set(u);
    cand.push_back(std::move(c));
  }
  std::sort(cand.begin(), cand.end(), [](const Bitset& a, const Bitset& b) {
    if (a.count() != b.count()) return a.count() > b.count();
    return a < b;
  });
  std::vector<Bitset> keep;
  for (const auto& c : cand) {
    bool covered = false;
    for (const auto& k : keep)
      if (c.is_subset_of(k)) {
        covered = true;
        break;
      }
    if (!covered) keep.push_back(c);
  }

  std::vector<std::vector<int>> out;
  out.reserve(keep.size());
  for (const auto& c : keep) {
    std::vector<int> verts;
    for (int v = static_cast<int>(c.find_first()); v != -1;
         v = static_cast<int>(c.find_next(v)))
      verts.push_back(v);
    out.push_back(std::move(verts));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Rooted forest over an arbitrary family of cliques covering the vertices:
// maximum-weight spanning forest of the clique intersection graph (weights
// |Ci n Cj|), each component rooted at its largest clique. For the maximal
// cliques of a chordal graph, maximum weight guarantees the running
// intersection property (checked by finalize_clique_tree either way).
inline CliqueTree clique_forest(int nvertices, std::vector<std::vector<int>> cliques) {
  const int nc = static_cast<int>(cliques.size());
  for (auto& c : cliques) std::sort(c.begin(), c.end());

  struct Edge {
    int w, i, j;
  };
  std::vector<Edge> edges;
  for (int i = 0; i < nc; ++i)
    for (int j = i + 1; j < nc; ++j) {
      const int w =
          static_cast<int>(detail::sorted_intersection(cliques[i], cliques[j]).size());
      if (w > 0) edges.push_back({w, i, j});
    }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.w != b.w) return a.w > b.w;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });

  detail::UnionFind uf(nc);
  std::vector<std::vector<int>> nbters(nc);
  for (const Edge& e : edges)
    if (uf.unite(e.i, e.j)) {
      nbters[e.i].push_back(e.j);
      nbters[e.j].push_back(e.i);
    }

  // root per component: largest clique, ties to the smallest index
  std::vector<int> parent(nc, -2);
  std::vector<int> comp_best(nc, -1);
  for (int i = 0; i < nc; ++i) {
    const int r = uf.find(i);
    int& best = comp_best[r];
    if (best == -1 || cliques[i].size() > cliques[best].size()) best = i;
  }
  std::vector<int> queue;
  for (int i = 0; i < nc; ++i)
    if (comp_best[uf.find(i)] == i) {
      parent[i] = -1;
      queue.push_back(i);
    }
  for (std::size_t h = 0; h < queue.size(); ++h) {
    const int c = queue[h];
    for (int nb : nbters[c])
      if (parent[nb] == -2) {
        parent[nb] = c;
        queue.push_back(nb);
      }
  }
  return finalize_clique_tree(nvertices, std::move(cliques), parent);
}

inline CliqueTree build_clique_tree(const SparsityPattern& p) {
  return clique_forest(p.n, maximal_cliques(p));
}

// --- Pattern text format -----------------------------------------------------
//
// One entry per line, 1-based, lower triangle ("i j" with i >= j). Diagonal
// lines record otherwise isolated vertices. '#' starts a comment.

inline std::string pattern_to_string(const SparsityPattern& p) {
  std::ostringstream os;
  std::vector<bool> touched(p.n, false);
  for (const auto& [u, v] : p.edges) {
    touched[u] = touched[v] = true;
    os << v + 1 << ' ' << u + 1 << '\n';
  }
  for (int v = 0; v < p.n; ++v)
    if (!touched[v]) os << v + 1 << ' ' << v + 1 << '\n';
  return os.str();
}

inline SparsityPattern pattern_from_string(const std::string& text) {
  SparsityPattern p;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    long i, j;
    if (!(ls >> i)) continue;  // blank
    if (!(ls >> j) || i < 1 || j < 1)
      throw std::invalid_argument("pattern: bad entry at line " + std::to_string(lineno));
    p.n = std::max({p.n, static_cast<int>(i), static_cast<int>(j)});
    if (i != j) p.edges.emplace_back(static_cast<int>(j) - 1, static_cast<int>(i) - 1);
  }
  canonicalize(p);
  return p;
}

}  // namespace conik
