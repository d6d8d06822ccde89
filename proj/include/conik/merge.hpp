#pragma once

#include <chrono>
#include <map>
#include <random>
#include <set>

#include "conik/cones.hpp"
#include "conik/graph.hpp"

namespace conik {

// --- Edge weights -------------------------------------------------------------

// Flop-count surrogate: merging pays off when one projection of the union is
// cheaper than two projections of the parts.
inline double nominal_weight(int ci, int cj, int cunion) {
  EdgeWeightFn f;
  f.kind = EdgeWeightKind::Nominal;
  return f(ci, cj, cunion);
}

inline double estimated_weight(double a, double b, int ci, int cj, int cunion) {
  EdgeWeightFn f;
  f.kind = EdgeWeightKind::Estimated;
  f.a = a;
  f.b = b;
  return f(ci, cj, cunion);
}

// Fits t(N) = a*N^3 + b*N^2 to measured dense projection times. Coefficients
// are clamped nonnegative; a degenerate fit falls back to the shipped
// constants so the weight stays a monotone function of the cardinalities.
inline EdgeWeightFn calibrate_edge_weight() {
  using Clock = std::chrono::steady_clock;
  const std::vector<int> sizes = {10, 20, 30, 45, 60, 75};
  std::vector<double> t(sizes.size());
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const int n = sizes[k];
    Vector v(n * (n + 1) / 2);
    for (int i = 0; i < v.size(); ++i) v[i] = dist(rng);
    Vector work = v;
    Eigen::Ref<Vector> wr(work);
    project_psd_triangle(wr);  // warm caches before timing
    int reps = 0;
    const auto t0 = Clock::now();
    double elapsed = 0.0;
    while ((elapsed < 2e-3 && reps < 200) || reps < 3) {
      work = v;
      Eigen::Ref<Vector> r(work);
      project_psd_triangle(r);
      ++reps;
      elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
    }
    t[k] = elapsed / reps;
  }
  // 2x2 normal equations for the basis {N^3, N^2}
  double s33 = 0, s32 = 0, s22 = 0, r3 = 0, r2 = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const double n2 = static_cast<double>(sizes[k]) * sizes[k];
    const double n3 = n2 * sizes[k];
    s33 += n3 * n3;
    s32 += n3 * n2;
    s22 += n2 * n2;
    r3 += n3 * t[k];
    r2 += n2 * t[k];
  }
  const double det = s33 * s22 - s32 * s32;
  EdgeWeightFn out;
  out.kind = EdgeWeightKind::Estimated;
  if (det > 0) {
    const double a = (r3 * s22 - r2 * s32) / det;
    const double b = (s33 * r2 - s32 * r3) / det;
    if (a > 0 || b > 0) {
      out.a = std::max(a, 0.0);
      out.b = std::max(b, 0.0);
    }
  }
  return out;
}

// --- Reduced clique graph -------------------------------------------------------
//
// Vertices are the maximal cliques; (Ci, Cj) is an edge iff the cliques
// intersect and Ci n Cj separates Ci \ Cj from Cj \ Ci in the pattern graph.
// Unlike a clique tree this graph is unique, and it stays a valid reduced
// clique graph of the altered pattern after every permissible merge, which is
// what lets the merge loop work on it directly.

struct ReducedCliqueGraph {
  int nvertices = 0;
  std::vector<Bitset> cliques;      // by slot; merged slots keep the union
  std::vector<bool> active;
  std::vector<std::set<int>> nb;    // adjacency over active slots
  std::map<std::pair<int, int>, double> weight;  // keyed (min, max)

  std::vector<std::vector<int>> active_cliques() const {
    std::vector<std::vector<int>> out;
    for (std::size_t k = 0; k < cliques.size(); ++k) {
      if (!active[k]) continue;
      std::vector<int> verts;
      for (int v = static_cast<int>(cliques[k].find_first()); v != -1;
           v = static_cast<int>(cliques[k].find_next(v)))
        verts.push_back(v);
      out.push_back(std::move(verts));
    }
    return out;
  }

  int edge_count() const { return static_cast<int>(weight.size()); }
};

inline ReducedCliqueGraph build_reduced_clique_graph(
    const SparsityPattern& p, const std::vector<std::vector<int>>& cliques) {
  ReducedCliqueGraph g;
  g.nvertices = p.n;
  g.active.assign(cliques.size(), true);
  g.nb.resize(cliques.size());
  for (const auto& c : cliques) {
    Bitset b(p.n);
    for (int v : c) b.set(v);
    g.cliques.push_back(std::move(b));
  }
  const auto adj = adjacency(p);
  std::vector<int> queue(p.n);
  for (std::size_t i = 0; i < cliques.size(); ++i)
    for (std::size_t j = i + 1; j < cliques.size(); ++j) {
      Bitset inter = g.cliques[i] & g.cliques[j];
      if (inter.none()) continue;
      // BFS from Ci \ Cj with the intersection removed from the graph
      Bitset visited = g.cliques[i] - inter;
      const Bitset target = g.cliques[j] - inter;
      int head = 0, tail = 0;
      for (int v = static_cast<int>(visited.find_first()); v != -1;
           v = static_cast<int>(visited.find_next(v)))
        queue[tail++] = v;
      bool reached = false;
      while (head < tail && !reached) {
        const Bitset next = (adj[queue[head++]] - inter) - visited;
        if (next.intersects(target)) {
          reached = true;
          break;
        }
        visited |= next;
        for (int v = static_cast<int>(next.find_first()); v != -1;
             v = static_cast<int>(next.find_next(v)))
          queue[tail++] = v;
      }
      if (!reached) {
        g.nb[i].insert(static_cast<int>(j));
        g.nb[j].insert(static_cast<int>(i));
        g.weight[{static_cast<int>(i), static_cast<int>(j)}] = 0.0;
      }
    }
  return g;
}

// A merge along (i, j) is permissible when every common neighbour sees both
// cliques through the same intersection; merging then cannot invalidate the
// remaining separating pairs.
inline bool is_permissible(const ReducedCliqueGraph& g, int i, int j) {
  for (int k : g.nb[i]) {
    if (k == j || !g.nb[j].count(k)) continue;
    if ((g.cliques[i] & g.cliques[k]) != (g.cliques[j] & g.cliques[k])) return false;
  }
  return true;
}

// Structural merge: union the cliques into slot min(i,j), drop intra-pair
// edges, redirect boundary edges (deduplicated). Weights of redirected edges
// are left for the caller to refresh.
inline void merge_cliques(ReducedCliqueGraph& g, int i, int j) {
  if (i > j) std::swap(i, j);
  if (!g.active[i] || !g.active[j])
    throw std::invalid_argument("merge_cliques: inactive slot");
  g.cliques[i] |= g.cliques[j];
  g.active[j] = false;
  g.nb[i].erase(j);
  g.nb[j].erase(i);
  g.weight.erase({i, j});
  for (int k : g.nb[j]) {
    g.nb[k].erase(j);
    g.weight.erase({std::min(j, k), std::max(j, k)});
    g.nb[k].insert(i);
    g.nb[i].insert(k);
    g.weight.try_emplace({std::min(i, k), std::max(i, k)}, 0.0);
  }
  g.nb[j].clear();
}

struct MergeOutcome {
  std::vector<std::vector<int>> cliques;
  std::vector<MergeLogEntry> log;
};

namespace detail {
inline std::vector<int> bitset_verts(const Bitset& b) {
  std::vector<int> out;
  for (int v = static_cast<int>(b.find_first()); v != -1;
       v = static_cast<int>(b.find_next(v)))
    out.push_back(v);
  return out;
}
}  // namespace detail

// Greedy strategy on the reduced clique graph: repeatedly take the heaviest
// permissible edge and merge while the weight is positive. Ties go to the
// lexicographically smallest slot pair, so runs are deterministic.
inline MergeOutcome clique_graph_merge(const SparsityPattern& p,
                                       const std::vector<std::vector<int>>& cliques,
                                       const EdgeWeightFn& wfn) {
  ReducedCliqueGraph g = build_reduced_clique_graph(p, cliques);
  auto card = [&](int k) { return static_cast<int>(g.cliques[k].count()); };
  for (auto& [e, w] : g.weight)
    w = wfn(card(e.first), card(e.second),
            static_cast<int>((g.cliques[e.first] | g.cliques[e.second]).count()));

  MergeOutcome out;
  for (;;) {
    // candidates in (weight desc, pair asc) order; first permissible wins
    std::vector<std::pair<const std::pair<int, int>*, double>> cand;
    cand.reserve(g.weight.size());
    for (const auto& [e, w] : g.weight) cand.emplace_back(&e, w);
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return *a.first < *b.first;
    });
    int bi = -1, bj = -1;
    double bw = 0.0;
    for (const auto& [e, w] : cand) {
      if (is_permissible(g, e->first, e->second)) {
        bi = e->first;
        bj = e->second;
        bw = w;
        break;
      }
    }
    if (bi < 0 || !(bw > 0.0)) break;

    auto lhs = detail::bitset_verts(g.cliques[bi]);
    auto rhs = detail::bitset_verts(g.cliques[bj]);
    if (rhs < lhs) std::swap(lhs, rhs);  // slot numbering must not leak into the log
    out.log.push_back({std::move(lhs), std::move(rhs), bw});
    merge_cliques(g, bi, bj);
    const int slot = std::min(bi, bj);
    for (int k : g.nb[slot])
      g.weight[{std::min(slot, k), std::max(slot, k)}] =
          wfn(card(slot), card(k),
              static_cast<int>((g.cliques[slot] | g.cliques[k]).count()));
  }
  out.cliques = g.active_cliques();
  return out;
}

inline MergeOutcome clique_graph_merge(const SparsityPattern& p,
                                       const EdgeWeightFn& wfn) {
  return clique_graph_merge(p, maximal_cliques(p), wfn);
}

// Rebuilds a valid tree from merged cliques: maximum-weight spanning forest
// with weights |Ci n Cj|, components rooted at their largest clique.
inline CliqueTree recover_clique_tree(int nvertices,
                                      const std::vector<std::vector<int>>& cliques) {
  return clique_forest(nvertices, cliques);
}

namespace detail {

struct MutableTree {
  std::vector<std::vector<int>> cliq;  // sorted vertex lists
  std::vector<int> parent;
  std::vector<std::vector<int>> kids;
  std::vector<bool> active;

  explicit MutableTree(const CliqueTree& t)
      : cliq(t.cliques), parent(t.parent), kids(t.children),
        active(t.cliques.size(), true) {}

  // the winner takes the loser's vertices and children; the loser detaches
  // from its own parent (which is the winner itself for parent-child merges)
  void fuse(int winner, int loser) {
    cliq[winner] = sorted_union(cliq[winner], cliq[loser]);
    active[loser] = false;
    auto& pk = kids[parent[loser]];
    pk.erase(std::find(pk.begin(), pk.end(), loser));
    auto& wk = kids[winner];
    for (int gc : kids[loser]) {
      parent[gc] = winner;
      wk.push_back(gc);
    }
    std::sort(wk.begin(), wk.end());
    kids[loser].clear();
  }

  CliqueTree finalize(int nvertices) const {
    const int p = static_cast<int>(cliq.size());
    std::vector<int> remap(p, -1);
    std::vector<std::vector<int>> cl;
    std::vector<int> par;
    for (int k = 0; k < p; ++k)
      if (active[k]) {
        remap[k] = static_cast<int>(cl.size());
        cl.push_back(cliq[k]);
        par.push_back(parent[k]);
      }
    for (auto& pk : par)
      if (pk >= 0) pk = remap[pk];
    return finalize_clique_tree(nvertices, std::move(cl), par);
  }
};

}  // namespace detail

// Bottom-up traversal merging a clique into its parent when the estimated
// fill from completing the pair is small or both supernodes are small:
//
//   (|Cpar| - |eta|)(|Cl| - |eta|) <= t_fill   or   max(|nu_l|, |nu_par|) <= t_size
//
// Sets are re-read live: every test sees the merges already made above it.
inline CliqueTree parent_child_merge(const CliqueTree& tree, double t_fill,
                                     double t_size,
                                     std::vector<MergeLogEntry>* log = nullptr) {
  detail::MutableTree t(tree);
  MergeOutcome out;
  for (int k = tree.size() - 1; k >= 0; --k) {
    if (!t.active[k] || t.parent[k] < 0) continue;
    const int par = t.parent[k];
    const auto eta = detail::sorted_intersection(t.cliq[k], t.cliq[par]);
    const double fill =
        static_cast<double>(t.cliq[par].size() - eta.size()) *
        static_cast<double>(t.cliq[k].size() - eta.size());
    const std::size_t snd_k = t.cliq[k].size() - eta.size();
    std::size_t snd_par = t.cliq[par].size();
    if (t.parent[par] >= 0)
      snd_par -= detail::sorted_intersection(t.cliq[par], t.cliq[t.parent[par]]).size();
    if (fill <= t_fill || std::max(snd_k, snd_par) <= static_cast<std::size_t>(t_size)) {
      out.log.push_back({t.cliq[par], t.cliq[k], fill});
      t.fuse(par, k);
    }
  }
  if (log) *log = std::move(out.log);
  return t.finalize(tree.nvertices);
}

// Two-phase traversal in the style of the SparseCoLO preprocessor: at every
// node, first fuse sibling pairs whose overlap ratio
//
//   min(|Ci n Cj| / |Ci|, |Ci n Cj| / |Cj|)
//
// reaches sigma (a sibling pair whose union covers the parent collapses all
// three), then fuse children into the node by the same ratio, then recurse.
inline CliqueTree sparsecolo_merge(const CliqueTree& tree, double sigma,
                                   std::vector<MergeLogEntry>* log = nullptr) {
  detail::MutableTree t(tree);
  std::vector<MergeLogEntry> entries;

  auto ratio = [&](const std::vector<int>& a, const std::vector<int>& b) {
    const double inter =
        static_cast<double>(detail::sorted_intersection(a, b).size());
    return std::min(inter / static_cast<double>(a.size()),
                    inter / static_cast<double>(b.size()));
  };

  std::vector<int> stack;
  for (int k = tree.size() - 1; k >= 0; --k)
    if (t.parent[k] < 0) stack.push_back(k);
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();

    bool changed = true;
    while (changed) {
      changed = false;
      const auto kids = t.kids[node];  // snapshot; restart after any merge
      for (std::size_t a = 0; a < kids.size() && !changed; ++a)
        for (std::size_t b = a + 1; b < kids.size() && !changed; ++b) {
          const int i = kids[a], j = kids[b];
          const auto uni = detail::sorted_union(t.cliq[i], t.cliq[j]);
          const bool covers_parent =
              std::includes(uni.begin(), uni.end(), t.cliq[node].begin(),
                            t.cliq[node].end());
          const double r = ratio(t.cliq[i], t.cliq[j]);
          if (covers_parent) {
            entries.push_back({t.cliq[node], t.cliq[i], r});
            entries.push_back({t.cliq[node], t.cliq[j], r});
            t.fuse(node, i);
            t.fuse(node, j);
            changed = true;
          } else if (r >= sigma) {
            entries.push_back({t.cliq[i], t.cliq[j], r});
            t.fuse(i, j);
            changed = true;
          }
        }
    }
    changed = true;
    while (changed) {
      changed = false;
      for (int i : t.kids[node]) {
        const double r = ratio(t.cliq[node], t.cliq[i]);
        if (r >= sigma) {
          entries.push_back({t.cliq[node], t.cliq[i], r});
          t.fuse(node, i);
          changed = true;
          break;
        }
      }
    }
    for (auto it = t.kids[node].rbegin(); it != t.kids[node].rend(); ++it)
      stack.push_back(*it);
  }
  if (log) *log = std::move(entries);
  return t.finalize(tree.nvertices);
}

// Strategy dispatch used by the decomposition layer.
inline CliqueTree apply_merge_strategy(const SparsityPattern& pattern,
                                       const CliqueTree& tree,
                                       const MergeStrategy& strategy,
                                       std::vector<MergeLogEntry>* log = nullptr) {
  switch (strategy.kind) {
    case MergeKind::None:
      if (log) log->clear();
      return tree;
    case MergeKind::ParentChild:
      return parent_child_merge(tree, strategy.t_fill, strategy.t_size, log);
    case MergeKind::SparseColo:
      return sparsecolo_merge(tree, strategy.sigma_merge, log);
    case MergeKind::CliqueGraph: {
      auto outcome = clique_graph_merge(pattern, tree.cliques, strategy.weight);
      if (log) *log = std::move(outcome.log);
      return recover_clique_tree(pattern.n, outcome.cliques);
    }
  }
  throw std::logic_error("apply_merge_strategy: unknown strategy");
}

// --- Merge log text form -------------------------------------------------------

inline std::string merge_log_to_string(const std::vector<MergeLogEntry>& log) {
  std::ostringstream os;
  os.precision(17);
  auto put = [&](const std::vector<int>& c) {
    for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << c[i] + 1;
  };
  for (const auto& e : log) {
    put(e.left);
    os << " + ";
    put(e.right);
    os << " : " << e.weight << '\n';
  }
  return os.str();
}

}  // namespace conik
