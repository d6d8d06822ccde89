// Dense reference implementations the tests compare against. Everything in
// here is deliberately naive: dense matrices, brute-force set enumeration,
// full eigendecompositions. None of it shares code with the library paths
// under test beyond the public data types.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iterator>
#include <random>
#include <stdexcept>
#include <vector>

#include <conik.hpp>

namespace oracle {

using conik::Matrix;
using conik::ProblemData;
using conik::SparsityPattern;
using conik::Vector;

inline Matrix sym_expand(const conik::SparseMatrix& upper) {
  Matrix u = Matrix(upper);
  Matrix full = u + u.transpose();
  full.diagonal() -= u.diagonal();
  return full;
}

// --- QP reference solve -------------------------------------------------------
//
// Accelerated proximal gradient on the dual of
//   min 1/2 x'Px + q'x  s.t.  Ax + s = b, s in K,
// for P positive definite and K made of Zero / Nonneg / Box blocks:
//
//   g(y) = -1/2 (A'y-q)' P^-1 (A'y-q) + b'y - sigma_K(y),
//
// maximized with the prox of sigma_K taken blockwise in closed form. The
// returned triple is accurate to roughly sqrt(machine eps) after enough
// iterations, which is plenty for checking a 1e-3 solver.
struct QpReference {
  Vector x, s, y;
};

inline QpReference fista_qp(const ProblemData& prob, int iters = 40000) {
  const int m = prob.num_constraints();
  const Matrix p = sym_expand(prob.P);
  const Matrix a = Matrix(prob.A);
  Eigen::LLT<Matrix> llt(p);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("fista_qp: P not positive definite");

  const Matrix api = a * llt.solve(a.transpose());
  double lip = 1e-12;
  if (m > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(api);
    lip = std::max(lip, es.eigenvalues().maxCoeff());
  }
  const double t = 1.0 / lip;

  // per-row prox data: kind 0 = free (Zero rows), 1 = nonpositive (Nonneg),
  // 2 = box with bounds
  std::vector<int> kind(m, 0);
  Vector lo = Vector::Zero(m), up = Vector::Zero(m);
  {
    int at = 0;
    for (const auto& cone : prob.cones) {
      const int d = conik::cone_dim(cone);
      if (std::holds_alternative<conik::NonnegCone>(cone)) {
        for (int i = 0; i < d; ++i) kind[at + i] = 1;
      } else if (const auto* box = std::get_if<conik::BoxCone>(&cone)) {
        for (int i = 0; i < d; ++i) {
          kind[at + i] = 2;
          lo[at + i] = box->lower[i];
          up[at + i] = box->upper[i];
        }
      } else if (!std::holds_alternative<conik::ZeroCone>(cone)) {
        throw std::runtime_error("fista_qp: unsupported cone");
      }
      at += d;
    }
  }

  auto prox = [&](Vector v) {
    for (int i = 0; i < m; ++i) {
      switch (kind[i]) {
        case 0: break;
        case 1: v[i] = std::min(v[i], 0.0); break;
        case 2: {
          const double zp = std::isinf(up[i]) ? -1.0 : v[i] - t * up[i];
          const double zn = std::isinf(lo[i]) ? 1.0 : v[i] - t * lo[i];
          if (zp > 0)
            v[i] = zp;
          else if (zn < 0)
            v[i] = zn;
          else
            v[i] = 0.0;
          break;
        }
      }
    }
    return v;
  };

  Vector y = Vector::Zero(m), yp = y, acc = y;
  double theta = 1.0;
  for (int k = 0; k < iters; ++k) {
    const Vector x = llt.solve(a.transpose() * acc - prob.q);
    y = prox(acc + t * (prob.b - a * x));
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    acc = y + ((theta - 1.0) / theta_next) * (y - yp);
    theta = theta_next;
    yp = y;
  }

  QpReference ref;
  ref.y = y;
  ref.x = llt.solve(a.transpose() * y - prob.q);
  ref.s = prob.b - a * ref.x;
  return ref;
}

// --- DIMACS recomputed densely --------------------------------------------------

struct DenseDimacs {
  double eps1 = 0.0, eps2 = 0.0, eps3 = 0.0;
  double max() const { return std::max(eps1, std::max(eps2, eps3)); }
};

inline DenseDimacs dimacs_dense(const ProblemData& prob, const Vector& x,
                                const Vector& s, const Vector& y,
                                double active_tol = 1e-6) {
  const int m = prob.num_constraints();
  const Matrix a = Matrix(prob.A);
  const Matrix p = sym_expand(prob.P);

  std::vector<bool> active(m, true);
  {
    int at = 0;
    for (const auto& cone : prob.cones) {
      const int d = conik::cone_dim(cone);
      if (const auto* box = std::get_if<conik::BoxCone>(&cone)) {
        for (int i = 0; i < d; ++i) {
          const double tol = active_tol * (1.0 + std::abs(prob.b[at + i]));
          bool on = false;
          if (std::isfinite(box->lower[i]))
            on = on || std::abs(s[at + i] - box->lower[i]) <= tol;
          if (std::isfinite(box->upper[i]))
            on = on || std::abs(s[at + i] - box->upper[i]) <= tol;
          active[at + i] = on;
        }
      }
      at += d;
    }
  }

  Vector rp = a * x + s - prob.b;
  Vector ya = y, ba = prob.b;
  for (int i = 0; i < m; ++i)
    if (!active[i]) {
      rp[i] = 0.0;
      ya[i] = 0.0;
      ba[i] = 0.0;
    }

  DenseDimacs out;
  out.eps1 = rp.norm() / (1.0 + ba.norm());
  out.eps2 = (p * x + prob.q - a.transpose() * ya).norm() / (1.0 + prob.q.norm());
  const double quad = x.dot(p * x);
  const double lin = prob.q.dot(x);
  const double by = (ba - s).dot(ya);  // active bounds priced through the slack
  out.eps3 = std::abs(quad + lin - by) / (1.0 + std::abs(lin) + std::abs(by));
  return out;
}

// --- dense projections ----------------------------------------------------------

inline Matrix psd_clip(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  Vector lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

inline double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  return es.eigenvalues().minCoeff();
}

// Projection onto {vec(S): row sums = column sums = 1} through the full
// equality system: s - Aeq' pinv(Aeq Aeq') (Aeq s - 1). Aeq is rank 2n-1;
// the pseudo-inverse handles the deficiency.
inline Vector dsm_affine_projection(const Vector& s) {
  const int n2 = static_cast<int>(s.size());
  const int n = static_cast<int>(std::lround(std::sqrt(double(n2))));
  if (n * n != n2) throw std::invalid_argument("dsm_affine_projection: not square");
  Matrix aeq = Matrix::Zero(2 * n, n2);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      aeq(i, i + j * n) = 1.0;      // row sums
      aeq(n + j, i + j * n) = 1.0;  // column sums
    }
  const Vector r = aeq * s - Vector::Ones(2 * n);
  const Matrix gram = aeq * aeq.transpose();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(gram);
  return s - aeq.transpose() * cod.solve(r);
}

// Nearest correlation matrix by alternating projections with Dykstra's
// correction: PSD clip alternated with setting the diagonal to one.
inline Matrix nearest_correlation(const Matrix& c, double tol = 1e-7,
                                  int max_iter = 2000) {
  Matrix y = c, ds = Matrix::Zero(c.rows(), c.cols());
  for (int k = 0; k < max_iter; ++k) {
    const Matrix r = y - ds;
    const Matrix x = psd_clip(r);
    ds = x - r;
    Matrix ynext = x;
    ynext.diagonal().setOnes();
    if ((ynext - y).norm() <= tol * std::max(1.0, y.norm())) return ynext;
    y = ynext;
  }
  return y;
}

// --- graph brute force ----------------------------------------------------------

inline std::vector<std::vector<int>> adjacency_sets(const SparsityPattern& p) {
  std::vector<std::vector<int>> adj(p.n);
  for (const auto& [i, j] : p.edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  return adj;
}

namespace detail {

inline void bron_kerbosch(const std::vector<std::vector<int>>& adj,
                          std::vector<int>& r, std::vector<int> p,
                          std::vector<int> x,
                          std::vector<std::vector<int>>& out) {
  if (p.empty() && x.empty()) {
    out.push_back(r);
    return;
  }
  const std::vector<int> pcopy = p;
  for (int v : pcopy) {
    std::vector<int> pn, xn;
    for (int u : p)
      if (std::find(adj[v].begin(), adj[v].end(), u) != adj[v].end())
        pn.push_back(u);
    for (int u : x)
      if (std::find(adj[v].begin(), adj[v].end(), u) != adj[v].end())
        xn.push_back(u);
    r.push_back(v);
    bron_kerbosch(adj, r, pn, xn, out);
    r.pop_back();
    p.erase(std::find(p.begin(), p.end(), v));
    x.push_back(v);
  }
}

}  // namespace detail

inline std::vector<std::vector<int>> maximal_cliques_brute(
    const SparsityPattern& p) {
  const auto adj = adjacency_sets(p);
  std::vector<int> all(p.n);
  for (int i = 0; i < p.n; ++i) all[i] = i;
  std::vector<std::vector<int>> out;
  std::vector<int> r;
  detail::bron_kerbosch(adj, r, all, {}, out);
  for (auto& c : out) std::sort(c.begin(), c.end());
  std::sort(out.begin(), out.end());
  return out;
}

// Chordality by repeated simplicial-vertex elimination: a graph is chordal
// iff one can always find a vertex whose neighbourhood is complete.
inline bool is_chordal_brute(const SparsityPattern& p) {
  std::vector<std::vector<bool>> adj(p.n, std::vector<bool>(p.n, false));
  for (const auto& [i, j] : p.edges) adj[i][j] = adj[j][i] = true;
  std::vector<bool> gone(p.n, false);
  for (int step = 0; step < p.n; ++step) {
    int pick = -1;
    for (int v = 0; v < p.n && pick < 0; ++v) {
      if (gone[v]) continue;
      bool simplicial = true;
      for (int a = 0; a < p.n && simplicial; ++a) {
        if (gone[a] || a == v || !adj[v][a]) continue;
        for (int b = a + 1; b < p.n && simplicial; ++b) {
          if (gone[b] || b == v || !adj[v][b]) continue;
          if (!adj[a][b]) simplicial = false;
        }
      }
      if (simplicial) pick = v;
    }
    if (pick < 0) return false;
    gone[pick] = true;
  }
  return true;
}

// Separating pair: the cliques intersect and removing the intersection
// disconnects their private vertices. Checked by BFS on the punctured graph.
inline bool separating_pair_brute(const SparsityPattern& p,
                                  const std::vector<int>& ci,
                                  const std::vector<int>& cj) {
  std::vector<int> inter;
  std::set_intersection(ci.begin(), ci.end(), cj.begin(), cj.end(),
                        std::back_inserter(inter));
  if (inter.empty()) return false;
  std::vector<bool> removed(p.n, false);
  for (int v : inter) removed[v] = true;

  const auto adj = adjacency_sets(p);
  std::vector<int> comp(p.n, -1);
  int ncomp = 0;
  for (int start = 0; start < p.n; ++start) {
    if (removed[start] || comp[start] >= 0) continue;
    std::vector<int> stack{start};
    comp[start] = ncomp;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int u : adj[v])
        if (!removed[u] && comp[u] < 0) {
          comp[u] = ncomp;
          stack.push_back(u);
        }
    }
    ++ncomp;
  }
  for (int a : ci) {
    if (removed[a]) continue;
    for (int b : cj) {
      if (removed[b]) continue;
      if (comp[a] == comp[b]) return false;
    }
  }
  return true;
}

// Running intersection, the long way: for every clique pair, the intersection
// must be contained in every clique on the tree path between them.
inline bool running_intersection_brute(const conik::CliqueTree& t) {
  const int p = t.size();
  auto ancestors = [&](int l) {
    std::vector<int> path{l};
    for (int v = t.parent[l]; v >= 0; v = t.parent[v]) path.push_back(v);
    return path;
  };
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      std::vector<int> inter;
      std::set_intersection(t.cliques[i].begin(), t.cliques[i].end(),
                            t.cliques[j].begin(), t.cliques[j].end(),
                            std::back_inserter(inter));
      if (inter.empty()) continue;
      const auto pi = ancestors(i), pj = ancestors(j);
      std::vector<int> path;
      // walk up from both ends to the lowest common node, if any
      for (int a : pi) {
        path.push_back(a);
        if (std::find(pj.begin(), pj.end(), a) != pj.end()) break;
      }
      const int meet = path.back();
      if (std::find(pj.begin(), pj.end(), meet) == pj.end()) continue;
      for (int b : pj) {
        if (b == meet) break;
        path.push_back(b);
      }
      for (int node : path)
        for (int v : inter)
          if (!std::binary_search(t.cliques[node].begin(),
                                  t.cliques[node].end(), v))
            return false;
    }
  return true;
}

// --- random inputs ----------------------------------------------------------

inline Matrix random_symmetric(int n, std::mt19937_64& rng, double lo = -1.0,
                               double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(n, n);
  for (int j = 0; j < n; ++j) {
    m(j, j) = u(rng);
    for (int i = 0; i < j; ++i) m(i, j) = m(j, i) = u(rng);
  }
  return m;
}

inline Matrix random_psd(int n, std::mt19937_64& rng) {
  const Matrix b = random_symmetric(n, rng);
  return b * b.transpose() / n;
}

inline SparsityPattern random_pattern(int n, double density,
                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SparsityPattern p;
  p.n = n;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < j; ++i)
      if (u(rng) < density) p.edges.emplace_back(i, j);
  conik::canonicalize(p);
  return p;
}

}  // namespace oracle
