#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "conik/cones.hpp"
#include "conik/graph.hpp"
#include "conik/problem.hpp"
#include "conik/sparse.hpp"

namespace conik {

// Deterministic problem families for tests and benchmarks. Each generator
// draws from its own seeded engine in a fixed order, so equal arguments
// reproduce identical data.

// --- Sparse SDPs with a prescribed aggregate pattern --------------------------

// N_b diagonal d-blocks coupled by a w-wide arrow head, matrix side
// N_b*d + w. Chordal as given: any cycle through two blocks runs through the
// head, which is complete, so it always has a chord.
inline SparsityPattern block_arrow_pattern(int d, int n_blocks, int w) {
  if (d < 1 || n_blocks < 1 || w < 0)
    throw std::invalid_argument("block_arrow_pattern: need d >= 1, n_blocks >= 1, w >= 0");
  SparsityPattern p;
  p.n = n_blocks * d + w;
  const int head = n_blocks * d;
  for (int b = 0; b < n_blocks; ++b)
    for (int j = b * d; j < (b + 1) * d; ++j)
      for (int i = b * d; i < j; ++i) p.edges.emplace_back(i, j);
  for (int j = head; j < p.n; ++j)
    for (int i = 0; i < j; ++i) p.edges.emplace_back(i, j);
  canonicalize(p);
  return p;
}

// Dual-form SDP over one PSD block with the given aggregate pattern:
//
//   minimize    q'x
//   subject to  sum_k x_k A_k + S = C,   S psd,
//
// with every A_k dense on the pattern. A strictly feasible pair is planted:
// C = sum_k xhat_k A_k + S0 with S0 diagonally dominant on the pattern, and
// q_k = -tr(A_k Yhat) for a positive definite Yhat, so the instance is
// solvable with a finite objective.
inline ProblemData gen_pattern_sdp(const SparsityPattern& pattern, int m,
                                   std::uint64_t seed) {
  const int side = pattern.n;
  if (side < 1) throw std::invalid_argument("gen_pattern_sdp: empty pattern");
  if (m < 1) throw std::invalid_argument("gen_pattern_sdp: need at least one variable");

  std::vector<std::vector<bool>> on(side, std::vector<bool>(side, false));
  for (int i = 0; i < side; ++i) on[i][i] = true;
  for (const auto& [i, j] : pattern.edges) {
    on[i][j] = true;
    on[j][i] = true;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto sym_on_pattern = [&](Matrix& M) {
    M.setZero();
    for (int j = 0; j < side; ++j)
      for (int i = 0; i <= j; ++i)
        if (on[i][j]) {
          const double v = u(rng);
          M(i, j) = v;
          M(j, i) = v;
        }
  };

  std::vector<Matrix> A(m, Matrix(side, side));
  for (int k = 0; k < m; ++k) sym_on_pattern(A[k]);

  Matrix S0(side, side);
  sym_on_pattern(S0);
  for (int i = 0; i < side; ++i) {
    S0(i, i) = 0.0;
    S0(i, i) = 1.0 + S0.row(i).cwiseAbs().sum();
  }

  Vector xhat(m);
  for (int k = 0; k < m; ++k) xhat[k] = u(rng);
  Matrix C = S0;
  for (int k = 0; k < m; ++k) C += xhat[k] * A[k];

  Matrix B(side, side);
  for (int j = 0; j < side; ++j)
    for (int i = 0; i < side; ++i) B(i, j) = u(rng);
  Matrix Yhat = B * B.transpose() / side;
  Yhat += Matrix::Identity(side, side);

  ProblemData prob;
  prob.q = Vector(m);
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < m; ++k) {
    prob.q[k] = -A[k].cwiseProduct(Yhat).sum();
    const Vector col = svec(A[k]);
    for (int r = 0; r < col.size(); ++r)
      if (col[r] != 0.0) trips.emplace_back(r, k, col[r]);
  }
  const int rows = side * (side + 1) / 2;
  prob.P = SparseMatrix(m, m);
  prob.P.makeCompressed();
  prob.A = sparse_from_triplets(rows, m, trips);
  prob.b = svec(C);
  prob.cones = {PsdTriangleCone{rows}};
  return prob;
}

inline ProblemData gen_block_arrow(int d, int n_blocks, int w, int m,
                                   std::uint64_t seed) {
  return gen_pattern_sdp(block_arrow_pattern(d, n_blocks, w), m, seed);
}

// --- Nearest correlation matrix ------------------------------------------------
//
//   minimize    0.5 ||X - C||_F^2
//   subject to  X_ii = 1,  X psd,
//
// over the full n^2 matrix entries (column-major), with C symmetric and
// entries U(-1, 1). The PSD block reads the symmetrized matrix through
// scaled-triangle rows; since the objective is symmetric in each (i,j)/(j,i)
// pair this leaves the optimal matrix unchanged. The solver objective omits
// the constant 0.5 ||C||_F^2.

inline ProblemData gen_nearest_corr(int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_nearest_corr: need n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix C(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) {
      const double v = u(rng);
      C(i, j) = v;
      C(j, i) = v;
    }

  const int nv = n * n;
  const int tri = n * (n + 1) / 2;
  ProblemData prob;

  std::vector<Eigen::Triplet<double>> ptrips;
  ptrips.reserve(nv);
  for (int k = 0; k < nv; ++k) ptrips.emplace_back(k, k, 1.0);
  prob.P = sparse_from_triplets(nv, nv, ptrips);

  prob.q = Vector(nv);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) prob.q[i + j * n] = -C(i, j);

  std::vector<Eigen::Triplet<double>> atrips;
  prob.b = Vector::Zero(n + tri);
  for (int i = 0; i < n; ++i) {
    atrips.emplace_back(i, i + i * n, 1.0);
    prob.b[i] = 1.0;
  }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) {
      const int row = n + svec_index(i, j);
      if (i == j) {
        atrips.emplace_back(row, i + j * n, -1.0);
      } else {
        atrips.emplace_back(row, i + j * n, -1.0 / sqrt2);
        atrips.emplace_back(row, j + i * n, -1.0 / sqrt2);
      }
    }
  prob.A = sparse_from_triplets(n + tri, nv, atrips);
  prob.cones = {ZeroCone{n}, PsdTriangleCone{tri}};
  return prob;
}

// --- Nearest doubly stochastic matrix -------------------------------------------
//
//   minimize    0.5 ||X - C||_F^2
//   subject to  X 1 = 1,  X' 1 = 1,  X >= 0,
//
// with C symmetric and entries U(0, 1). The qp form stacks the 2n sum
// equalities over a Nonneg block (3n^2 stored entries); the custom form
// replaces the equalities by a kernel that projects directly onto the
// sum-affine set, leaving only two stacked negated identities (2n^2 entries).

enum class DsmForm : std::uint8_t { Qp, Custom };

inline ProblemData gen_doubly_stochastic(int n, std::uint64_t seed, DsmForm form) {
  if (n < 1) throw std::invalid_argument("gen_doubly_stochastic: need n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix C(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) {
      const double v = u(rng);
      C(i, j) = v;
      C(j, i) = v;
    }

  const int nv = n * n;
  ProblemData prob;
  std::vector<Eigen::Triplet<double>> ptrips;
  ptrips.reserve(nv);
  for (int k = 0; k < nv; ++k) ptrips.emplace_back(k, k, 1.0);
  prob.P = sparse_from_triplets(nv, nv, ptrips);
  prob.q = Vector(nv);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) prob.q[i + j * n] = -C(i, j);

  std::vector<Eigen::Triplet<double>> atrips;
  if (form == DsmForm::Qp) {
    atrips.reserve(3 * nv);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) atrips.emplace_back(i, i + j * n, 1.0);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) atrips.emplace_back(n + j, i + j * n, 1.0);
    for (int k = 0; k < nv; ++k) atrips.emplace_back(2 * n + k, k, -1.0);
    prob.A = sparse_from_triplets(2 * n + nv, nv, atrips);
    prob.b = Vector::Zero(2 * n + nv);
    prob.b.head(2 * n).setOnes();
    prob.cones = {ZeroCone{2 * n}, NonnegCone{nv}};
  } else {
    atrips.reserve(2 * nv);
    for (int k = 0; k < nv; ++k) {
      atrips.emplace_back(k, k, -1.0);
      atrips.emplace_back(nv + k, k, -1.0);
    }
    prob.A = sparse_from_triplets(2 * nv, nv, atrips);
    prob.b = Vector::Zero(2 * nv);
    prob.cones = {CustomCone{nv, DoublyStochasticAffineKernel::kName,
                             std::make_shared<DoublyStochasticAffineKernel>(n)},
                  NonnegCone{nv}};
  }
  return prob;
}

// --- Random strongly convex QPs --------------------------------------------------
//
// P = R'R / n + I with dense random R, dense constraint rows, and a planted
// point xhat: equality rows take b = A xhat, inequality rows add interior
// slack, so the instance is feasible and the strongly convex objective makes
// it uniquely solvable. Rows split roughly 1/4 equality, 1/2 nonnegative
// slack, 1/4 boxed; every fourth box row is one-sided to exercise infinite
// bounds.

inline ProblemData gen_random_qp(int n, int m, std::uint64_t seed) {
  if (n < 1 || m < 0) throw std::invalid_argument("gen_random_qp: need n >= 1, m >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  Matrix R(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) R(i, j) = u(rng);
  Matrix Pd = R.transpose() * R / n;
  Pd += Matrix::Identity(n, n);

  ProblemData prob;
  std::vector<Eigen::Triplet<double>> ptrips;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) ptrips.emplace_back(i, j, Pd(i, j));
  prob.P = sparse_from_triplets(n, n, ptrips);
  prob.q = Vector(n);
  for (int i = 0; i < n; ++i) prob.q[i] = u(rng);

  Matrix Ad(m, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m; ++i) Ad(i, j) = u(rng);
  Vector xhat(n);
  for (int i = 0; i < n; ++i) xhat[i] = u(rng);
  const Vector ax = Ad * xhat;

  const int m_zero = m / 4;
  const int m_box = m / 4;
  const int m_nonneg = m - m_zero - m_box;
  prob.b = Vector(m);
  for (int i = 0; i < m_zero; ++i) prob.b[i] = ax[i];
  for (int i = m_zero; i < m_zero + m_nonneg; ++i) prob.b[i] = ax[i] + u01(rng);
  BoxCone box;
  box.lower = Vector(m_box);
  box.upper = Vector(m_box);
  for (int k = 0; k < m_box; ++k) {
    const int i = m_zero + m_nonneg + k;
    const double center = u(rng);
    const double half = 0.1 + u01(rng);
    box.lower[k] = center - half;
    box.upper[k] = k % 4 == 3 ? inf : center + half;
    prob.b[i] = ax[i] + center;
  }

  std::vector<Eigen::Triplet<double>> atrips;
  atrips.reserve(static_cast<std::size_t>(m) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m; ++i) atrips.emplace_back(i, j, Ad(i, j));
  prob.A = sparse_from_triplets(m, n, atrips);

  if (m_zero > 0) prob.cones.push_back(ZeroCone{m_zero});
  if (m_nonneg > 0) prob.cones.push_back(NonnegCone{m_nonneg});
  if (m_box > 0) prob.cones.push_back(std::move(box));
  return prob;
}

}  // namespace conik
