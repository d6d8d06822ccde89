#pragma once

#include <Eigen/OrderingMethods>

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "conik/sparse.hpp"

namespace conik {

enum class LdlOrdering : std::uint8_t { Amd, Natural };

// P' K P = L D L' with unit lower-triangular L and diagonal D. Quasi-definite
// input (leading block positive definite, trailing block negative definite
// on the diagonal) guarantees the factorization exists for any symmetric
// permutation, with exactly n_pos positive pivots.
struct LdlFactors {
  int n = 0;
  int n_pos = 0;
  std::vector<int> perm;  // perm[k] = original index at permuted position k
  std::vector<int> pinv;
  // L strictly lower triangular, CSC, unit diagonal implicit
  std::vector<int> Lp, Li;
  std::vector<double> Lx;
  std::vector<double> D, Dinv;

  int nonzeros() const { return Lp.empty() ? 0 : Lp.back(); }
};

namespace detail {

// Symmetric permutation of an upper-triangular CSC matrix; output is again
// upper triangular with every diagonal entry structurally present.
inline SparseMatrix permute_upper(const SparseMatrix& K, const std::vector<int>& pinv) {
  const int n = static_cast<int>(K.rows());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(K.nonZeros() + n);
  std::vector<bool> has_diag(n, false);
  for (int j = 0; j < K.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(K, j); it; ++it) {
      const int r = pinv[it.row()];
      const int c = pinv[j];
      trips.emplace_back(std::min(r, c), std::max(r, c), it.value());
      if (r == c) has_diag[r] = true;
    }
  for (int j = 0; j < n; ++j)
    if (!has_diag[j]) trips.emplace_back(j, j, 0.0);
  return sparse_from_triplets(n, n, trips);
}

}  // namespace detail

inline LdlFactors ldl_factor(const SparseMatrix& K, int n_pos,
                             LdlOrdering ordering = LdlOrdering::Amd) {
  const int n = static_cast<int>(K.rows());
  if (K.cols() != n) throw std::invalid_argument("ldl_factor: matrix not square");
  if (n_pos < 0 || n_pos > n) throw std::invalid_argument("ldl_factor: bad n_pos");

  LdlFactors F;
  F.n = n;
  F.n_pos = n_pos;
  F.perm.resize(n);
  F.pinv.resize(n);
  if (ordering == LdlOrdering::Amd && n > 0) {
    Eigen::AMDOrdering<int> amd;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> Pinv;
    amd(K, Pinv);  // pattern of K + K' is used internally
    for (int i = 0; i < n; ++i) F.pinv[i] = Pinv.indices()[i];
  } else {
    for (int i = 0; i < n; ++i) F.pinv[i] = i;
  }
  for (int i = 0; i < n; ++i) F.perm[F.pinv[i]] = i;

  const SparseMatrix Kp = detail::permute_upper(K, F.pinv);
  const int* Ap = Kp.outerIndexPtr();
  const int* Ai = Kp.innerIndexPtr();
  const double* Ax = Kp.valuePtr();

  // Elimination tree and column counts of L.
  std::vector<int> parent(n, -1), Lnz(n, 0), flag(n, -1);
  for (int k = 0; k < n; ++k) {
    flag[k] = k;
    for (int p = Ap[k]; p < Ap[k + 1]; ++p) {
      int i = Ai[p];
      if (i >= k) continue;
      while (flag[i] != k) {
        if (parent[i] == -1) parent[i] = k;
        ++Lnz[i];
        flag[i] = k;
        i = parent[i];
      }
    }
  }

  F.Lp.assign(n + 1, 0);
  for (int j = 0; j < n; ++j) F.Lp[j + 1] = F.Lp[j] + Lnz[j];
  F.Li.resize(F.Lp[n]);
  F.Lx.resize(F.Lp[n]);
  F.D.assign(n, 0.0);
  F.Dinv.assign(n, 0.0);

  // Up-looking numeric pass: row k of L solved against columns built so far.
  std::vector<int> next(F.Lp.begin(), F.Lp.end() - 1);
  std::vector<double> y(n, 0.0);
  std::vector<int> y_idx(n), elim(n);
  std::fill(flag.begin(), flag.end(), -1);

  int pos_count = 0;
  for (int k = 0; k < n; ++k) {
    int nnz_y = 0;
    flag[k] = k;
    for (int p = Ap[k]; p < Ap[k + 1]; ++p) {
      const int i = Ai[p];
      if (i == k) {
        F.D[k] = Ax[p];
        continue;
      }
      y[i] = Ax[p];
      int node = i, len = 0;
      while (node != -1 && flag[node] != k) {
        elim[len++] = node;
        flag[node] = k;
        node = parent[node];
      }
      while (len > 0) y_idx[nnz_y++] = elim[--len];
    }
    // Stack order pops descendants before ancestors, a valid elimination order.
    while (nnz_y > 0) {
      const int j = y_idx[--nnz_y];
      const double yj = y[j];
      y[j] = 0.0;
      const double lkj = yj * F.Dinv[j];
      for (int p = F.Lp[j]; p < next[j]; ++p) y[F.Li[p]] -= F.Lx[p] * yj;
      F.Li[next[j]] = k;
      F.Lx[next[j]] = lkj;
      ++next[j];
      F.D[k] -= yj * lkj;
    }
    if (F.D[k] == 0.0)
      throw std::runtime_error("ldl_factor: zero pivot at index " + std::to_string(k) +
                               " (matrix is not quasi-definite)");
    if (F.D[k] > 0.0) ++pos_count;
    F.Dinv[k] = 1.0 / F.D[k];
  }
  if (pos_count != n_pos)
    throw std::runtime_error("ldl_factor: expected " + std::to_string(n_pos) +
                             " positive pivots, found " + std::to_string(pos_count) +
                             " (matrix is not quasi-definite)");
  return F;
}

// In-place permuted triangular solves; work must have length n.
inline void ldl_solve_inplace(const LdlFactors& F, const Vector& rhs, Vector& out,
                              Vector& work) {
  const int n = F.n;
  for (int k = 0; k < n; ++k) work[k] = rhs[F.perm[k]];
  for (int j = 0; j < n; ++j) {
    const double wj = work[j];
    if (wj != 0.0)
      for (int p = F.Lp[j]; p < F.Lp[j + 1]; ++p) work[F.Li[p]] -= F.Lx[p] * wj;
  }
  for (int j = 0; j < n; ++j) work[j] *= F.Dinv[j];
  for (int j = n - 1; j >= 0; --j) {
    double acc = work[j];
    for (int p = F.Lp[j]; p < F.Lp[j + 1]; ++p) acc -= F.Lx[p] * work[F.Li[p]];
    work[j] = acc;
  }
  for (int k = 0; k < n; ++k) out[F.perm[k]] = work[k];
}

inline Vector ldl_solve(const LdlFactors& F, const Vector& rhs) {
  if (rhs.size() != F.n) throw std::invalid_argument("ldl_solve: rhs length mismatch");
  Vector out(F.n), work(F.n);
  ldl_solve_inplace(F, rhs, out, work);
  return out;
}

}  // namespace conik
