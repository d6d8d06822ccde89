#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "conik/problem.hpp"

namespace conik {

// --- Scaled triangular (svec) storage ---------------------------------------
//
// A symmetric n x n matrix is packed column by column over the upper
// triangle with off-diagonal entries scaled by sqrt(2):
//
//   svec(V) = (V11, sqrt2*V12, V22, sqrt2*V13, sqrt2*V23, V33, ...)
//
// The scaling makes packing an isometry: <svec(A), svec(B)> = tr(A*B).

inline constexpr double sqrt2 = 1.4142135623730951;

// Packed position of entry (i, j), i <= j, both 0-based.
inline int svec_index(int i, int j) { return j * (j + 1) / 2 + i; }

inline Vector svec(const Matrix& V) {
  if (V.rows() != V.cols()) throw std::invalid_argument("svec: matrix not square");
  const int n = static_cast<int>(V.rows());
  Vector out(n * (n + 1) / 2);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i)
      out[k++] = (i == j) ? V(i, j) : sqrt2 * V(i, j);
  return out;
}

inline Matrix smat(const Vector& v) {
  const int n = triangle_side(static_cast<int>(v.size()));
  if (n < 0) throw std::invalid_argument("smat: length is not a triangular number");
  Matrix out(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) {
      const double val = (i == j) ? v[k] : v[k] / sqrt2;
      out(i, j) = val;
      out(j, i) = val;
      ++k;
    }
  return out;
}

// --- CSC helpers -------------------------------------------------------------

// Keeps the upper triangle (including the diagonal) of a symmetric matrix
// given in full or already-upper form.
inline SparseMatrix upper_triangular(const SparseMatrix& M) {
  SparseMatrix out = M.triangularView<Eigen::Upper>();
  out.makeCompressed();
  return out;
}

inline SparseMatrix sparse_from_triplets(
    int rows, int cols, const std::vector<Eigen::Triplet<double>>& trips) {
  SparseMatrix out(rows, cols);
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

inline Matrix dense(const SparseMatrix& M) { return Matrix(M); }

// Full symmetric matrix from upper-triangle storage.
inline SparseMatrix symmetrize_upper(const SparseMatrix& U) {
  SparseMatrix full = U.selfadjointView<Eigen::Upper>();
  full.makeCompressed();
  return full;
}

// --- KKT assembly ------------------------------------------------------------
//
// Upper triangle of the quasi-definite matrix
//
//   [ P + sigma*I      A'          ]
//   [ A            -diag(1./rho)   ]
//
// used by every iteration's linear solve. rho holds one entry per constraint
// row. The full diagonal is stored structurally even where values vanish so
// the factorization below never meets a structurally missing pivot.

inline SparseMatrix kkt_assemble(const SparseMatrix& P, const SparseMatrix& A,
                                 double sigma, const Vector& rho) {
  const int n = static_cast<int>(P.rows());
  const int m = static_cast<int>(A.rows());
  if (P.cols() != n) throw std::invalid_argument("kkt_assemble: P not square");
  if (A.cols() != n && m > 0)
    throw std::invalid_argument("kkt_assemble: A column count mismatch");
  if (rho.size() != m) throw std::invalid_argument("kkt_assemble: rho length mismatch");
  for (int i = 0; i < m; ++i)
    if (!(rho[i] > 0)) throw std::invalid_argument("kkt_assemble: rho must be positive");

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(P.nonZeros() + A.nonZeros() + n + m);

  std::vector<bool> has_diag(n, false);
  for (int j = 0; j < P.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(P, j); it; ++it) {
      if (it.row() > j)
        throw std::invalid_argument("kkt_assemble: P must be upper triangular");
      double v = it.value();
      if (it.row() == j) {
        v += sigma;
        has_diag[j] = true;
      }
      trips.emplace_back(it.row(), j, v);
    }
  for (int j = 0; j < n; ++j)
    if (!has_diag[j]) trips.emplace_back(j, j, sigma);

  // A' block: column n+i of the KKT matrix is row i of A.
  for (int j = 0; j < A.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(A, j); it; ++it)
      trips.emplace_back(j, n + it.row(), it.value());

  for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, -1.0 / rho[i]);

  return sparse_from_triplets(n + m, n + m, trips);
}

inline SparseMatrix kkt_assemble(const SparseMatrix& P, const SparseMatrix& A,
                                 double sigma, double rho) {
  return kkt_assemble(P, A, sigma, Vector::Constant(A.rows(), rho));
}

}  // namespace conik
