#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "conik/cones.hpp"
#include "conik/problem.hpp"
#include "conik/sparse.hpp"

namespace conik {

namespace detail {

// 17 significant digits: enough for strtod to reproduce the exact double.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Tokenized text file that remembers the source line of every token, so parse
// errors can point at the offending line. Comment prefixes and extra
// separator characters vary by format and are handled while tokenizing.
struct TokenStream {
  std::string path;
  std::vector<std::string> toks;
  std::vector<int> lines;
  std::size_t pos = 0;
  int last_line = 0;

  int line() const { return pos < lines.size() ? lines[pos] : last_line; }
  bool done() const { return pos >= toks.size(); }
  const std::string* peek() const { return done() ? nullptr : &toks[pos]; }

  [[noreturn]] void fail_at(int ln, const std::string& msg) const {
    throw std::runtime_error(path + ":" + std::to_string(ln) + ": " + msg);
  }
  [[noreturn]] void fail(const std::string& msg) const { fail_at(line(), msg); }

  const std::string& next(const char* what) {
    if (done()) fail(std::string("unexpected end of file, expected ") + what);
    return toks[pos++];
  }

  long next_int(const char* what) {
    if (done()) fail(std::string("unexpected end of file, expected ") + what);
    const std::string& t = toks[pos];
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size() || t.empty())
      fail("expected " + std::string(what) + ", got '" + t + "'");
    ++pos;
    return v;
  }

  double next_double(const char* what) {
    if (done()) fail(std::string("unexpected end of file, expected ") + what);
    const std::string& t = toks[pos];
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || t.empty())
      fail("expected " + std::string(what) + ", got '" + t + "'");
    ++pos;
    return v;
  }
};

inline TokenStream tokenize_file(const std::string& path, const char* comment_chars,
                                 const char* separators) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  TokenStream ts;
  ts.path = path;
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (std::strchr(comment_chars, line[first])) continue;
    for (char& c : line)
      if (*separators && std::strchr(separators, c)) c = ' ';
    std::istringstream split(line);
    std::string t;
    while (split >> t) {
      ts.toks.push_back(t);
      ts.lines.push_back(ln);
    }
  }
  ts.last_line = ln;
  return ts;
}

}  // namespace detail

// --- SDPA sparse format -------------------------------------------------------
//
// The ".dat-s" file holds the dual-form SDP
//
//   maximize    c'x
//   subject to  x_1 A_1 + ... + x_m A_m + S = A_0,   S in a product of blocks,
//
// which maps onto the solver's primal form by relabeling: one variable per
// constraint matrix, q = -c, column k of A = packed A_k, b = packed A_0.
// PSD blocks pack into scaled triangular rows; diagonal blocks (negative size)
// become Nonneg rows with entries taken verbatim.
//
// Headers may be space- or comma-separated and may use {} () braces; comment
// lines start with '"' or '*'. Every parse error names the source line.

inline ProblemData read_sdpa(const std::string& path) {
  detail::TokenStream ts = detail::tokenize_file(path, "\"*", ",{}()");
  if (ts.done()) ts.fail("empty file");

  int at = ts.line();
  const long nvars = ts.next_int("constraint matrix count");
  if (nvars < 1) ts.fail_at(at, "constraint matrix count must be positive");
  at = ts.line();
  const long nblocks = ts.next_int("block count");
  if (nblocks < 1) ts.fail_at(at, "block count must be positive");

  std::vector<long> bsize(nblocks);
  std::vector<int> row_offset(nblocks + 1, 0);
  std::vector<ConeSpec> cones;
  cones.reserve(nblocks);
  for (long k = 0; k < nblocks; ++k) {
    at = ts.line();
    bsize[k] = ts.next_int("block size");
    if (bsize[k] == 0) ts.fail_at(at, "block size must be nonzero");
    int rows;
    if (bsize[k] < 0) {
      rows = static_cast<int>(-bsize[k]);
      cones.push_back(NonnegCone{rows});
    } else {
      const int side = static_cast<int>(bsize[k]);
      rows = side * (side + 1) / 2;
      cones.push_back(PsdTriangleCone{rows});
    }
    row_offset[k + 1] = row_offset[k] + rows;
  }
  const int m = row_offset[nblocks];
  const int n = static_cast<int>(nvars);

  Vector q(n);
  for (int k = 0; k < n; ++k) q[k] = -ts.next_double("objective entry");

  Vector b = Vector::Zero(m);
  std::vector<Eigen::Triplet<double>> atrip;
  while (!ts.done()) {
    at = ts.line();
    const long matno = ts.next_int("matrix index");
    const long blkno = ts.next_int("block index");
    long i = ts.next_int("row index");
    long j = ts.next_int("column index");
    const double v = ts.next_double("entry value");

    if (matno < 0 || matno > nvars)
      ts.fail_at(at, "matrix index " + std::to_string(matno) + " outside [0, " +
                         std::to_string(nvars) + "]");
    if (blkno < 1 || blkno > nblocks)
      ts.fail_at(at, "block index " + std::to_string(blkno) + " outside [1, " +
                         std::to_string(nblocks) + "]");
    const long size = bsize[blkno - 1];
    const long side = size < 0 ? -size : size;
    if (i < 1 || j < 1 || i > side || j > side)
      ts.fail_at(at, "entry (" + std::to_string(i) + "," + std::to_string(j) +
                         ") outside block " + std::to_string(blkno) + " of size " +
                         std::to_string(side));
    if (i > j) std::swap(i, j);

    int row;
    double val = v;
    if (size < 0) {
      if (i != j)
        ts.fail_at(at, "off-diagonal entry in diagonal block " + std::to_string(blkno));
      row = row_offset[blkno - 1] + static_cast<int>(i) - 1;
    } else {
      row = row_offset[blkno - 1] +
            svec_index(static_cast<int>(i) - 1, static_cast<int>(j) - 1);
      if (i != j) val *= sqrt2;
    }
    if (matno == 0)
      b[row] += val;
    else
      atrip.emplace_back(row, static_cast<int>(matno) - 1, val);
  }

  ProblemData prob;
  prob.P = SparseMatrix(n, n);
  prob.P.makeCompressed();
  prob.q = std::move(q);
  prob.A = sparse_from_triplets(m, n, atrip);
  prob.b = std::move(b);
  prob.cones = std::move(cones);
  return prob;
}

namespace detail {

// Exact preimage of v under x -> fl(sqrt2 * x) when one exists, so that
// writing a scaled off-diagonal and reading it back reproduces v bit for bit.
// The rounded quotient sits within a couple of ulps of any preimage.
inline double unscale_offdiag(double v) {
  const double q0 = v / sqrt2;
  if (sqrt2 * q0 == v) return q0;
  double lo = q0, hi = q0;
  for (int k = 0; k < 3; ++k) {
    lo = std::nextafter(lo, -inf);
    hi = std::nextafter(hi, inf);
    if (sqrt2 * lo == v) return lo;
    if (sqrt2 * hi == v) return hi;
  }
  return q0;
}

// (i, j) of a packed triangular index, both 0-based, i <= j.
inline std::pair<int, int> triangle_unrank(int idx) {
  int j = 0;
  while ((j + 1) * (j + 2) / 2 <= idx) ++j;
  return {idx - j * (j + 1) / 2, j};
}

}  // namespace detail

// Inverse of read_sdpa for problems the format can hold: no quadratic cost and
// only Nonneg / PsdTriangle blocks. Throws invalid_argument otherwise.
inline void write_sdpa(const std::string& path, const ProblemData& prob) {
  if (prob.P.nonZeros() != 0)
    throw std::invalid_argument("write_sdpa: quadratic objective is not representable");
  const int nblocks = static_cast<int>(prob.cones.size());
  std::vector<long> bsize(nblocks);
  std::vector<int> row_offset(nblocks + 1, 0);
  for (int k = 0; k < nblocks; ++k) {
    const ConeSpec& c = prob.cones[k];
    if (const auto* nn = std::get_if<NonnegCone>(&c)) {
      bsize[k] = -nn->dim;
      row_offset[k + 1] = row_offset[k] + nn->dim;
    } else if (const auto* psd = std::get_if<PsdTriangleCone>(&c)) {
      const int side = triangle_side(psd->dim);
      if (side < 0)
        throw std::invalid_argument("write_sdpa: PSD block length is not triangular");
      bsize[k] = side;
      row_offset[k + 1] = row_offset[k] + psd->dim;
    } else {
      throw std::invalid_argument(
          "write_sdpa: only Nonneg and PsdTriangle blocks are representable");
    }
  }
  if (row_offset[nblocks] != prob.num_constraints())
    throw std::invalid_argument("write_sdpa: cone dimensions do not match b");

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_sdpa: cannot open " + path + " for writing");

  const int n = prob.num_vars();
  out << n << "\n" << nblocks << "\n";
  for (int k = 0; k < nblocks; ++k) out << bsize[k] << (k + 1 < nblocks ? " " : "\n");
  for (int k = 0; k < n; ++k)
    out << detail::fmt(-prob.q[k]) << (k + 1 < n ? " " : "\n");

  auto emit = [&](int matno, int row, double v) {
    int blk = 0;
    while (row >= row_offset[blk + 1]) ++blk;
    const int local = row - row_offset[blk];
    int i, j;
    double val = v;
    if (bsize[blk] < 0) {
      i = j = local;
    } else {
      auto [ii, jj] = detail::triangle_unrank(local);
      i = ii;
      j = jj;
      if (i != j) val = detail::unscale_offdiag(v);
    }
    out << matno << ' ' << blk + 1 << ' ' << i + 1 << ' ' << j + 1 << ' '
        << detail::fmt(val) << "\n";
  };

  for (int row = 0; row < prob.num_constraints(); ++row)
    if (prob.b[row] != 0.0) emit(0, row, prob.b[row]);
  for (int col = 0; col < prob.A.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(prob.A, col); it; ++it)
      if (it.value() != 0.0) emit(col + 1, static_cast<int>(it.row()), it.value());

  if (!out) throw std::runtime_error("write_sdpa: write to " + path + " failed");
}

// --- Native problem format ------------------------------------------------------
//
// Versioned plain-text container for ProblemData plus an optional reference
// objective. Layout (tokens; '#' starts a comment line):
//
//   conik-problem 1
//   vars <n>
//   rows <m>
//   P <nnz>      followed by nnz lines "i j value" (upper triangle)
//   q <n values>
//   A <nnz>      followed by nnz lines "i j value"
//   b <m values>
//   cones <count>
//     zero <dim> | nonneg <dim> | soc <dim> | psd-triangle <dim>
//     | box <dim> followed by <dim> lower and <dim> upper bounds
//     | custom <dim> <kernel-name>
//   optimal <value>     (optional)
//   end
//
// Values are written with 17 significant digits, so a write/read cycle
// reproduces every double bit for bit.

struct ProblemFile {
  ProblemData problem;
  std::optional<double> known_optimal;
};

// Re-attaches projection kernels to custom blocks on read, keyed by the name
// stored in the file.
using KernelFactory = std::function<std::shared_ptr<const ConeKernel>(int dim)>;
using KernelRegistry = std::map<std::string, KernelFactory>;

inline KernelRegistry default_kernel_registry() {
  KernelRegistry reg;
  reg[DoublyStochasticAffineKernel::kName] =
      [](int dim) -> std::shared_ptr<const ConeKernel> {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
    if (side < 1 || side * side != dim)
      throw std::runtime_error("doubly-stochastic-affine block length is not a square");
    return std::make_shared<DoublyStochasticAffineKernel>(side);
  };
  return reg;
}

inline void write_problem(const std::string& path, const ProblemData& prob,
                          std::optional<double> known_optimal = std::nullopt) {
  const auto bad = validate(prob);
  if (!bad.empty()) throw std::invalid_argument("write_problem: " + bad.front());

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_problem: cannot open " + path + " for writing");

  out << "conik-problem 1\n";
  out << "vars " << prob.num_vars() << "\n";
  out << "rows " << prob.num_constraints() << "\n";

  auto write_sparse = [&](const char* tag, const SparseMatrix& M) {
    out << tag << ' ' << M.nonZeros() << "\n";
    for (int j = 0; j < M.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(M, j); it; ++it)
        out << it.row() << ' ' << j << ' ' << detail::fmt(it.value()) << "\n";
  };
  auto write_vector = [&](const char* tag, const Vector& v) {
    out << tag;
    for (int i = 0; i < v.size(); ++i) out << (i || *tag ? " " : "") << detail::fmt(v[i]);
    out << "\n";
  };

  write_sparse("P", prob.P);
  write_vector("q", prob.q);
  write_sparse("A", prob.A);
  write_vector("b", prob.b);

  out << "cones " << prob.cones.size() << "\n";
  for (const ConeSpec& c : prob.cones) {
    if (const auto* z = std::get_if<ZeroCone>(&c)) {
      out << "zero " << z->dim << "\n";
    } else if (const auto* nn = std::get_if<NonnegCone>(&c)) {
      out << "nonneg " << nn->dim << "\n";
    } else if (const auto* box = std::get_if<BoxCone>(&c)) {
      out << "box " << box->lower.size() << "\n";
      write_vector("", box->lower);
      write_vector("", box->upper);
    } else if (const auto* soc = std::get_if<SecondOrderCone>(&c)) {
      out << "soc " << soc->dim << "\n";
    } else if (const auto* psd = std::get_if<PsdTriangleCone>(&c)) {
      out << "psd-triangle " << psd->dim << "\n";
    } else if (const auto* cc = std::get_if<CustomCone>(&c)) {
      if (cc->name.empty() ||
          cc->name.find_first_of(" \t\n") != std::string::npos)
        throw std::invalid_argument("write_problem: custom cone needs a single-token name");
      out << "custom " << cc->dim << ' ' << cc->name << "\n";
    }
  }
  if (known_optimal) out << "optimal " << detail::fmt(*known_optimal) << "\n";
  out << "end\n";

  if (!out) throw std::runtime_error("write_problem: write to " + path + " failed");
}

inline ProblemFile read_problem_file(const std::string& path,
                                     const KernelRegistry& registry = default_kernel_registry()) {
  detail::TokenStream ts = detail::tokenize_file(path, "#", "");
  if (ts.done()) ts.fail("empty file");

  int at = ts.line();
  const std::string magic = ts.next("format name");
  if (magic != "conik-problem")
    ts.fail_at(at, "not a conik-problem file (starts with '" + magic + "')");
  at = ts.line();
  const long version = ts.next_int("format version");
  if (version != 1)
    ts.fail_at(at, "format version " + std::to_string(version) +
                       " is not supported; this reader handles version 1");

  auto expect = [&](const char* kw) {
    const int ln = ts.line();
    const std::string& t = ts.next(kw);
    if (t != kw) ts.fail_at(ln, "expected '" + std::string(kw) + "', got '" + t + "'");
  };
  auto read_count = [&](const char* what) {
    const int ln = ts.line();
    const long v = ts.next_int(what);
    if (v < 0) ts.fail_at(ln, std::string(what) + " must be nonnegative");
    return static_cast<int>(v);
  };

  expect("vars");
  const int n = read_count("variable count");
  expect("rows");
  const int m = read_count("row count");

  auto read_sparse = [&](const char* tag, int rows, int cols) {
    expect(tag);
    const int nnz = read_count("entry count");
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(nnz);
    for (int k = 0; k < nnz; ++k) {
      const int ln = ts.line();
      const long i = ts.next_int("row index");
      const long j = ts.next_int("column index");
      const double v = ts.next_double("value");
      if (i < 0 || i >= rows || j < 0 || j >= cols)
        ts.fail_at(ln, "entry (" + std::to_string(i) + "," + std::to_string(j) +
                           ") outside " + std::to_string(rows) + "x" +
                           std::to_string(cols));
      trips.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
    }
    return sparse_from_triplets(rows, cols, trips);
  };
  auto read_vector = [&](const char* tag, int len) {
    if (*tag) expect(tag);
    Vector v(len);
    for (int i = 0; i < len; ++i) v[i] = ts.next_double("vector entry");
    return v;
  };

  ProblemFile pf;
  ProblemData& prob = pf.problem;
  prob.P = read_sparse("P", n, n);
  prob.q = read_vector("q", n);
  prob.A = read_sparse("A", m, n);
  prob.b = read_vector("b", m);

  expect("cones");
  const int ncones = read_count("cone count");
  prob.cones.reserve(ncones);
  for (int k = 0; k < ncones; ++k) {
    const int ln = ts.line();
    const std::string tag = ts.next("cone type");
    if (tag == "zero") {
      prob.cones.push_back(ZeroCone{read_count("cone dimension")});
    } else if (tag == "nonneg") {
      prob.cones.push_back(NonnegCone{read_count("cone dimension")});
    } else if (tag == "soc") {
      prob.cones.push_back(SecondOrderCone{read_count("cone dimension")});
    } else if (tag == "psd-triangle") {
      prob.cones.push_back(PsdTriangleCone{read_count("cone dimension")});
    } else if (tag == "box") {
      const int d = read_count("cone dimension");
      BoxCone box;
      box.lower = read_vector("", d);
      box.upper = read_vector("", d);
      prob.cones.push_back(std::move(box));
    } else if (tag == "custom") {
      const int d = read_count("cone dimension");
      const int nameln = ts.line();
      const std::string name = ts.next("kernel name");
      const auto it = registry.find(name);
      if (it == registry.end())
        ts.fail_at(nameln, "unknown custom cone kernel '" + name + "'");
      prob.cones.push_back(CustomCone{d, name, it->second(d)});
    } else {
      ts.fail_at(ln, "unknown cone type '" + tag + "'");
    }
  }

  if (const std::string* t = ts.peek(); t && *t == "optimal") {
    ts.next("optimal");
    pf.known_optimal = ts.next_double("reference objective");
  }
  expect("end");
  if (!ts.done()) ts.fail("trailing content after 'end'");

  const auto bad = validate(prob);
  if (!bad.empty())
    throw std::runtime_error(path + ": invalid problem: " + bad.front());
  return pf;
}

inline ProblemData read_problem(const std::string& path,
                                const KernelRegistry& registry = default_kernel_registry()) {
  return read_problem_file(path, registry).problem;
}

// Format dispatch on the file name: SDPA for ".dat-s", native otherwise.
inline ProblemFile load_problem(const std::string& path,
                                const KernelRegistry& registry = default_kernel_registry()) {
  if (path.size() >= 6 && path.compare(path.size() - 6, 6, ".dat-s") == 0)
    return ProblemFile{read_sdpa(path), std::nullopt};
  return read_problem_file(path, registry);
}

// --- Solution quality ----------------------------------------------------------
//
// Normalized feasibility and gap measures in the DIMACS style:
//
//   eps1: primal feasibility  ||(Ax + s - b)_a|| / (1 + ||b_a||)
//   eps2: dual stationarity   ||Px + q - A_a' y_a|| / (1 + ||q||)
//   eps3: objective gap       |x'Px + q'x - g| / (1 + |q'x| + |g|),
//         g = (b - s)_a' y_a
//
// restricted to active rows (subscript a). A box row counts as active when its
// slack sits within tol * (1 + |b_i|) of a finite bound; rows of every other
// block type are always active. Dropping inactive box rows keeps all three
// measures finite and meaningful when bounds are huge or infinite: such rows
// carry a vanishing multiplier, so removing them only deletes noise terms.
// The gap pairs y with b - s rather than b: given stationarity the identity
// x'Px + q'x - (b-s)'y = y'(Ax + s - b) holds for any multiplier, so this
// form stays exact for active box rows, whose slack sits at a nonzero bound.
// Rows with s = 0 recover the classical b'y pairing.

struct DimacsErrors {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double eps3 = 0.0;
  double max_error() const { return std::max({eps1, eps2, eps3}); }
};

inline DimacsErrors dimacs_errors(const ProblemData& prob, const SolveResult& r,
                                  double active_tol = 1e-6) {
  const int m = prob.num_constraints();
  if (r.x.size() != prob.num_vars() || r.s.size() != m || r.y.size() != m)
    throw std::invalid_argument("dimacs_errors: result does not match problem dimensions");

  std::vector<bool> active(m, true);
  int off = 0;
  for (const ConeSpec& c : prob.cones) {
    const int d = cone_dim(c);
    if (const auto* box = std::get_if<BoxCone>(&c)) {
      for (int i = 0; i < d; ++i) {
        const double tol = active_tol * (1.0 + std::abs(prob.b[off + i]));
        const double s = r.s[off + i];
        const bool at_lower = std::isfinite(box->lower[i]) && s - box->lower[i] <= tol;
        const bool at_upper = std::isfinite(box->upper[i]) && box->upper[i] - s <= tol;
        active[off + i] = at_lower || at_upper;
      }
    }
    off += d;
  }

  const Vector rp = prob.A * r.x + r.s - prob.b;
  Vector ya = r.y;
  double num1 = 0.0, den1 = 0.0, bay = 0.0;
  for (int i = 0; i < m; ++i) {
    if (active[i]) {
      num1 += rp[i] * rp[i];
      den1 += prob.b[i] * prob.b[i];
      bay += (prob.b[i] - r.s[i]) * r.y[i];
    } else {
      ya[i] = 0.0;
    }
  }

  DimacsErrors e;
  e.eps1 = std::sqrt(num1) / (1.0 + std::sqrt(den1));
  const SparseMatrix Pfull = symmetrize_upper(prob.P);
  const Vector rd = Pfull * r.x + prob.q - prob.A.transpose() * ya;
  e.eps2 = rd.norm() / (1.0 + prob.q.norm());
  const double xpx = r.x.dot(Pfull * r.x);
  const double qx = prob.q.dot(r.x);
  e.eps3 = std::abs(xpx + qx - bay) / (1.0 + std::abs(qx) + std::abs(bay));
  return e;
}

// --- Benchmark statistics --------------------------------------------------------

// (prod_p (t_p + sh))^(1/count) - sh, computed in log space. Entries that are
// negative, non-finite, or beyond the cap count as failures and enter at the
// cap, so one blowup shifts the mean instead of destroying it.
inline double shifted_geometric_mean(const std::vector<double>& times, double sh,
                                     double cap) {
  if (!(sh >= 0.0)) throw std::invalid_argument("shifted_geometric_mean: sh must be >= 0");
  if (!(cap > 0.0)) throw std::invalid_argument("shifted_geometric_mean: cap must be > 0");
  if (times.empty()) return 0.0;
  double acc = 0.0;
  for (double t : times) {
    if (!std::isfinite(t) || t < 0.0 || t > cap) t = cap;
    acc += std::log(t + sh);
  }
  return std::exp(acc / static_cast<double>(times.size())) - sh;
}

}  // namespace conik
