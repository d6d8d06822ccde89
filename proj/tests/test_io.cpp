#include <catch2/catch_amalgamated.hpp>

#include <conik.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "oracles.hpp"

using namespace conik;
using Catch::Matchers::ContainsSubstring;

namespace {

SparseMatrix sparse2(int rows, int cols,
                     std::initializer_list<Eigen::Triplet<double>> t) {
  return sparse_from_triplets(rows, cols, std::vector<Eigen::Triplet<double>>(t));
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("conik_io_" + name)).string();
}

std::string write_text(const std::string& name, const std::string& body) {
  const std::string path = tmp_path(name);
  std::ofstream out(path);
  out << body;
  return path;
}

bool same_entries(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

bool same_entries(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  const Matrix da(a), db(b);
  for (int j = 0; j < da.cols(); ++j)
    for (int i = 0; i < da.rows(); ++i)
      if (da(i, j) != db(i, j)) return false;
  return true;
}

const std::string kDataDir = CONIK_TEST_DATA;

}  // namespace

TEST_CASE("sdpa reader maps the dual form onto solver data", "[io]") {
  const ProblemData prob = read_sdpa(kDataDir + "/tiny.dat-s");

  REQUIRE(prob.num_vars() == 1);
  REQUIRE(prob.num_constraints() == 3);
  REQUIRE(prob.cones.size() == 1);
  REQUIRE(std::get<PsdTriangleCone>(prob.cones[0]).dim == 3);
  CHECK(prob.P.nonZeros() == 0);

  // q = -c; A_0 lands in b; off-diagonal PSD entries pick up the svec scaling.
  CHECK(same_entries(prob.q, vec({-1.0})));
  CHECK(same_entries(prob.b, vec({1.0, 0.0, 1.0})));
  CHECK(same_entries(prob.A, sparse2(3, 1, {{0, 0, 1.0}, {1, 0, sqrt2}, {2, 0, 1.0}})));

  // max x with x * ones(2) <= I caps x at 1/2 (top eigenvalue 2).
  Settings st;
  st.eps_abs = st.eps_rel = 1e-6;
  const SolveResult r = solve(prob, st);
  REQUIRE(r.status == SolveStatus::Solved);
  CHECK(std::abs(r.objective - (-0.5)) < 1e-4);
}

TEST_CASE("sdpa diagonal blocks become nonnegative rows with verbatim entries",
          "[io]") {
  const std::string path = write_text("diag.dat-s",
                                      "2\n"
                                      "1\n"
                                      "-3\n"
                                      "1.0 2.0\n"
                                      "0 1 1 1 5.0\n"
                                      "0 1 3 3 7.0\n"
                                      "1 1 2 2 3.5\n"
                                      "2 1 1 1 -1.25\n");
  const ProblemData prob = read_sdpa(path);

  REQUIRE(prob.num_vars() == 2);
  REQUIRE(prob.cones.size() == 1);
  REQUIRE(std::get<NonnegCone>(prob.cones[0]).dim == 3);
  CHECK(same_entries(prob.q, vec({-1.0, -2.0})));
  CHECK(same_entries(prob.b, vec({5.0, 0.0, 7.0})));
  CHECK(same_entries(prob.A, sparse2(3, 2, {{1, 0, 3.5}, {0, 1, -1.25}})));
  std::remove(path.c_str());
}

TEST_CASE("sdpa parse errors name the file and the line", "[io]") {
  const std::string empty = write_text("empty.dat-s", "");
  CHECK_THROWS_WITH(read_sdpa(empty),
                    ContainsSubstring(empty + ":") && ContainsSubstring("empty file"));

  const std::string badtok = write_text("badtok.dat-s", "1\n1\nx\n");
  CHECK_THROWS_WITH(read_sdpa(badtok),
                    ContainsSubstring(":3:") && ContainsSubstring("block size"));

  const std::string badmat =
      write_text("badmat.dat-s", "1\n1\n2\n1.0\n5 1 1 1 1.0\n");
  CHECK_THROWS_WITH(read_sdpa(badmat),
                    ContainsSubstring(":5:") &&
                        ContainsSubstring("matrix index 5 outside [0, 1]"));

  const std::string badentry =
      write_text("badentry.dat-s", "1\n1\n2\n1.0\n1 1 3 3 1.0\n");
  CHECK_THROWS_WITH(read_sdpa(badentry),
                    ContainsSubstring("(3,3)") && ContainsSubstring("size 2"));

  const std::string offdiag =
      write_text("offdiag.dat-s", "1\n1\n-2\n1.0\n1 1 1 2 1.0\n");
  CHECK_THROWS_WITH(read_sdpa(offdiag), ContainsSubstring("off-diagonal"));

  const std::string zeroblocks = write_text("zeroblocks.dat-s", "1\n0\n");
  CHECK_THROWS_WITH(read_sdpa(zeroblocks),
                    ContainsSubstring("block count must be positive"));

  CHECK_THROWS_WITH(read_sdpa(tmp_path("does_not_exist.dat-s")),
                    ContainsSubstring("cannot open"));

  for (const auto& p : {empty, badtok, badmat, badentry, offdiag, zeroblocks})
    std::remove(p.c_str());
}

TEST_CASE("sdpa writer round-trips through the reader bit for bit", "[io]") {
  // Entries a PSD file can actually produce: off-diagonal svec values are
  // sqrt2 times a parsed double.
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(-2.0, 2.0);

  ProblemData prob;
  const int n = 3;
  prob.P = sparse2(n, n, {});
  prob.q = Vector::NullaryExpr(n, [&](Eigen::Index) { return u(rng); });
  prob.cones = {PsdTriangleCone{6}, NonnegCone{3}};
  const int m = 9;

  auto scaled = [&](int row, double v) {
    // rows 0..5 are svec of a side-3 block; 0, 2, 5 are its diagonal
    return (row < 6 && row != 0 && row != 2 && row != 5) ? sqrt2 * v : v;
  };
  std::vector<Eigen::Triplet<double>> atrip;
  for (int col = 0; col < n; ++col)
    for (int row = col; row < m; row += 2) atrip.emplace_back(row, col, scaled(row, u(rng)));
  prob.A = sparse_from_triplets(m, n, atrip);
  prob.b = Vector::Zero(m);
  for (int row = 0; row < m; row += 3) prob.b[row] = scaled(row, u(rng));

  const std::string path = tmp_path("roundtrip.dat-s");
  write_sdpa(path, prob);
  const ProblemData back = read_sdpa(path);

  REQUIRE(back.num_vars() == n);
  REQUIRE(back.num_constraints() == m);
  REQUIRE(back.cones.size() == 2);
  CHECK(std::get<PsdTriangleCone>(back.cones[0]).dim == 6);
  CHECK(std::get<NonnegCone>(back.cones[1]).dim == 3);
  CHECK(same_entries(back.q, prob.q));
  CHECK(same_entries(back.b, prob.b));
  CHECK(back.A.nonZeros() == prob.A.nonZeros());
  CHECK(same_entries(back.A, prob.A));
  std::remove(path.c_str());
}

TEST_CASE("sdpa writer rejects problems the format cannot hold", "[io]") {
  ProblemData prob;
  prob.P = sparse2(1, 1, {});
  prob.q = vec({1.0});
  prob.A = sparse2(2, 1, {{0, 0, 1.0}});
  prob.b = vec({1.0, 2.0});
  prob.cones = {NonnegCone{2}};

  const std::string path = tmp_path("reject.dat-s");

  ProblemData quad = prob;
  quad.P = sparse2(1, 1, {{0, 0, 1.0}});
  CHECK_THROWS_MATCHES(write_sdpa(path, quad), std::invalid_argument,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("quadratic objective")));

  ProblemData zero = prob;
  zero.cones = {ZeroCone{2}};
  CHECK_THROWS_MATCHES(write_sdpa(path, zero), std::invalid_argument,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("only Nonneg and PsdTriangle")));

  ProblemData nontri = prob;
  nontri.cones = {PsdTriangleCone{2}};
  CHECK_THROWS_MATCHES(write_sdpa(path, nontri), std::invalid_argument,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("not triangular")));

  ProblemData mismatch = prob;
  mismatch.cones = {NonnegCone{5}};
  CHECK_THROWS_MATCHES(write_sdpa(path, mismatch), std::invalid_argument,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("do not match")));
}

TEST_CASE("native files reproduce problems bit for bit", "[io]") {
  std::mt19937_64 rng(321);
  std::uniform_real_distribution<double> u(-3.0, 3.0);

  ProblemData prob;
  const int n = 4;
  prob.P = sparse2(n, n, {{0, 0, 1.7320508075688772},
                          {0, 2, 1.0 / 3.0},
                          {2, 2, 0.1},
                          {3, 3, 2.5e-13}});
  prob.q = Vector::NullaryExpr(n, [&](Eigen::Index) { return u(rng); });

  BoxCone box;
  box.lower = vec({-inf, -1.25});
  box.upper = vec({0.5, inf});
  prob.cones = {ZeroCone{1},         NonnegCone{2}, box, SecondOrderCone{3},
                PsdTriangleCone{3},  CustomCone{4, DoublyStochasticAffineKernel::kName,
                                                std::make_shared<DoublyStochasticAffineKernel>(2)}};
  const int m = cone_dim_sum(prob.cones);
  REQUIRE(m == 15);

  std::vector<Eigen::Triplet<double>> atrip;
  for (int col = 0; col < n; ++col)
    for (int row = col; row < m; row += 3) atrip.emplace_back(row, col, u(rng));
  prob.A = sparse_from_triplets(m, n, atrip);
  prob.b = Vector::NullaryExpr(m, [&](Eigen::Index) { return u(rng); });

  const double opt = -0.12345678901234567;
  const std::string path = tmp_path("roundtrip.prob");
  write_problem(path, prob, opt);

  // Stable format tag on the first line.
  {
    std::ifstream in(path);
    std::string first;
    REQUIRE(std::getline(in, first));
    CHECK(first == "conik-problem 1");
  }

  const ProblemFile pf = read_problem_file(path);
  const ProblemData& back = pf.problem;

  REQUIRE(back.num_vars() == n);
  REQUIRE(back.num_constraints() == m);
  CHECK(same_entries(back.P, prob.P));
  CHECK(same_entries(back.q, prob.q));
  CHECK(same_entries(back.A, prob.A));
  CHECK(same_entries(back.b, prob.b));
  CHECK(back.P.nonZeros() == prob.P.nonZeros());
  CHECK(back.A.nonZeros() == prob.A.nonZeros());

  REQUIRE(back.cones.size() == prob.cones.size());
  CHECK(std::get<ZeroCone>(back.cones[0]).dim == 1);
  CHECK(std::get<NonnegCone>(back.cones[1]).dim == 2);
  const auto& bbox = std::get<BoxCone>(back.cones[2]);
  CHECK(same_entries(bbox.lower, box.lower));
  CHECK(same_entries(bbox.upper, box.upper));
  CHECK(std::get<SecondOrderCone>(back.cones[3]).dim == 3);
  CHECK(std::get<PsdTriangleCone>(back.cones[4]).dim == 3);
  const auto& custom = std::get<CustomCone>(back.cones[5]);
  CHECK(custom.dim == 4);
  CHECK(custom.name == DoublyStochasticAffineKernel::kName);
  REQUIRE(custom.kernel != nullptr);

  REQUIRE(pf.known_optimal.has_value());
  CHECK(*pf.known_optimal == opt);

  // Dispatch helpers reach the same content.
  const ProblemData again = read_problem(path);
  CHECK(same_entries(again.b, prob.b));
  const ProblemFile lf = load_problem(path);
  CHECK(same_entries(lf.problem.q, prob.q));
  REQUIRE(lf.known_optimal.has_value());

  std::remove(path.c_str());
}

TEST_CASE("load_problem dispatches on the sdpa suffix", "[io]") {
  const ProblemFile pf = load_problem(kDataDir + "/tiny.dat-s");
  CHECK(!pf.known_optimal.has_value());
  CHECK(pf.problem.num_vars() == 1);
  CHECK(std::holds_alternative<PsdTriangleCone>(pf.problem.cones.at(0)));
}

TEST_CASE("native reader rejects malformed input", "[io]") {
  const std::string magic = write_text("magic.prob", "conik-settings 1\nend\n");
  CHECK_THROWS_WITH(read_problem(magic),
                    ContainsSubstring("not a conik-problem file"));

  const std::string version = write_text("version.prob", "conik-problem\n7\n");
  CHECK_THROWS_WITH(read_problem(version),
                    ContainsSubstring(":2:") &&
                        ContainsSubstring("format version 7 is not supported") &&
                        ContainsSubstring("version 1"));

  const std::string preamble =
      "conik-problem 1\nvars 1\nrows 1\nP 0\nq 0.5\nA 0\nb 1.0\n";

  const std::string badcone =
      write_text("badcone.prob", preamble + "cones 1\nsimplex 1\nend\n");
  CHECK_THROWS_WITH(read_problem(badcone),
                    ContainsSubstring("unknown cone type 'simplex'"));

  const std::string badkernel =
      write_text("badkernel.prob", preamble + "cones 1\ncustom 1 warp-drive\nend\n");
  CHECK_THROWS_WITH(read_problem(badkernel),
                    ContainsSubstring("unknown custom cone kernel 'warp-drive'"));

  const std::string trailing =
      write_text("trailing.prob", preamble + "cones 1\nnonneg 1\nend\nextra\n");
  CHECK_THROWS_WITH(read_problem(trailing), ContainsSubstring("trailing content"));

  const std::string nocones =
      write_text("nocones.prob", preamble + "cones 0\nend\n");
  CHECK_THROWS_WITH(read_problem(nocones),
                    ContainsSubstring("invalid problem") &&
                        ContainsSubstring("cone list is empty"));

  const std::string oob =
      write_text("oob.prob",
                 "conik-problem 1\nvars 1\nrows 1\nP 1\n0 5 1.0\n");
  CHECK_THROWS_WITH(read_problem(oob),
                    ContainsSubstring(":5:") && ContainsSubstring("outside 1x1"));

  for (const auto& p : {magic, version, badcone, badkernel, trailing, nocones, oob})
    std::remove(p.c_str());
}

TEST_CASE("write_problem validates before touching the disk", "[io]") {
  ProblemData prob;
  prob.P = sparse2(1, 1, {});
  prob.q = vec({1.0});
  prob.A = sparse2(2, 1, {});
  prob.b = vec({1.0, 2.0});
  prob.cones = {NonnegCone{1}};  // sums to 1, b has 2 entries

  CHECK_THROWS_MATCHES(write_problem(tmp_path("invalid.prob"), prob),
                       std::invalid_argument,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("write_problem:")));
}

TEST_CASE("dimacs errors vanish at an exact KKT point", "[io]") {
  // min 1/2 x^2 - x subject to x <= 10: optimum x = 1, inactive constraint.
  ProblemData prob;
  prob.P = sparse2(1, 1, {{0, 0, 1.0}});
  prob.q = vec({-1.0});
  prob.A = sparse2(1, 1, {{0, 0, 1.0}});
  prob.b = vec({10.0});
  prob.cones = {NonnegCone{1}};

  SolveResult r;
  r.x = vec({1.0});
  r.s = vec({9.0});
  r.y = vec({0.0});

  const DimacsErrors clean = dimacs_errors(prob, r);
  CHECK(clean.max_error() <= 1e-14);

  // A wrong multiplier shows up in stationarity and in the gap:
  // rd = 1 - 1 + 0.1, gap numerator |1 - 1 - (10-9)(-0.1)| over 1 + 1 + 0.1.
  r.y = vec({-0.1});
  const DimacsErrors off = dimacs_errors(prob, r);
  CHECK(off.eps2 == Catch::Approx(0.05).margin(1e-12));
  CHECK(off.eps3 == Catch::Approx(0.1 / 2.1).margin(1e-12));

  SolveResult wrong = r;
  wrong.s = Vector::Zero(2);
  CHECK_THROWS_AS(dimacs_errors(prob, wrong), std::invalid_argument);
}

TEST_CASE("inactive box rows stay out of the dimacs measures", "[io]") {
  ProblemData prob;
  prob.P = sparse2(1, 1, {{0, 0, 2.0}});
  prob.q = vec({-3.0});
  prob.A = sparse2(3, 1, {{0, 0, 1.0}});
  prob.b = vec({1.0, 0.0, 5.0});
  BoxCone finite;
  finite.lower = vec({-100.0});
  finite.upper = vec({100.0});
  BoxCone free;
  free.lower = vec({-inf});
  free.upper = vec({inf});
  prob.cones = {NonnegCone{1}, finite, free};

  SolveResult r;
  r.x = vec({1.0});
  r.s = vec({0.0, 3.0, 77.0});  // box slacks far from every finite bound
  r.y = vec({-1.0, 7.0, 9.0});

  // The two box rows carry large residuals and multipliers, but both are
  // inactive, so every measure still sees an exact KKT point.
  const DimacsErrors e = dimacs_errors(prob, r);
  CHECK(e.max_error() <= 1e-14);

  // Parking the slack on the finite bound activates the row.
  r.s[1] = 100.0;
  const DimacsErrors active = dimacs_errors(prob, r);
  CHECK(active.eps1 == Catch::Approx(50.0).margin(1e-9));
}

TEST_CASE("dimacs implementation agrees with a dense recomputation", "[io]") {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  for (int trial = 0; trial < 10; ++trial) {
    ProblemData prob;
    const int n = 5;
    std::vector<Eigen::Triplet<double>> ptrip;
    for (int j = 0; j < n; ++j) ptrip.emplace_back(j, j, 1.0 + std::abs(u(rng)));
    ptrip.emplace_back(0, 2, u(rng));
    prob.P = sparse_from_triplets(n, n, ptrip);
    prob.q = Vector::NullaryExpr(n, [&](Eigen::Index) { return u(rng); });

    BoxCone box;
    box.lower = vec({-0.5, -2.0});
    box.upper = vec({1.0, 0.25});
    prob.cones = {ZeroCone{1}, NonnegCone{2}, SecondOrderCone{3},
                  PsdTriangleCone{3}, box};
    const int m = cone_dim_sum(prob.cones);

    std::vector<Eigen::Triplet<double>> atrip;
    for (int col = 0; col < n; ++col)
      for (int row = 0; row < m; ++row)
        if (u(rng) > 0.0) atrip.emplace_back(row, col, u(rng));
    prob.A = sparse_from_triplets(m, n, atrip);
    prob.b = Vector::NullaryExpr(m, [&](Eigen::Index) { return u(rng); });

    SolveResult r;
    r.x = Vector::NullaryExpr(n, [&](Eigen::Index) { return u(rng); });
    r.s = Vector::NullaryExpr(m, [&](Eigen::Index) { return u(rng); });
    r.y = Vector::NullaryExpr(m, [&](Eigen::Index) { return u(rng); });
    // Box slacks sit either exactly on a bound or well inside, so both
    // activity conventions agree.
    const int boff = m - 2;
    const int pick = trial % 3;
    r.s[boff] = pick == 0 ? box.lower[0] : (pick == 1 ? box.upper[0] : 0.3);
    r.s[boff + 1] = pick == 0 ? box.upper[1] : (pick == 1 ? -1.0 : box.lower[1]);

    const DimacsErrors lib = dimacs_errors(prob, r);
    const oracle::DenseDimacs ref = oracle::dimacs_dense(prob, r.x, r.s, r.y);
    CHECK(std::abs(lib.eps1 - ref.eps1) <= 1e-12 * (1.0 + ref.eps1));
    CHECK(std::abs(lib.eps2 - ref.eps2) <= 1e-12 * (1.0 + ref.eps2));
    CHECK(std::abs(lib.eps3 - ref.eps3) <= 1e-12 * (1.0 + ref.eps3));
  }
}

TEST_CASE("shifted geometric mean matches hand-computed anchors", "[io]") {
  CHECK(shifted_geometric_mean({10.0, 10.0, 10.0}, 10.0, 1000.0) ==
        Catch::Approx(10.0).margin(1e-9));
  CHECK(shifted_geometric_mean({}, 10.0, 100.0) == 0.0);
  CHECK(shifted_geometric_mean({4.0, 9.0}, 0.0, 100.0) ==
        Catch::Approx(6.0).margin(1e-9));
  CHECK(shifted_geometric_mean({1.0, 100.0}, 10.0, 1000.0) ==
        Catch::Approx(std::sqrt(1210.0) - 10.0).margin(1e-9));

  // Failures enter at the cap: blowups, negatives, and non-finite entries.
  const double cap = 300.0;
  CHECK(shifted_geometric_mean({1e9, 2.0}, 0.0, cap) ==
        Catch::Approx(std::sqrt(600.0)).margin(1e-9));
  CHECK(shifted_geometric_mean({-1.0}, 0.0, cap) == Catch::Approx(cap));
  CHECK(shifted_geometric_mean({inf}, 0.0, cap) == Catch::Approx(cap));
  CHECK(shifted_geometric_mean({std::nan("")}, 0.0, cap) == Catch::Approx(cap));

  CHECK_THROWS_AS(shifted_geometric_mean({1.0}, -1.0, 100.0), std::invalid_argument);
  CHECK_THROWS_AS(shifted_geometric_mean({1.0}, 0.0, 0.0), std::invalid_argument);
}
