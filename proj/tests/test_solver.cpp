#include <catch2/catch_amalgamated.hpp>

#include <conik.hpp>

#include "oracles.hpp"

using namespace conik;

namespace {

// minimize 1/2 x^2 - x  subject to  x >= 0   (optimum x = 1)
ProblemData one_dim_qp() {
  ProblemData prob;
  prob.P = sparse_from_triplets(1, 1, {Eigen::Triplet<double>{0, 0, 1.0}});
  prob.q = Vector::Constant(1, -1.0);
  prob.A = sparse_from_triplets(1, 1, {Eigen::Triplet<double>{0, 0, -1.0}});
  prob.b = Vector::Zero(1);
  prob.cones = {NonnegCone{1}};
  return prob;
}

// {x <= -1} and {x >= 1} together: primal infeasible
ProblemData contradictory_lp() {
  ProblemData prob;
  prob.P = sparse_from_triplets(1, 1, {});
  prob.q = Vector::Zero(1);
  prob.A = sparse_from_triplets(
      2, 1, {Eigen::Triplet<double>{0, 0, 1.0}, Eigen::Triplet<double>{1, 0, -1.0}});
  prob.b = Vector::Constant(2, -1.0);
  prob.cones = {NonnegCone{2}};
  return prob;
}

// minimize -x subject to x >= 0: unbounded below, dual infeasible
ProblemData unbounded_lp() {
  ProblemData prob;
  prob.P = sparse_from_triplets(1, 1, {});
  prob.q = Vector::Constant(1, -1.0);
  prob.A = sparse_from_triplets(1, 1, {Eigen::Triplet<double>{0, 0, -1.0}});
  prob.b = Vector::Zero(1);
  prob.cones = {NonnegCone{1}};
  return prob;
}

Settings plain_settings() {
  Settings s;
  s.scaling_iters = 0;
  s.per_block_rho = false;
  return s;
}

}  // namespace

TEST_CASE("setup rejects malformed problems", "[solver]") {
  ProblemData prob = one_dim_qp();
  prob.cones = {NonnegCone{3}};
  CHECK_THROWS_WITH(Workspace(prob, Settings{}),
                    Catch::Matchers::ContainsSubstring("setup rejected"));
}

TEST_CASE("one iterate on the 1-d problem, by hand", "[solver]") {
  // With rho = sigma = alpha = 1 and zero initialization the KKT system is
  //   [2 -1; -1 -1] (xt, nu) = (1, 0)  =>  xt = 1/3, nu = -1/3,
  // then st = 1/3, x = 1/3, w = 1/3, s = max(w, 0) = 1/3, y = 0.
  Settings st = plain_settings();
  st.rho = 1.0;
  st.sigma = 1.0;
  st.alpha = 1.0;
  Workspace ws(one_dim_qp(), st);
  ws.iterate();
  ws.compute_residuals();  // refresh the unscaled views
  CHECK(ws.x()[0] == Catch::Approx(1.0 / 3.0).margin(1e-12));
  CHECK(ws.s()[0] == Catch::Approx(1.0 / 3.0).margin(1e-12));
  CHECK(ws.y()[0] == Catch::Approx(0.0).margin(1e-12));
  CHECK(ws.iteration() == 1);
}

TEST_CASE("residuals at the zero iterate are the data norms", "[solver]") {
  ProblemData prob = one_dim_qp();
  prob.b[0] = 7.0;
  Workspace ws(prob, plain_settings());
  const ResidualInfo r = ws.compute_residuals();
  CHECK(r.r_prim == Catch::Approx(7.0));
  CHECK(r.r_dual == Catch::Approx(1.0));
}

TEST_CASE("1-d qp solves to its optimum", "[solver]") {
  const SolveResult res = solve(one_dim_qp());
  REQUIRE(res.status == SolveStatus::Solved);
  CHECK(res.x[0] == Catch::Approx(1.0).margin(2e-3));
  CHECK(res.objective == Catch::Approx(-0.5).margin(2e-3));
  CHECK(res.iterations % 25 == 0);
}

TEST_CASE("an exact solution is a fixed point", "[solver]") {
  ProblemData prob;
  prob.P = sparse_from_triplets(2, 2, {});
  prob.q = Vector::Zero(2);
  prob.A = sparse_from_triplets(
      2, 2, {Eigen::Triplet<double>{0, 0, 1.0}, Eigen::Triplet<double>{1, 1, 1.0}});
  prob.b = Vector::Ones(2);
  prob.cones = {NonnegCone{2}};

  Workspace ws(prob, plain_settings());
  ws.warm_start(Vector::Ones(2), Vector::Zero(2), Vector::Zero(2));
  const SolveResult res = ws.solve();
  CHECK(res.status == SolveStatus::Solved);
  CHECK(res.iterations == 25);  // first check interval
  CHECK((res.x - Vector::Ones(2)).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("termination thresholds combine absolute and relative parts",
          "[solver]") {
  Workspace ws(one_dim_qp(), plain_settings());
  ResidualInfo r;
  r.r_prim = 1.5e-3;
  r.r_dual = 0.0;
  r.norm_b = 0.0;
  CHECK_FALSE(ws.check_termination(r));  // above the absolute floor alone
  r.norm_b = 1.0;                        // relative slack admits it
  CHECK(ws.check_termination(r));
}

TEST_CASE("contradictory bounds are reported primal infeasible", "[solver]") {
  const SolveResult res = solve(contradictory_lp());
  REQUIRE(res.status == SolveStatus::PrimalInfeasible);
  REQUIRE(res.certificate.has_value());
  const Vector& c = *res.certificate;
  CHECK(c.lpNorm<Eigen::Infinity>() == Catch::Approx(1.0));

  const ProblemData prob = contradictory_lp();
  CHECK((Matrix(prob.A).transpose() * c).lpNorm<Eigen::Infinity>() <= 1e-4);
  CHECK(c.minCoeff() >= -1e-6);       // lies in the dual of the orthant
  CHECK(prob.b.dot(c) <= -1e-2);      // strictly separates
}

TEST_CASE("unbounded objective is reported dual infeasible", "[solver]") {
  const SolveResult res = solve(unbounded_lp());
  REQUIRE(res.status == SolveStatus::DualInfeasible);
  REQUIRE(res.certificate.has_value());
  const Vector& c = *res.certificate;
  CHECK(c[0] == Catch::Approx(1.0));  // normalized ray pointing down the objective
}

TEST_CASE("infeasibility checks on hand-made directions", "[solver]") {
  Workspace ws(contradictory_lp(), plain_settings());
  Vector dy(2);
  dy << -1.0, -1.0;  // the y iterates drift into the polar cone
  const auto cert = ws.check_primal_infeasible(dy);
  REQUIRE(cert.has_value());
  CHECK((*cert)[0] == Catch::Approx(1.0));
  CHECK((*cert)[1] == Catch::Approx(1.0));
  CHECK_FALSE(ws.check_primal_infeasible(Vector::Zero(2)).has_value());

  Workspace wu(unbounded_lp(), plain_settings());
  CHECK(wu.check_dual_infeasible(Vector::Constant(1, 2.0)).has_value());
  CHECK_FALSE(wu.check_dual_infeasible(Vector::Constant(1, -2.0)).has_value());
}

TEST_CASE("strongly convex problems never report dual infeasibility",
          "[solver]") {
  Workspace ws(one_dim_qp(), plain_settings());
  CHECK_FALSE(ws.check_dual_infeasible(Vector::Constant(1, 1.0)).has_value());
}

TEST_CASE("feasible random qps solve without certificates", "[solver]") {
  for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
    const ProblemData prob = gen_random_qp(20, 30, seed);
    const SolveResult res = solve(prob);
    CHECK(res.status == SolveStatus::Solved);
    CHECK_FALSE(res.certificate.has_value());
  }
}

TEST_CASE("solution matches an independent reference solve", "[solver]") {
  const ProblemData prob = gen_random_qp(15, 24, 77);
  Settings st;
  st.eps_abs = st.eps_rel = 1e-6;
  st.max_iter = 20000;
  const SolveResult res = solve(prob, st);
  REQUIRE(res.status == SolveStatus::Solved);

  const auto ref = oracle::fista_qp(prob, 60000);
  CHECK((res.x - ref.x).lpNorm<Eigen::Infinity>() <= 1e-4);
  CHECK(res.objective ==
        Catch::Approx(objective_value(prob, ref.x)).margin(1e-6));
}

TEST_CASE("iterate gap contracts over the run", "[solver]") {
  const ProblemData prob = gen_random_qp(20, 30, 11);
  Workspace ws(prob, Settings{});
  double gap20 = 0.0;
  for (int k = 0; k < 200; ++k) {
    ws.iterate();
    if (ws.iteration() == 20) gap20 = ws.tilde_gap();
  }
  CHECK(ws.tilde_gap() < gap20);
}

TEST_CASE("max_iter returns the best iterate seen", "[solver]") {
  Settings st;
  st.max_iter = 3;
  st.check_interval = 1;
  const SolveResult res = solve(gen_random_qp(10, 16, 5), st);
  CHECK(res.status == SolveStatus::MaxIterations);
  CHECK(res.iterations == 3);
  CHECK(std::isfinite(res.r_prim));
  CHECK(std::isfinite(res.r_dual));
}

TEST_CASE("time limit interrupts a long run", "[solver]") {
  Settings st;
  st.eps_abs = st.eps_rel = 1e-14;  // unreachable, forces the limit
  st.time_limit = 1e-6;
  st.max_iter = 100000;
  const SolveResult res = solve(gen_random_qp(20, 30, 9), st);
  CHECK(res.status == SolveStatus::TimeLimit);
}

TEST_CASE("solves are deterministic and thread-count invariant", "[solver]") {
  const ProblemData prob = gen_block_arrow(3, 3, 2, 10, 21);
  Settings st;
  const SolveResult a = solve(prob, st);
  const SolveResult b = solve(prob, st);
  st.threads = 4;
  const SolveResult c = solve(prob, st);
  REQUIRE(a.status == b.status);
  REQUIRE(a.status == c.status);
  CHECK(a.iterations == b.iterations);
  CHECK(a.iterations == c.iterations);
  CHECK((a.x - b.x).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.x - c.x).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(a.objective == b.objective);
}

TEST_CASE("adaptive rho still reaches the optimum", "[solver]") {
  Settings st;
  st.adaptive_rho = true;
  const SolveResult res = solve(gen_random_qp(20, 30, 13), st);
  CHECK(res.status == SolveStatus::Solved);
}

TEST_CASE("progress callback reports at the check interval", "[solver]") {
  Settings st;
  std::vector<int> seen;
  st.progress = [&](const ProgressInfo& info) { seen.push_back(info.iteration); };
  solve(gen_random_qp(10, 16, 3), st);
  REQUIRE_FALSE(seen.empty());
  for (int it : seen) CHECK(it % 25 == 0);
}

TEST_CASE("scale invariance of the termination decision", "[solver]") {
  ProblemData prob = gen_random_qp(12, 18, 31);
  const SolveResult base = solve(prob);
  REQUIRE(base.status == SolveStatus::Solved);

  ProblemData big = prob;
  big.q *= 1e3;
  big.b *= 1e3;
  for (auto& cone : big.cones)
    if (auto* box = std::get_if<BoxCone>(&cone)) {
      box->lower *= 1e3;
      box->upper *= 1e3;
    }
  const SolveResult scaled = solve(big);
  CHECK(scaled.status == SolveStatus::Solved);
  // same geometry, blown up: the solution scales along
  CHECK((scaled.x - 1e3 * base.x).lpNorm<Eigen::Infinity>() <=
        1e-2 * (1.0 + 1e3 * base.x.lpNorm<Eigen::Infinity>()));
}
