// Copyright 2026 The slsrob Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "slsrob/plant.hpp"
#include "slsrob/subsolver.hpp"

using namespace slsrob;

TEST_CASE("active bound: min x^2 subject to x >= 1", "[subsolver]") {
  ConvexSubproblem p;
  p.P = 2.0 * Matrix::Identity(1, 1);
  p.q = Vector::Zero(1);
  p.Aeq.resize(0, 1);
  p.beq.resize(0);
  p.Ain.resize(1, 1);
  p.Ain << -1.0;
  p.bin.resize(1);
  p.bin << -1.0;  // -x <= -1
  const SolveReport rep = solve(p);
  REQUIRE(rep.status == SolveStatus::Optimal);
  CHECK(rep.x(0) == Catch::Approx(1.0).margin(1e-7));
  CHECK(rep.objective == Catch::Approx(1.0).margin(1e-7));
}

TEST_CASE("symmetric simplex: min ||x||^2 on the probability affine set", "[subsolver]") {
  ConvexSubproblem p;
  p.P = 2.0 * Matrix::Identity(4, 4);
  p.q = Vector::Zero(4);
  p.Aeq = Matrix::Ones(1, 4);
  p.beq = Vector::Ones(1);
  p.Ain.resize(0, 4);
  p.bin.resize(0);
  const SolveReport rep = solve(p);
  REQUIRE(rep.status == SolveStatus::Optimal);
  for (int i = 0; i < 4; ++i) CHECK(rep.x(i) == Catch::Approx(0.25).margin(1e-9));
  CHECK(rep.primal_residual <= 1e-10);
}

TEST_CASE("infeasible box: x >= 1 and x <= 0", "[subsolver]") {
  ConvexSubproblem p;
  p.P = 2.0 * Matrix::Identity(1, 1);
  p.q = Vector::Zero(1);
  p.Aeq.resize(0, 1);
  p.beq.resize(0);
  p.Ain.resize(2, 1);
  p.Ain << -1.0, 1.0;
  p.bin.resize(2);
  p.bin << -1.0, 0.0;
  const SolveReport rep = solve(p);
  CHECK(rep.status == SolveStatus::Infeasible);
}

TEST_CASE("inconsistent equalities are rejected in presolve", "[subsolver]") {
  ConvexSubproblem p;
  p.q = Vector::Zero(2);
  p.Aeq.resize(2, 2);
  p.Aeq << 1.0, 1.0, 2.0, 2.0;
  p.beq.resize(2);
  p.beq << 1.0, 3.0;  // parallel rows, incompatible right sides
  p.Ain.resize(0, 2);
  p.bin.resize(0);
  CHECK(solve(p).status == SolveStatus::Infeasible);
}

TEST_CASE("transcribe_abs models |expr| via two rows", "[subsolver]") {
  SECTION("x pinned at -3 gives slack 3") {
    SubproblemBuilder b(2);  // [x, s]
    b.add_linear(1, 1.0);    // minimize s
    Eigen::RowVectorXd pin = Eigen::RowVectorXd::Zero(2);
    pin(0) = 1.0;
    b.add_equality(pin, -3.0);
    Eigen::RowVectorXd expr = Eigen::RowVectorXd::Zero(2);
    expr(0) = 1.0;
    transcribe_abs(b, expr, 0.0, 1);
    const SolveReport rep = solve(b.build());
    REQUIRE(rep.status == SolveStatus::Optimal);
    CHECK(rep.x(1) == Catch::Approx(3.0).margin(1e-7));
  }

  SECTION("zero expression gives zero slack") {
    SubproblemBuilder b(1);
    b.add_linear(0, 1.0);
    transcribe_abs(b, Eigen::RowVectorXd::Zero(1), 0.0, 0);
    const SolveReport rep = solve(b.build());
    REQUIRE(rep.status == SolveStatus::Optimal);
    CHECK(rep.x(0) == Catch::Approx(0.0).margin(1e-8));
  }

  SECTION("sum of two slacks matches |a| + |b| on random pins") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 8; ++trial) {
      const double a = 4.0 * detail::uniform01(rng) - 2.0;
      const double bb = 4.0 * detail::uniform01(rng) - 2.0;
      SubproblemBuilder b(4);  // [xa, xb, sa, sb]
      b.add_linear(2, 1.0);
      b.add_linear(3, 1.0);
      Eigen::RowVectorXd pin = Eigen::RowVectorXd::Zero(4);
      pin(0) = 1.0;
      b.add_equality(pin, a);
      pin.setZero();
      pin(1) = 1.0;
      b.add_equality(pin, bb);
      Eigen::RowVectorXd e1 = Eigen::RowVectorXd::Zero(4);
      e1(0) = 1.0;
      transcribe_abs(b, e1, 0.0, 2);
      Eigen::RowVectorXd e2 = Eigen::RowVectorXd::Zero(4);
      e2(1) = 1.0;
      transcribe_abs(b, e2, 0.0, 3);
      const SolveReport rep = solve(b.build());
      REQUIRE(rep.status == SolveStatus::Optimal);
      CHECK(rep.x(2) + rep.x(3) ==
            Catch::Approx(std::abs(a) + std::abs(bb)).margin(1e-7));
    }
  }
}

namespace {

// Random feasible QP with PD quadratic, a few equalities and at most 8
// inequality rows (kept feasible by construction around a random point).
ConvexSubproblem random_qp(std::mt19937_64& rng, Eigen::Index n, Eigen::Index me,
                           Eigen::Index mi) {
  auto u = [&rng]() { return 2.0 * detail::uniform01(rng) - 1.0; };
  Matrix L(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) L(i, j) = u();
  }
  ConvexSubproblem p;
  p.P = L * L.transpose() + 0.1 * Matrix::Identity(n, n);
  p.q.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) p.q(i) = u();
  Vector x0(n);
  for (Eigen::Index i = 0; i < n; ++i) x0(i) = u();
  p.Aeq.resize(me, n);
  for (Eigen::Index i = 0; i < me; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) p.Aeq(i, j) = u();
  }
  p.beq = p.Aeq * x0;
  p.Ain.resize(mi, n);
  for (Eigen::Index i = 0; i < mi; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) p.Ain(i, j) = u();
  }
  p.bin = p.Ain * x0;
  for (Eigen::Index i = 0; i < mi; ++i) p.bin(i) += detail::uniform01(rng);
  return p;
}

}  // namespace

TEST_CASE("objective matches brute-force active-set enumeration", "[subsolver]") {
  std::mt19937_64 rng(2024);
  int solved = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const ConvexSubproblem p = random_qp(rng, 5 + static_cast<Eigen::Index>(trial % 4), 2, 6);
    const auto oracle = oracles::active_set_optimum(p);
    REQUIRE(oracle.has_value());
    const SolveReport rep = solve(p);
    REQUIRE(rep.status == SolveStatus::Optimal);
    CHECK(rep.objective == Catch::Approx(*oracle).margin(1e-6));
    CHECK(rep.primal_residual <= 1e-7);
    ++solved;
  }
  CHECK(solved == 60);
}

TEST_CASE("solution feasibility tolerances hold", "[subsolver]") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const ConvexSubproblem p = random_qp(rng, 8, 3, 8);
    const SolveReport rep = solve(p);
    REQUIRE(rep.status == SolveStatus::Optimal);
    const double eq_tol = 1e-8 + 1e-8 * p.beq.cwiseAbs().maxCoeff();
    CHECK((p.Aeq * rep.x - p.beq).cwiseAbs().maxCoeff() <= eq_tol);
    CHECK((p.Ain * rep.x - p.bin).maxCoeff() <= 1e-7);
  }
}

TEST_CASE("identical inputs produce identical reports", "[subsolver]") {
  std::mt19937_64 rng(5150);
  const ConvexSubproblem p = random_qp(rng, 6, 2, 5);
  const SolveReport a = solve(p);
  const SolveReport b = solve(p);
  REQUIRE(a.status == b.status);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.iterations == b.iterations);
  CHECK(a.objective == b.objective);
}

TEST_CASE("degenerate LP with an optimal face still reports an optimum", "[subsolver]") {
  // min x1 + x2 s.t. x1 + x2 >= 1, 0 <= x <= 1: every point on the segment
  // is optimal with value 1.
  ConvexSubproblem p;
  p.q = Vector::Ones(2);
  p.Aeq.resize(0, 2);
  p.beq.resize(0);
  p.Ain.resize(5, 2);
  p.Ain << -1, -1, 1, 0, 0, 1, -1, 0, 0, -1;
  p.bin.resize(5);
  p.bin << -1, 1, 1, 0, 0;
  const SolveReport rep = solve(p);
  REQUIRE(rep.status == SolveStatus::Optimal);
  CHECK(rep.objective == Catch::Approx(1.0).margin(1e-7));
}

TEST_CASE("P must be PSD and symmetric", "[subsolver]") {
  ConvexSubproblem p;
  p.P.resize(2, 2);
  p.P << 1, 0, 0, -1;
  p.q = Vector::Zero(2);
  p.Aeq.resize(0, 2);
  p.beq.resize(0);
  p.Ain.resize(0, 2);
  p.bin.resize(0);
  CHECK_THROWS_AS(solve(p), std::invalid_argument);
  p.P << 1, 0.5, -0.5, 1;
  CHECK_THROWS_AS(solve(p), std::invalid_argument);
}
