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

#include "slsrob/norms.hpp"
#include "slsrob/plant.hpp"

using namespace slsrob;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  Matrix M(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = 2.0 * detail::uniform01(rng) - 1.0;
  }
  return M;
}

}  // namespace

TEST_CASE("induced norms on the hand instance", "[norms]") {
  Matrix M(2, 2);
  M << 1, -2, 3, 4;
  CHECK(induced_norm(M, NormKind::L1RowMax) == 7.0);
  CHECK(induced_norm(M, NormKind::LinfColMax) == 6.0);
  CHECK(induced_norm(M, NormKind::NuMaxElt) == 4.0);
  CHECK(induced_norm(M, NormKind::H2) == Catch::Approx(std::sqrt(30.0)).epsilon(1e-14));
}

TEST_CASE("separability tags are fixed", "[norms]") {
  CHECK(separability_of(NormKind::L1RowMax) == Separability::Row);
  CHECK(separability_of(NormKind::LinfColMax) == Separability::Column);
  CHECK(separability_of(NormKind::NuMaxElt) == Separability::Element);
  CHECK(separability_of(NormKind::H2) == Separability::Element);
}

TEST_CASE("norm axioms hold on random matrices", "[norms]") {
  std::mt19937_64 rng(99);
  const NormKind kinds[] = {NormKind::L1RowMax, NormKind::LinfColMax, NormKind::NuMaxElt,
                            NormKind::H2};
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix A = random_matrix(8, 8, rng);
    const Matrix B = random_matrix(8, 8, rng);
    const double c = 4.0 * detail::uniform01(rng) - 2.0;
    for (const NormKind k : kinds) {
      CHECK(induced_norm(c * A, k) ==
            Catch::Approx(std::abs(c) * induced_norm(A, k)).margin(1e-12));
      CHECK(induced_norm(A + B, k) <= induced_norm(A, k) + induced_norm(B, k) + 1e-12);
    }
    CHECK(induced_norm(A, NormKind::NuMaxElt) <= induced_norm(A, NormKind::L1RowMax) + 1e-15);
    CHECK(induced_norm(A, NormKind::NuMaxElt) <= induced_norm(A, NormKind::LinfColMax) + 1e-15);
  }
}

TEST_CASE("scaled norm equals the unscaled norm at D = I", "[norms]") {
  std::mt19937_64 rng(7);
  const Matrix M = random_matrix(6, 6, rng);
  const DiagonalScaling I6 = DiagonalScaling::identity(6);
  for (const NormKind k :
       {NormKind::L1RowMax, NormKind::LinfColMax, NormKind::NuMaxElt, NormKind::H2}) {
    CHECK(scaled_norm(M, I6, k) == Catch::Approx(induced_norm(M, k)).margin(1e-13));
  }
}

TEST_CASE("scaled norm hand evaluation", "[norms]") {
  Matrix M(2, 2);
  M << 0, 2, 8, 0;
  // D = diag(1, 1/2): scaled matrix is [[0, 4], [4, 0]].
  Vector l(2);
  l << 0.0, -std::log(2.0);
  DiagonalScaling D;
  D.log_values = l;
  CHECK(scaled_norm(M, D, NormKind::L1RowMax) == Catch::Approx(4.0).margin(1e-12));
  CHECK(scaled_norm(M, D, NormKind::LinfColMax) == Catch::Approx(4.0).margin(1e-12));
  CHECK(scaled_norm(M, D, NormKind::NuMaxElt) == Catch::Approx(4.0).margin(1e-12));
}

TEST_CASE("similarity scaling leaves diagonal matrices unchanged", "[norms]") {
  std::mt19937_64 rng(21);
  Matrix M = Matrix::Zero(5, 5);
  for (int i = 0; i < 5; ++i) M(i, i) = 3.0 * detail::uniform01(rng);
  Vector l(5);
  for (int i = 0; i < 5; ++i) l(i) = 4.0 * detail::uniform01(rng) - 2.0;
  const DiagonalScaling D = DiagonalScaling::from_log(l, 1.0);
  for (const NormKind k :
       {NormKind::L1RowMax, NormKind::LinfColMax, NormKind::NuMaxElt, NormKind::H2}) {
    CHECK(scaled_norm(M, D, k) == Catch::Approx(induced_norm(M, k)).margin(1e-12));
  }
}

TEST_CASE("scaled norm transpose duality", "[norms]") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix M = random_matrix(7, 7, rng);
    Vector l(7);
    for (int i = 0; i < 7; ++i) l(i) = 2.0 * detail::uniform01(rng) - 1.0;
    const DiagonalScaling D = DiagonalScaling::from_log(l, 1.0);
    CHECK(scaled_norm(M, D, NormKind::L1RowMax) ==
          Catch::Approx(scaled_norm(M.transpose(), D.inverse(), NormKind::LinfColMax))
              .margin(1e-11));
  }
}

TEST_CASE("gauge shifts do not change scaled norms", "[norms]") {
  std::mt19937_64 rng(41);
  const Matrix M = random_matrix(6, 6, rng).cwiseAbs();
  Vector l(6);
  for (int i = 0; i < 6; ++i) l(i) = detail::uniform01(rng);
  DiagonalScaling a;
  a.log_values = l;
  DiagonalScaling b;
  b.log_values = l.array() + 3.7;
  for (const NormKind k : {NormKind::L1RowMax, NormKind::LinfColMax, NormKind::NuMaxElt}) {
    CHECK(scaled_norm(M, a, k) == Catch::Approx(scaled_norm(M, b, k)).epsilon(1e-10));
  }
  // from_log enforces the zero-sum gauge.
  const DiagonalScaling g = DiagonalScaling::from_log(l, 1.0);
  CHECK(std::abs(g.log_values.sum()) <= 1e-12);
}

TEST_CASE("margin is the reciprocal level", "[norms]") {
  CHECK(margin(4.0) == 0.25);
  CHECK(margin(1.0) == 1.0);
  CHECK_THROWS_AS(margin(0.0), std::invalid_argument);
  CHECK_THROWS_AS(margin(-2.0), std::invalid_argument);
}

TEST_CASE("magnitude matrix on scalar taps", "[norms]") {
  FirTransferMatrix phi_x(1, 1, 2);
  phi_x.tap(1)(0, 0) = 1.0;
  phi_x.tap(2)(0, 0) = -2.0;
  FirTransferMatrix phi_u(1, 1, 2);
  ClosedLoop cl = make_dense_closed_loop(phi_x, phi_u);
  const RegulationMap H(Matrix::Identity(1, 1), Matrix::Identity(1, 1));
  const Matrix M = magnitude_matrix(cl, H);
  CHECK(M(0, 0) == 3.0);  // |1| + |-2|
}

TEST_CASE("magnitude matrix of the zero loop is zero", "[norms]") {
  ClosedLoop cl = make_dense_closed_loop(FirTransferMatrix(3, 3, 4), FirTransferMatrix(3, 3, 4));
  const RegulationMap H(Matrix::Identity(3, 3), Matrix::Identity(3, 3));
  CHECK(magnitude_matrix(cl, H).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("magnitude matrix is subadditive in the closed loop", "[norms]") {
  std::mt19937_64 rng(55);
  FirTransferMatrix ax(3, 3, 3), au(3, 3, 3), bx(3, 3, 3), bu(3, 3, 3);
  for (int p = 1; p <= 3; ++p) {
    ax.tap(p) = random_matrix(3, 3, rng);
    au.tap(p) = random_matrix(3, 3, rng);
    bx.tap(p) = random_matrix(3, 3, rng);
    bu.tap(p) = random_matrix(3, 3, rng);
  }
  const RegulationMap H(Matrix::Identity(3, 3), Matrix::Identity(3, 3));
  const Matrix Ma = magnitude_matrix(make_dense_closed_loop(ax, au), H);
  const Matrix Mb = magnitude_matrix(make_dense_closed_loop(bx, bu), H);
  const Matrix Msum = magnitude_matrix(make_dense_closed_loop(ax + bx, au + bu), H);
  CHECK(((Ma + Mb - Msum).array() >= -1e-12).all());
}
