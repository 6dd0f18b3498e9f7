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

#include <set>

#include "oracles.hpp"
#include "slsrob/plant.hpp"
#include "slsrob/support.hpp"

using namespace slsrob;

TEST_CASE("ring plant hits the requested spectral radius", "[model]") {
  const Plant plant = ring_plant(10, 3.0, 7);
  REQUIRE(plant.n() == 10);
  REQUIRE(plant.m() == 10);
  CHECK(std::abs(spectral_radius(plant.A) - 3.0) <= 1e-9);
  CHECK(plant.B.isIdentity(0.0));
}

TEST_CASE("ring plant sparsity is exactly the ring pattern", "[model]") {
  const int N = 8;
  const Plant plant = ring_plant(N, 2.0, 3);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      const bool on_ring = (j == (i + 1) % N) || (j == (i + N - 1) % N);
      if (on_ring) {
        CHECK(plant.A(i, j) != 0.0);
        CHECK(std::abs(plant.A(i, j)) >= 0.2 * 2.0 / 3.01 * 1e-3);  // nonzero, scaled
      } else {
        CHECK(plant.A(i, j) == 0.0);
      }
    }
  }
  // Magnitudes before rescale lie in [0.2, 1.0]: after uniform rescale the
  // ratio of max to min magnitude stays bounded by 5.
  double lo = 1e30, hi = 0.0;
  for (int i = 0; i < N; ++i) {
    lo = std::min({lo, std::abs(plant.A(i, (i + 1) % N)), std::abs(plant.A(i, (i + N - 1) % N))});
    hi = std::max({hi, std::abs(plant.A(i, (i + 1) % N)), std::abs(plant.A(i, (i + N - 1) % N))});
  }
  CHECK(hi / lo <= 5.0 + 1e-12);
}

TEST_CASE("ring plant is deterministic in the seed", "[model]") {
  const Plant a = ring_plant(10, 3.0, 42);
  const Plant b = ring_plant(10, 3.0, 42);
  const Plant c = ring_plant(10, 3.0, 43);
  CHECK((a.A - b.A).cwiseAbs().maxCoeff() == 0.0);  // bit identical
  CHECK((a.A - c.A).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("ring plant validates parameters", "[model]") {
  CHECK_THROWS_AS(ring_plant(3, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(ring_plant(2, 1.0, 1), std::invalid_argument);
}

TEST_CASE("spectral radius on hand instances", "[model]") {
  CHECK(spectral_radius(Matrix::Identity(2, 2)) == Catch::Approx(1.0).margin(1e-12));
  Matrix M(2, 2);
  M << 0, 2, 8, 0;
  CHECK(spectral_radius(M) == Catch::Approx(4.0).margin(1e-9));
}

TEST_CASE("spectral radius is absolutely homogeneous", "[model]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix A(6, 6);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) A(i, j) = 2.0 * detail::uniform01(rng) - 1.0;
    }
    const double c = 4.0 * detail::uniform01(rng) - 2.0;
    CHECK(spectral_radius(c * A) ==
          Catch::Approx(std::abs(c) * spectral_radius(A)).margin(1e-9));
  }
}

TEST_CASE("perron iteration agrees with the eigensolver on nonneg matrices", "[model]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix M(7, 7);
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j < 7; ++j) M(i, j) = detail::uniform01(rng);
    }
    const PerronResult pr = perron_vector(M);
    REQUIRE(pr.converged);
    CHECK(pr.radius == Catch::Approx(oracles::eig_spectral_radius(M)).margin(1e-9));
    CHECK((M * pr.v - pr.radius * pr.v).cwiseAbs().maxCoeff() <= 1e-9 * pr.radius);
  }
}

TEST_CASE("d-hop support on the ring", "[model]") {
  const Plant plant = ring_plant(10, 3.0, 7);
  const Support s = dhop_support(plant, 2, 10, 10);
  for (const auto& hood : s.neighborhoods) CHECK(hood.size() == 5);  // BFS oracle on a ring
  for (int i = 0; i < 10; ++i) {
    const auto& hood = s.neighborhoods[static_cast<std::size_t>(i)];
    std::set<int> expect{(i + 8) % 10, (i + 9) % 10, i, (i + 1) % 10, (i + 2) % 10};
    CHECK(std::set<int>(hood.begin(), hood.end()) == expect);
    CHECK(s.mask(i, i));
  }
}

TEST_CASE("d-hop support edge cases", "[model]") {
  const Plant ring = ring_plant(6, 2.0, 1);
  const Support s0 = dhop_support(ring, 0, 6, 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(s0.neighborhoods[static_cast<std::size_t>(i)] == std::vector<int>{i});
  }

  // Complete graph saturates at one hop.
  Matrix A = Matrix::Ones(4, 4);
  A.diagonal().setZero();
  const Plant complete(A, Matrix::Identity(4, 4));
  const Support s1 = dhop_support(complete, 1, 4, 4);
  CHECK(s1.mask.all());
}

TEST_CASE("d-hop masks are monotone in d and saturate at the component", "[model]") {
  const Plant plant = ring_plant(9, 2.0, 13);
  for (int d = 0; d < 6; ++d) {
    const Support a = dhop_support(plant, d, 9, 9);
    const Support b = dhop_support(plant, d + 1, 9, 9);
    CHECK((a.mask && !b.mask).count() == 0);  // mask(d) subset of mask(d+1)
  }
  const Support full = dhop_support(plant, 9, 9, 9);
  CHECK(full.mask.all());  // ring is connected
}

TEST_CASE("dualize full control transposes the problem", "[model]") {
  Matrix A(3, 3);
  A << 0.1, 0.5, 0, 0, 0.2, 0.7, 0.3, 0, 0.4;

  SECTION("identity C is self-dual in shape") {
    const Plant dual = dualize_full_control(A, Matrix::Identity(3, 3));
    CHECK((dual.A - A.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(dual.B.isIdentity(0.0));
  }

  SECTION("wide C transposes into the actuation slot") {
    Matrix C(2, 3);
    C << 1, 0, 1, 0, 1, 0;
    const Plant dual = dualize_full_control(A, C);
    CHECK(dual.A.rows() == 3);
    CHECK(dual.B.rows() == 3);
    CHECK(dual.B.cols() == 2);
    CHECK((dual.B - C.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("dimension mismatch is rejected") {
    CHECK_THROWS_AS(dualize_full_control(A, Matrix::Identity(2, 2)), std::invalid_argument);
  }
}

TEST_CASE("graph inferred from A, explicit graph overrides", "[model]") {
  Matrix A(3, 3);
  A << 0, 1, 0, 1, 0, 0, 0, 0, 1;
  const Plant inferred(A, Matrix::Identity(3, 3));
  CHECK(inferred.graph[0] == std::vector<int>{1});
  CHECK(inferred.graph[2].empty());

  const Plant explicit_graph(A, Matrix::Identity(3, 3), {{1, 2}, {0}, {0}});
  CHECK(explicit_graph.graph[0] == (std::vector<int>{1, 2}));
  CHECK(explicit_graph.graph[2] == std::vector<int>{0});  // symmetrized
}
