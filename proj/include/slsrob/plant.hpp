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

#ifndef SLSROB_PLANT_HPP_
#define SLSROB_PLANT_HPP_

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "slsrob/fir.hpp"

namespace slsrob {

/// Largest eigenvalue magnitude of a square matrix, computed with a dense
/// eigensolver (valid for sign-indefinite matrices; no |A| surrogate).
inline double spectral_radius(const Matrix& A) {
  if (A.rows() != A.cols()) {
    throw std::invalid_argument("spectral_radius: matrix must be square");
  }
  if (A.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("spectral_radius: eigensolver did not converge");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct PerronResult {
  double radius = 0.0;
  Vector v;  // positive Perron vector, normalized to max coefficient 1
  bool converged = false;
  int iterations = 0;
};

/// Power iteration for the Perron root/vector of an (element-wise)
/// nonnegative matrix. A diagonal shift keeps the iteration convergent for
/// imprimitive patterns; the shift leaves the Perron vector unchanged.
inline PerronResult perron_vector(const Matrix& M, double rel_tol = 1e-12,
                                  int max_iter = 200000) {
  const Eigen::Index n = M.rows();
  if (n != M.cols()) throw std::invalid_argument("perron_vector: matrix must be square");
  if ((M.array() < 0.0).any()) {
    throw std::invalid_argument("perron_vector: matrix must be nonnegative");
  }
  PerronResult res;
  const double scale = M.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    res.radius = 0.0;
    res.v = Vector::Ones(n);
    res.converged = true;
    return res;
  }
  const double shift = 0.5 * scale;
  Vector v = Vector::Ones(n) / static_cast<double>(n);
  double lambda = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    Vector w = M * v + shift * v;
    const double norm = w.maxCoeff();
    w /= norm;
    const double lambda_new = norm - shift;
    if (std::abs(lambda_new - lambda) <= rel_tol * std::max(1.0, std::abs(lambda_new)) &&
        (w - v).cwiseAbs().maxCoeff() <= rel_tol) {
      res.radius = lambda_new;
      res.v = w;
      res.converged = true;
      res.iterations = it;
      return res;
    }
    lambda = lambda_new;
    v = w;
  }
  res.radius = lambda;
  res.v = v;
  res.converged = false;
  res.iterations = max_iter;
  return res;
}

/// Discrete-time LTI plant z x = A x + B u + w together with its physical
/// interconnection graph. Immutable after construction.
struct Plant {
  Matrix A;  // n x n dynamics
  Matrix B;  // n x m actuation
  std::vector<std::vector<int>> graph;  // symmetric adjacency lists, no self loops

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }

  Plant(Matrix A_in, Matrix B_in) : A(std::move(A_in)), B(std::move(B_in)) {
    validate();
    graph = graph_from_pattern(A);
  }

  Plant(Matrix A_in, Matrix B_in, std::vector<std::vector<int>> graph_in)
      : A(std::move(A_in)), B(std::move(B_in)), graph(std::move(graph_in)) {
    validate();
    if (static_cast<Eigen::Index>(graph.size()) != n()) {
      throw std::invalid_argument("Plant: graph size must equal state dimension");
    }
    symmetrize_graph();
  }

  /// Node hosting actuator k: the row of B with the largest magnitude in
  /// column k. Used to place control rows on the communication graph.
  int actuator_node(Eigen::Index k) const {
    Eigen::Index row = 0;
    const double mag = B.col(k).cwiseAbs().maxCoeff(&row);
    if (mag == 0.0) {
      throw std::invalid_argument("Plant: actuator column is identically zero");
    }
    return static_cast<int>(row);
  }

  static std::vector<std::vector<int>> graph_from_pattern(const Matrix& A) {
    const Eigen::Index n = A.rows();
    std::vector<std::vector<int>> g(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j && (A(i, j) != 0.0 || A(j, i) != 0.0)) {
          g[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
        }
      }
    }
    return g;
  }

 private:
  void validate() const {
    if (A.rows() < 1 || A.rows() != A.cols()) {
      throw std::invalid_argument("Plant: A must be square with n >= 1");
    }
    if (B.rows() != A.rows() || B.cols() < 1) {
      throw std::invalid_argument("Plant: B must have n rows and m >= 1 columns");
    }
  }

  void symmetrize_graph() {
    const Eigen::Index nn = n();
    std::vector<std::vector<bool>> adj(static_cast<std::size_t>(nn),
                                       std::vector<bool>(static_cast<std::size_t>(nn), false));
    for (std::size_t i = 0; i < graph.size(); ++i) {
      for (int j : graph[i]) {
        if (j < 0 || j >= nn || j == static_cast<int>(i)) {
          throw std::invalid_argument("Plant: graph entries must be distinct valid nodes");
        }
        adj[i][static_cast<std::size_t>(j)] = true;
        adj[static_cast<std::size_t>(j)][i] = true;
      }
    }
    for (Eigen::Index i = 0; i < nn; ++i) {
      graph[static_cast<std::size_t>(i)].clear();
      for (Eigen::Index j = 0; j < nn; ++j) {
        if (adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) {
          graph[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
        }
      }
    }
  }
};

namespace detail {

// Uniform double in [0, 1) from the top 53 bits of the engine output. Kept
// local so generated plants are bit-identical across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Ring lattice of N nodes with couplings to both neighbours and B = I.
/// Nonzero magnitudes are drawn uniformly from [0.2, 1.0] with random sign,
/// then the whole matrix is rescaled to the requested spectral radius.
inline Plant ring_plant(int N, double rho_target, std::uint64_t seed) {
  if (N < 3) throw std::invalid_argument("ring_plant: N must be >= 3");
  if (rho_target <= 0.0) throw std::invalid_argument("ring_plant: spectral radius must be > 0");

  std::mt19937_64 rng(seed);
  Matrix A = Matrix::Zero(N, N);
  auto draw = [&rng]() {
    const double mag = 0.2 + 0.8 * detail::uniform01(rng);
    const double sign = (rng() & 1u) ? 1.0 : -1.0;
    return sign * mag;
  };
  for (int i = 0; i < N; ++i) {
    A(i, (i + 1) % N) = draw();
    A(i, (i + N - 1) % N) = draw();
  }
  const double rho = spectral_radius(A);
  if (rho < 1e-12) throw std::runtime_error("ring_plant: degenerate draw with zero spectral radius");
  A *= rho_target / rho;
  return Plant(A, Matrix::Identity(N, N));
}

/// Transposed state-feedback equivalent of the full control problem with
/// dynamics A and measurement map C: solving state feedback on the returned
/// plant and transposing the response taps satisfies the full control
/// achievability constraint for (A, C).
inline Plant dualize_full_control(const Matrix& A, const Matrix& C) {
  if (A.rows() != A.cols()) {
    throw std::invalid_argument("dualize_full_control: A must be square");
  }
  if (C.cols() != A.rows()) {
    throw std::invalid_argument("dualize_full_control: C must have n columns");
  }
  return Plant(A.transpose(), C.transpose());
}

}  // namespace slsrob

#endif  // SLSROB_PLANT_HPP_
