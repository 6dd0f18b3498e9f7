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

#ifndef SLSROB_IO_HPP_
#define SLSROB_IO_HPP_

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "slsrob/norms.hpp"
#include "slsrob/plant.hpp"
#include "slsrob/support.hpp"

namespace slsrob {

using json = nlohmann::json;

inline json matrix_to_json(const Matrix& M) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) data.push_back(M(i, j));
  }
  return json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", data}};
}

inline Matrix matrix_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw std::invalid_argument("matrix_from_json: data length does not match rows*cols");
  }
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index jx = 0; jx < cols; ++jx) {
      M(i, jx) = data[static_cast<std::size_t>(i * cols + jx)];
    }
  }
  return M;
}

inline std::vector<double> flat_row_major(const Matrix& M) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) data.push_back(M(i, j));
  }
  return data;
}

inline Matrix from_flat_row_major(const std::vector<double>& data, Eigen::Index rows,
                                  Eigen::Index cols) {
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw std::invalid_argument("plant JSON: matrix payload has the wrong length");
  }
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = data[static_cast<std::size_t>(i * cols + j)];
  }
  return M;
}

inline json plant_to_json(const Plant& plant, std::optional<std::uint64_t> seed = std::nullopt) {
  json edges = json::array();
  for (std::size_t i = 0; i < plant.graph.size(); ++i) {
    for (int j : plant.graph[i]) {
      if (static_cast<int>(i) < j) edges.push_back({static_cast<int>(i), j});
    }
  }
  json out{{"n", plant.n()}, {"m", plant.m()}, {"A", flat_row_major(plant.A)},
           {"B", flat_row_major(plant.B)}, {"graph", edges}};
  if (seed.has_value()) out["seed"] = *seed;
  return out;
}

inline Plant plant_from_json(const json& j) {
  const Eigen::Index n = j.at("n").get<Eigen::Index>();
  const Eigen::Index m = j.at("m").get<Eigen::Index>();
  Matrix A = from_flat_row_major(j.at("A").get<std::vector<double>>(), n, n);
  Matrix B = from_flat_row_major(j.at("B").get<std::vector<double>>(), n, m);
  if (!j.contains("graph")) return Plant(std::move(A), std::move(B));
  std::vector<std::vector<int>> graph(static_cast<std::size_t>(n));
  for (const auto& e : j.at("graph")) {
    const int a = e.at(0).get<int>();
    const int b = e.at(1).get<int>();
    graph.at(static_cast<std::size_t>(a)).push_back(b);
  }
  return Plant(std::move(A), std::move(B), std::move(graph));
}

/// Controller document: final response taps, the certificate (stab kind,
/// scaling, beta), and enough metadata to rebuild supports for verification.
struct ControllerFile {
  int horizon = 0;
  int d = -1;  // -1 = dense support
  NormKind stab = NormKind::NuMaxElt;
  double beta = 0.0;
  double cost = 0.0;
  Vector scaling_log;
  double hx = 1.0, hu = 1.0;
  double qx = 1.0, qu = 50.0;
  std::vector<Matrix> phi_x_taps;
  std::vector<Matrix> phi_u_taps;
};

inline NormKind norm_kind_from_string(const std::string& s) {
  if (s == "l1") return NormKind::L1RowMax;
  if (s == "linf") return NormKind::LinfColMax;
  if (s == "nu") return NormKind::NuMaxElt;
  if (s == "h2") return NormKind::H2;
  throw std::invalid_argument("unknown norm kind '" + s + "' (expected l1, linf, nu or h2)");
}

inline json controller_to_json(const ControllerFile& c) {
  json jx = json::array(), ju = json::array();
  for (const Matrix& t : c.phi_x_taps) jx.push_back(flat_row_major(t));
  for (const Matrix& t : c.phi_u_taps) ju.push_back(flat_row_major(t));
  const Eigen::Index n = c.phi_x_taps.empty() ? 0 : c.phi_x_taps.front().rows();
  const Eigen::Index m = c.phi_u_taps.empty() ? 0 : c.phi_u_taps.front().rows();
  return json{{"n", n},
              {"m", m},
              {"horizon", c.horizon},
              {"d", c.d},
              {"stab", to_string(c.stab)},
              {"beta", c.beta},
              {"cost", c.cost},
              {"scaling_l", std::vector<double>(c.scaling_log.data(),
                                                c.scaling_log.data() + c.scaling_log.size())},
              {"hx", c.hx},
              {"hu", c.hu},
              {"qx", c.qx},
              {"qu", c.qu},
              {"phi_x", jx},
              {"phi_u", ju}};
}

inline ControllerFile controller_from_json(const json& j) {
  ControllerFile c;
  c.horizon = j.at("horizon").get<int>();
  c.d = j.at("d").get<int>();
  c.stab = norm_kind_from_string(j.at("stab").get<std::string>());
  c.beta = j.at("beta").get<double>();
  c.cost = j.value("cost", 0.0);
  const auto l = j.at("scaling_l").get<std::vector<double>>();
  c.scaling_log = Eigen::Map<const Vector>(l.data(), static_cast<Eigen::Index>(l.size()));
  c.hx = j.value("hx", 1.0);
  c.hu = j.value("hu", 1.0);
  c.qx = j.value("qx", 1.0);
  c.qu = j.value("qu", 50.0);
  const Eigen::Index n = j.at("n").get<Eigen::Index>();
  const Eigen::Index m = j.at("m").get<Eigen::Index>();
  for (const auto& t : j.at("phi_x")) {
    c.phi_x_taps.push_back(from_flat_row_major(t.get<std::vector<double>>(), n, n));
  }
  for (const auto& t : j.at("phi_u")) {
    c.phi_u_taps.push_back(from_flat_row_major(t.get<std::vector<double>>(), m, n));
  }
  if (static_cast<int>(c.phi_x_taps.size()) != c.horizon ||
      static_cast<int>(c.phi_u_taps.size()) != c.horizon) {
    throw std::invalid_argument("controller JSON: tap count does not match horizon");
  }
  return c;
}

inline json load_json_file(const std::string& path) {
  std::ifstream ifs(path);
  if (!ifs) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(ifs);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("parse error in '" + path + "': " + e.what());
  }
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream ofs(path);
  if (!ofs) throw std::runtime_error("cannot write '" + path + "'");
  ofs << j.dump(2) << '\n';
}

}  // namespace slsrob

#endif  // SLSROB_IO_HPP_
