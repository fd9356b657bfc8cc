#pragma once

// Private helpers shared by the JSON-facing translation units.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dualgs/errors.hpp"

namespace dualgs::detail {

using nlohmann::json;

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(std::string(what) + ": expected a non-empty 2-D array");
  }
  // Accept a flat array as a single row.
  if (!j.front().is_array()) {
    Eigen::MatrixXd m(1, j.size());
    for (std::size_t c = 0; c < j.size(); ++c) {
      if (!j[c].is_number()) throw ConfigError(std::string(what) + ": non-numeric entry");
      m(0, static_cast<Eigen::Index>(c)) = j[c].get<double>();
    }
    return m;
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw ConfigError(std::string(what) + ": ragged rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) {
        throw ConfigError(std::string(what) + ": non-numeric entry");
      }
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
    }
  }
  return m;
}

}  // namespace dualgs::detail
