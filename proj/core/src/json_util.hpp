#pragma once

// Internal JSON helpers shared by serialization and the pipeline.  Not
// installed; nlohmann/json stays out of the public headers.

#include <filesystem>
#include <fstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "nbi/text.hpp"

namespace nbi {

// Insertion-ordered objects keep serialized artifacts byte-stable.
using Json = nlohmann::ordered_json;

inline Json matrix_to_json(const Eigen::MatrixXd& matrix) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) row.push_back(matrix(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const Json& json) {
  const auto rows = static_cast<Eigen::Index>(json.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const auto cols = static_cast<Eigen::Index>(json.at(0).size());
  Eigen::MatrixXd matrix(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      matrix(r, c) = json.at(static_cast<std::size_t>(r))
                         .at(static_cast<std::size_t>(c))
                         .get<double>();
  return matrix;
}

inline Json vector_to_json(const Eigen::VectorXd& vector) {
  Json values = Json::array();
  for (Eigen::Index i = 0; i < vector.size(); ++i) values.push_back(vector[i]);
  return values;
}

inline Eigen::VectorXd vector_from_json(const Json& json) {
  Eigen::VectorXd vector(static_cast<Eigen::Index>(json.size()));
  for (std::size_t i = 0; i < json.size(); ++i)
    vector[static_cast<Eigen::Index>(i)] = json.at(i).get<double>();
  return vector;
}

inline void write_json(const Json& json, const std::filesystem::path& path) {
  write_file(path, json.dump(2) + "\n");
}

inline Json read_json(const std::filesystem::path& path) {
  return Json::parse(read_file(path));
}

}  // namespace nbi
