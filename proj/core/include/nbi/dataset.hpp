#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "nbi/schema.hpp"

namespace nbi {

// Column-oriented modelling table.  Numeric and categorical feature columns
// live in separate pools, in schema order within each pool; categorical
// values are level indices into the schema's category list.
//
// Invariants are established by validate(): all columns share the same row
// count, claims are non-negative, exposure is strictly positive, and every
// categorical code is a valid level index.
struct Dataset {
  FeatureSchema schema;
  std::vector<std::int64_t> claims;
  std::vector<double> exposure;
  std::vector<std::vector<double>> numeric_pool;
  std::vector<std::vector<std::int32_t>> categorical_pool;

  std::size_t size() const { return claims.size(); }

  std::span<const double> numeric(std::string_view name) const;
  std::span<const std::int32_t> codes(std::string_view name) const;

  void validate() const;
};

// Creates an empty dataset with the pools sized for the schema.
Dataset make_dataset(FeatureSchema schema);

// New dataset holding the given rows of `data`, in the given order.
Dataset take_rows(const Dataset& data, std::span<const std::size_t> rows);

// Row-wise concatenation; both inputs must share the same schema.
Dataset concat_rows(const Dataset& a, const Dataset& b);

struct SplitDataset {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::uint64_t seed = 0;
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
};

// Shuffles row indices with the given seed and deals them into three
// contiguous runs.  Piece sizes are the fractions times n rounded to nearest,
// with the last piece taking the remainder, so the pieces always partition
// the rows exactly.  Fractions must be positive and sum to 1 (within 1e-9).
SplitDataset split(const Dataset& data, std::array<double, 3> fractions,
                   std::uint64_t seed);

}  // namespace nbi
