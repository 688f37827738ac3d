#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nbi/dataset.hpp"

namespace nbi {

enum class InputEncoding {
  scaled_numeric,   // min-max scaled to [-1, 1]
  onehot_level,     // 0/1 indicator for one category (all levels kept)
  embedding_index,  // integer level code, to be looked up in an embedding
};

struct EncodedColumn {
  std::string feature;
  InputEncoding encoding = InputEncoding::scaled_numeric;
  int category = -1;  // level index for onehot_level columns
  std::string label;  // e.g. "x_1", "x_9=1", "x_10"
};

struct ScalingRange {
  std::string feature;
  double minimum = 0.0;
  double maximum = 0.0;
};

// Network-ready feature block.  Numeric features become one scaled column
// each; categorical features with at most `onehot_threshold` levels become
// one indicator column per level (no reference dropped); larger categorical
// features keep a single integer code column for an embedding lookup.
struct EncodedMatrix {
  Eigen::MatrixXd values;
  std::vector<EncodedColumn> columns;
  std::vector<ScalingRange> scaling;
};

// Encodes `data`, taking min-max scaling ranges from `scaling_source` (pass
// the training split when encoding validation or test rows; values outside
// the source range simply scale beyond [-1, 1]).  Throws when a numeric
// feature is constant in the scaling source.
EncodedMatrix encode_for_nn(const Dataset& data, int onehot_threshold,
                            const Dataset& scaling_source);

// Same layout but with previously computed ranges, one per numeric feature
// in schema order.  Used to apply a trained model to new rows.
EncodedMatrix encode_with_ranges(const Dataset& data, int onehot_threshold,
                                 const std::vector<ScalingRange>& ranges);

}  // namespace nbi
