#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nbi {

enum class FeatureKind { numeric, categorical };

// One feature column.  Categorical levels are stored as strings in a fixed
// order; rows hold indices into that list.  The reference level (dropped when
// building dummy-coded designs) defaults to the last listed category.
struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::vector<std::string> categories;
  int reference = -1;

  int category_count() const { return static_cast<int>(categories.size()); }
  int reference_index() const {
    return reference >= 0 ? reference : category_count() - 1;
  }
};

// Column layout of a modelling table: the response (claim counts), the
// exposure column, and the feature columns in a fixed order.
struct FeatureSchema {
  std::string response_column;
  std::string exposure_column;
  std::vector<FeatureColumn> features;

  // Index into `features`, or -1 when the name is unknown.
  int feature_index(std::string_view name) const;
  const FeatureColumn& feature(std::string_view name) const;
  bool is_numeric(std::string_view name) const;

  // Position of a feature among the columns of its own kind.  Datasets store
  // numeric and categorical columns in separate pools; this maps a feature
  // index to its pool slot.
  int pool_slot(int feature_idx) const;

  // Index of a category label within a categorical feature; throws when the
  // label is unknown.
  int category_index(const FeatureColumn& column, std::string_view label) const;

  // Throws std::invalid_argument describing the first problem found:
  // duplicate names, feature named like response/exposure, categorical
  // features with fewer than two levels, or reference out of range.
  void validate() const;
};

bool operator==(const FeatureColumn& a, const FeatureColumn& b);
bool operator==(const FeatureSchema& a, const FeatureSchema& b);

}  // namespace nbi
