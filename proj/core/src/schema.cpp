#include "nbi/schema.hpp"

#include <set>
#include <stdexcept>

namespace nbi {

int FeatureSchema::feature_index(std::string_view name) const {
  for (std::size_t i = 0; i < features.size(); ++i)
    if (features[i].name == name) return static_cast<int>(i);
  return -1;
}

const FeatureColumn& FeatureSchema::feature(std::string_view name) const {
  const int idx = feature_index(name);
  if (idx < 0)
    throw std::invalid_argument("unknown feature: " + std::string(name));
  return features[static_cast<std::size_t>(idx)];
}

bool FeatureSchema::is_numeric(std::string_view name) const {
  return feature(name).kind == FeatureKind::numeric;
}

int FeatureSchema::pool_slot(int feature_idx) const {
  const auto kind = features[static_cast<std::size_t>(feature_idx)].kind;
  int slot = 0;
  for (int i = 0; i < feature_idx; ++i)
    if (features[static_cast<std::size_t>(i)].kind == kind) ++slot;
  return slot;
}

int FeatureSchema::category_index(const FeatureColumn& column,
                                  std::string_view label) const {
  for (std::size_t i = 0; i < column.categories.size(); ++i)
    if (column.categories[i] == label) return static_cast<int>(i);
  throw std::invalid_argument("unknown category '" + std::string(label) +
                              "' for feature " + column.name);
}

void FeatureSchema::validate() const {
  if (response_column.empty() || exposure_column.empty())
    throw std::invalid_argument("schema needs response and exposure columns");
  if (response_column == exposure_column)
    throw std::invalid_argument(
        "response and exposure columns must be distinct");
  std::set<std::string> seen{response_column, exposure_column};
  for (const auto& column : features) {
    if (column.name.empty())
      throw std::invalid_argument("feature with empty name");
    if (!seen.insert(column.name).second)
      throw std::invalid_argument("duplicate column name: " + column.name);
    if (column.kind == FeatureKind::categorical) {
      if (column.category_count() < 2)
        throw std::invalid_argument("categorical feature " + column.name +
                                    " needs at least two categories");
      std::set<std::string> labels(column.categories.begin(),
                                   column.categories.end());
      if (static_cast<int>(labels.size()) != column.category_count())
        throw std::invalid_argument("duplicate category label in " +
                                    column.name);
      if (column.reference >= column.category_count())
        throw std::invalid_argument("reference category out of range for " +
                                    column.name);
    } else if (!column.categories.empty()) {
      throw std::invalid_argument("numeric feature " + column.name +
                                  " must not list categories");
    }
  }
}

bool operator==(const FeatureColumn& a, const FeatureColumn& b) {
  return a.name == b.name && a.kind == b.kind && a.categories == b.categories &&
         a.reference_index() == b.reference_index();
}

bool operator==(const FeatureSchema& a, const FeatureSchema& b) {
  return a.response_column == b.response_column &&
         a.exposure_column == b.exposure_column && a.features == b.features;
}

}  // namespace nbi
