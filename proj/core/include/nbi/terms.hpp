#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "nbi/dataset.hpp"

namespace nbi {

// Pairwise interaction shapes.  Feature order inside a form is significant
// for labelling but not for the fitted model.
struct NumNumForm {
  std::string feature_1;
  int power_1 = 1;
  std::string feature_2;
  int power_2 = 1;
  bool operator==(const NumNumForm&) const = default;
};
// One slope per non-reference level of the categorical feature.
struct NumCatForm {
  std::string numeric_feature;
  std::string categorical_feature;
  bool operator==(const NumCatForm&) const = default;
};
// One coefficient per pair of non-reference levels.
struct CatCatForm {
  std::string feature_1;
  std::string feature_2;
  bool operator==(const CatCatForm&) const = default;
};
using InteractionForm = std::variant<NumNumForm, NumCatForm, CatCatForm>;

struct InterceptTerm {};
struct NumericTerm {
  std::string feature;
  int power = 1;
};
struct LogTerm {
  std::string feature;
};
// Dummy coding over all non-reference levels.
struct CategoricalTerm {
  std::string feature;
};
struct InteractionTerm {
  InteractionForm form;
};
using TermSpec = std::variant<InterceptTerm, NumericTerm, LogTerm,
                              CategoricalTerm, InteractionTerm>;

// Compact text form: "intercept", "x_1", "x_2^2", "log(x_1)", "x_9",
// "x_4*x_5", "x_5^2*x_6", "x_5*x_9", "x_9*x_10".  parse_term resolves the
// kind of each name against the schema and round-trips term_to_string.
std::string term_to_string(const TermSpec& term);
std::string form_to_string(const InteractionForm& form);
TermSpec parse_term(std::string_view text, const FeatureSchema& schema);

// Expanded design columns for a term list, with one label per column.
// Numeric columns are raw powers; categorical blocks drop the schema's
// reference level.  Labels look like "x_2^2", "x_9=1", "x_4*x_5",
// "x_5*x_9=1", "x_9=0*x_10=3".
struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> labels;
};
DesignMatrix build_design(const Dataset& data,
                          const std::vector<TermSpec>& terms);

// Number of design columns a term expands to under a schema.
int term_width(const TermSpec& term, const FeatureSchema& schema);

}  // namespace nbi
