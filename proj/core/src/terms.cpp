#include "nbi/terms.hpp"

#include <cmath>
#include <stdexcept>

#include "nbi/text.hpp"

namespace nbi {

namespace {

std::string power_text(const std::string& feature, int power) {
  return power == 1 ? feature : feature + "^" + std::to_string(power);
}

// Parses "name" or "name^k" and checks the feature is numeric.
void parse_powered(std::string_view text, const FeatureSchema& schema,
                   std::string& feature, int& power) {
  const auto caret = text.find('^');
  std::string name(trim(text.substr(0, caret)));
  power = 1;
  if (caret != std::string_view::npos) {
    std::int64_t parsed = 0;
    if (!parse_int64(text.substr(caret + 1), parsed) || parsed < 1)
      throw std::invalid_argument("bad power in term: " + std::string(text));
    power = static_cast<int>(parsed);
  }
  if (!schema.is_numeric(name))
    throw std::invalid_argument("power applies to numeric features only: " +
                                std::string(text));
  feature = std::move(name);
}

void append_powered(const Dataset& data, const std::string& feature, int power,
                    Eigen::MatrixXd& out, int column) {
  const auto values = data.numeric(feature);
  for (std::size_t row = 0; row < values.size(); ++row)
    out(static_cast<Eigen::Index>(row), column) =
        std::pow(values[row], power);
}

}  // namespace

std::string form_to_string(const InteractionForm& form) {
  return std::visit(
      [](const auto& f) -> std::string {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, NumNumForm>)
          return power_text(f.feature_1, f.power_1) + "*" +
                 power_text(f.feature_2, f.power_2);
        else if constexpr (std::is_same_v<T, NumCatForm>)
          return f.numeric_feature + "*" + f.categorical_feature;
        else
          return f.feature_1 + "*" + f.feature_2;
      },
      form);
}

std::string term_to_string(const TermSpec& term) {
  return std::visit(
      [](const auto& t) -> std::string {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, InterceptTerm>)
          return "intercept";
        else if constexpr (std::is_same_v<T, NumericTerm>)
          return power_text(t.feature, t.power);
        else if constexpr (std::is_same_v<T, LogTerm>)
          return "log(" + t.feature + ")";
        else if constexpr (std::is_same_v<T, CategoricalTerm>)
          return t.feature;
        else
          return form_to_string(t.form);
      },
      term);
}

TermSpec parse_term(std::string_view text, const FeatureSchema& schema) {
  const auto body = trim(text);
  if (body == "intercept") return InterceptTerm{};
  if (body.starts_with("log(") && body.ends_with(")")) {
    std::string feature(trim(body.substr(4, body.size() - 5)));
    if (!schema.is_numeric(feature))
      throw std::invalid_argument("log() needs a numeric feature: " +
                                  std::string(body));
    return LogTerm{std::move(feature)};
  }

  const auto star = body.find('*');
  if (star == std::string_view::npos) {
    const auto caret = body.find('^');
    std::string name(trim(body.substr(0, caret)));
    const auto& column = schema.feature(name);
    if (column.kind == FeatureKind::categorical) {
      if (caret != std::string_view::npos)
        throw std::invalid_argument("power on a categorical feature: " +
                                    std::string(body));
      return CategoricalTerm{std::move(name)};
    }
    std::string feature;
    int power = 1;
    parse_powered(body, schema, feature, power);
    return NumericTerm{std::move(feature), power};
  }

  const auto left = trim(body.substr(0, star));
  const auto right = trim(body.substr(star + 1));
  auto kind_of = [&](std::string_view side) {
    const auto caret = side.find('^');
    return schema.feature(std::string(trim(side.substr(0, caret)))).kind;
  };
  const auto left_kind = kind_of(left);
  const auto right_kind = kind_of(right);
  auto base_name = [](std::string_view side) {
    return std::string(trim(side.substr(0, side.find('^'))));
  };
  if (base_name(left) == base_name(right))
    throw std::invalid_argument(
        "a feature cannot interact with itself (write a power instead): " +
        std::string(body));
  auto require_plain = [&](std::string_view side) {
    if (side.find('^') != std::string_view::npos)
      throw std::invalid_argument("power on a categorical feature: " +
                                  std::string(body));
  };

  if (left_kind == FeatureKind::numeric && right_kind == FeatureKind::numeric) {
    NumNumForm form;
    parse_powered(left, schema, form.feature_1, form.power_1);
    parse_powered(right, schema, form.feature_2, form.power_2);
    return InteractionTerm{form};
  }
  if (left_kind == FeatureKind::categorical &&
      right_kind == FeatureKind::categorical) {
    require_plain(left);
    require_plain(right);
    return InteractionTerm{
        CatCatForm{std::string(left), std::string(right)}};
  }

  // Mixed pair: keep the numeric side first, powers are not allowed here.
  const auto numeric_side = left_kind == FeatureKind::numeric ? left : right;
  const auto cat_side = left_kind == FeatureKind::numeric ? right : left;
  if (numeric_side.find('^') != std::string_view::npos)
    throw std::invalid_argument(
        "numeric-categorical interactions take the numeric feature "
        "unpowered: " +
        std::string(body));
  require_plain(cat_side);
  return InteractionTerm{
      NumCatForm{std::string(numeric_side), std::string(cat_side)}};
}

int term_width(const TermSpec& term, const FeatureSchema& schema) {
  return std::visit(
      [&](const auto& t) -> int {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, CategoricalTerm>)
          return schema.feature(t.feature).category_count() - 1;
        else if constexpr (std::is_same_v<T, InteractionTerm>) {
          return std::visit(
              [&](const auto& f) -> int {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, NumNumForm>)
                  return 1;
                else if constexpr (std::is_same_v<F, NumCatForm>)
                  return schema.feature(f.categorical_feature)
                             .category_count() -
                         1;
                else
                  return (schema.feature(f.feature_1).category_count() - 1) *
                         (schema.feature(f.feature_2).category_count() - 1);
              },
              t.form);
        } else {
          return 1;
        }
      },
      term);
}

namespace {

// Non-reference level codes of a categorical feature, in level order.
std::vector<int> kept_levels(const FeatureColumn& column) {
  std::vector<int> kept;
  for (int level = 0; level < column.category_count(); ++level)
    if (level != column.reference_index()) kept.push_back(level);
  return kept;
}

}  // namespace

DesignMatrix build_design(const Dataset& data,
                          const std::vector<TermSpec>& terms) {
  const auto& schema = data.schema;
  int width = 0;
  for (const auto& term : terms) width += term_width(term, schema);

  DesignMatrix design;
  design.values.resize(static_cast<Eigen::Index>(data.size()), width);
  design.labels.reserve(static_cast<std::size_t>(width));
  const auto n = static_cast<Eigen::Index>(data.size());
  int column = 0;

  for (const auto& term : terms) {
    std::visit(
        [&](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, InterceptTerm>) {
            design.values.col(column).setOnes();
            design.labels.push_back("intercept");
            ++column;
          } else if constexpr (std::is_same_v<T, NumericTerm>) {
            append_powered(data, t.feature, t.power, design.values, column);
            design.labels.push_back(power_text(t.feature, t.power));
            ++column;
          } else if constexpr (std::is_same_v<T, LogTerm>) {
            const auto values = data.numeric(t.feature);
            for (std::size_t row = 0; row < values.size(); ++row) {
              if (!(values[row] > 0.0))
                throw std::invalid_argument(
                    "log(" + t.feature + ") needs positive values, row " +
                    std::to_string(row) + " has " +
                    format_double(values[row]));
              design.values(static_cast<Eigen::Index>(row), column) =
                  std::log(values[row]);
            }
            design.labels.push_back("log(" + t.feature + ")");
            ++column;
          } else if constexpr (std::is_same_v<T, CategoricalTerm>) {
            const auto& feature = schema.feature(t.feature);
            const auto codes = data.codes(t.feature);
            for (const int level : kept_levels(feature)) {
              for (Eigen::Index row = 0; row < n; ++row)
                design.values(row, column) =
                    codes[static_cast<std::size_t>(row)] == level ? 1.0 : 0.0;
              design.labels.push_back(
                  t.feature + "=" +
                  feature.categories[static_cast<std::size_t>(level)]);
              ++column;
            }
          } else {
            std::visit(
                [&](const auto& f) {
                  using F = std::decay_t<decltype(f)>;
                  if constexpr (std::is_same_v<F, NumNumForm>) {
                    const auto a = data.numeric(f.feature_1);
                    const auto b = data.numeric(f.feature_2);
                    for (Eigen::Index row = 0; row < n; ++row) {
                      const auto r = static_cast<std::size_t>(row);
                      design.values(row, column) =
                          std::pow(a[r], f.power_1) * std::pow(b[r], f.power_2);
                    }
                    design.labels.push_back(form_to_string(t.form));
                    ++column;
                  } else if constexpr (std::is_same_v<F, NumCatForm>) {
                    const auto values = data.numeric(f.numeric_feature);
                    const auto& feature = schema.feature(f.categorical_feature);
                    const auto codes = data.codes(f.categorical_feature);
                    for (const int level : kept_levels(feature)) {
                      for (Eigen::Index row = 0; row < n; ++row) {
                        const auto r = static_cast<std::size_t>(row);
                        design.values(row, column) =
                            codes[r] == level ? values[r] : 0.0;
                      }
                      design.labels.push_back(
                          f.numeric_feature + "*" + f.categorical_feature +
                          "=" +
                          feature.categories[static_cast<std::size_t>(level)]);
                      ++column;
                    }
                  } else {
                    const auto& feature_1 = schema.feature(f.feature_1);
                    const auto& feature_2 = schema.feature(f.feature_2);
                    const auto codes_1 = data.codes(f.feature_1);
                    const auto codes_2 = data.codes(f.feature_2);
                    for (const int level_1 : kept_levels(feature_1)) {
                      for (const int level_2 : kept_levels(feature_2)) {
                        for (Eigen::Index row = 0; row < n; ++row) {
                          const auto r = static_cast<std::size_t>(row);
                          design.values(row, column) =
                              codes_1[r] == level_1 && codes_2[r] == level_2
                                  ? 1.0
                                  : 0.0;
                        }
                        design.labels.push_back(
                            f.feature_1 + "=" +
                            feature_1
                                .categories[static_cast<std::size_t>(level_1)] +
                            "*" + f.feature_2 + "=" +
                            feature_2
                                .categories[static_cast<std::size_t>(level_2)]);
                        ++column;
                      }
                    }
                  }
                },
                t.form);
          }
        },
        term);
  }
  return design;
}

}  // namespace nbi
