#include "nbi/dataset.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nbi/random.hpp"

namespace nbi {

std::span<const double> Dataset::numeric(std::string_view name) const {
  const int idx = schema.feature_index(name);
  if (idx < 0 || schema.features[idx].kind != FeatureKind::numeric)
    throw std::invalid_argument("no numeric feature named " +
                                std::string(name));
  return numeric_pool[static_cast<std::size_t>(schema.pool_slot(idx))];
}

std::span<const std::int32_t> Dataset::codes(std::string_view name) const {
  const int idx = schema.feature_index(name);
  if (idx < 0 || schema.features[idx].kind != FeatureKind::categorical)
    throw std::invalid_argument("no categorical feature named " +
                                std::string(name));
  return categorical_pool[static_cast<std::size_t>(schema.pool_slot(idx))];
}

void Dataset::validate() const {
  schema.validate();
  const std::size_t n = claims.size();
  if (exposure.size() != n)
    throw std::invalid_argument("exposure column has wrong length");
  std::size_t numerics = 0;
  std::size_t categoricals = 0;
  for (const auto& column : schema.features)
    (column.kind == FeatureKind::numeric ? numerics : categoricals) += 1;
  if (numeric_pool.size() != numerics ||
      categorical_pool.size() != categoricals)
    throw std::invalid_argument("column pools do not match schema");
  for (const auto& column : numeric_pool)
    if (column.size() != n)
      throw std::invalid_argument("numeric column has wrong length");
  for (const auto& column : categorical_pool)
    if (column.size() != n)
      throw std::invalid_argument("categorical column has wrong length");
  for (const auto value : claims)
    if (value < 0)
      throw std::invalid_argument("negative claim count");
  for (const auto value : exposure)
    if (!(value > 0.0) || !std::isfinite(value))
      throw std::invalid_argument("exposure must be positive and finite");
  std::size_t slot = 0;
  for (const auto& column : schema.features) {
    if (column.kind != FeatureKind::categorical) continue;
    for (const auto code : categorical_pool[slot])
      if (code < 0 || code >= column.category_count())
        throw std::invalid_argument("category code out of range in " +
                                    column.name);
    ++slot;
  }
}

Dataset make_dataset(FeatureSchema schema) {
  schema.validate();
  Dataset data;
  data.schema = std::move(schema);
  for (const auto& column : data.schema.features) {
    if (column.kind == FeatureKind::numeric)
      data.numeric_pool.emplace_back();
    else
      data.categorical_pool.emplace_back();
  }
  return data;
}

Dataset take_rows(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset out = make_dataset(data.schema);
  out.claims.reserve(rows.size());
  out.exposure.reserve(rows.size());
  for (auto& column : out.numeric_pool) column.reserve(rows.size());
  for (auto& column : out.categorical_pool) column.reserve(rows.size());
  for (const std::size_t row : rows) {
    if (row >= data.size()) throw std::invalid_argument("row out of range");
    out.claims.push_back(data.claims[row]);
    out.exposure.push_back(data.exposure[row]);
    for (std::size_t c = 0; c < data.numeric_pool.size(); ++c)
      out.numeric_pool[c].push_back(data.numeric_pool[c][row]);
    for (std::size_t c = 0; c < data.categorical_pool.size(); ++c)
      out.categorical_pool[c].push_back(data.categorical_pool[c][row]);
  }
  return out;
}

Dataset concat_rows(const Dataset& a, const Dataset& b) {
  if (!(a.schema == b.schema))
    throw std::invalid_argument("concat_rows: schemas differ");
  Dataset out = a;
  out.claims.insert(out.claims.end(), b.claims.begin(), b.claims.end());
  out.exposure.insert(out.exposure.end(), b.exposure.begin(),
                      b.exposure.end());
  for (std::size_t c = 0; c < out.numeric_pool.size(); ++c)
    out.numeric_pool[c].insert(out.numeric_pool[c].end(),
                               b.numeric_pool[c].begin(),
                               b.numeric_pool[c].end());
  for (std::size_t c = 0; c < out.categorical_pool.size(); ++c)
    out.categorical_pool[c].insert(out.categorical_pool[c].end(),
                                   b.categorical_pool[c].begin(),
                                   b.categorical_pool[c].end());
  return out;
}

SplitDataset split(const Dataset& data, std::array<double, 3> fractions,
                   std::uint64_t seed) {
  double total = 0.0;
  for (const double f : fractions) {
    if (!(f > 0.0))
      throw std::invalid_argument("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to one");

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  // Nearest-integer piece sizes; the last piece absorbs rounding remainder.
  std::array<std::size_t, 3> sizes{};
  std::size_t assigned = 0;
  for (int k = 0; k < 2; ++k) {
    auto want = static_cast<std::size_t>(
        std::llround(fractions[static_cast<std::size_t>(k)] *
                     static_cast<double>(n)));
    want = std::min(want, n - assigned);
    sizes[static_cast<std::size_t>(k)] = want;
    assigned += want;
  }
  sizes[2] = n - assigned;

  SplitDataset out;
  out.seed = seed;
  out.fractions = fractions;
  std::span<const std::size_t> all(order);
  out.train = take_rows(data, all.subspan(0, sizes[0]));
  out.validation = take_rows(data, all.subspan(sizes[0], sizes[1]));
  out.test = take_rows(data, all.subspan(sizes[0] + sizes[1], sizes[2]));
  return out;
}

}  // namespace nbi
