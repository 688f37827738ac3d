#include "nbi/encoding.hpp"

#include <algorithm>
#include <stdexcept>

namespace nbi {

namespace {

EncodedMatrix encode_impl(const Dataset& data, int onehot_threshold,
                          const std::vector<ScalingRange>& ranges) {
  EncodedMatrix encoded;
  int width = 0;
  for (const auto& column : data.schema.features) {
    if (column.kind == FeatureKind::numeric)
      width += 1;
    else if (column.category_count() <= onehot_threshold)
      width += column.category_count();
    else
      width += 1;
  }
  encoded.values.resize(static_cast<Eigen::Index>(data.size()), width);

  const auto n = static_cast<Eigen::Index>(data.size());
  int out = 0;
  std::size_t range_slot = 0;
  for (const auto& column : data.schema.features) {
    if (column.kind == FeatureKind::numeric) {
      if (range_slot >= ranges.size() ||
          ranges[range_slot].feature != column.name)
        throw std::invalid_argument("scaling ranges do not match schema at " +
                                    column.name);
      const double lo = ranges[range_slot].minimum;
      const double hi = ranges[range_slot].maximum;
      if (!(hi > lo))
        throw std::invalid_argument("feature " + column.name +
                                    " has a degenerate scaling range");
      ++range_slot;
      const auto values = data.numeric(column.name);
      for (Eigen::Index row = 0; row < n; ++row)
        encoded.values(row, out) =
            2.0 * (values[static_cast<std::size_t>(row)] - lo) / (hi - lo) -
            1.0;
      encoded.columns.push_back({column.name, InputEncoding::scaled_numeric,
                                 -1, column.name});
      encoded.scaling.push_back({column.name, lo, hi});
      ++out;
    } else if (column.category_count() <= onehot_threshold) {
      const auto codes = data.codes(column.name);
      for (int level = 0; level < column.category_count(); ++level) {
        for (Eigen::Index row = 0; row < n; ++row)
          encoded.values(row, out) =
              codes[static_cast<std::size_t>(row)] == level ? 1.0 : 0.0;
        encoded.columns.push_back(
            {column.name, InputEncoding::onehot_level, level,
             column.name + "=" +
                 column.categories[static_cast<std::size_t>(level)]});
        ++out;
      }
    } else {
      const auto codes = data.codes(column.name);
      for (Eigen::Index row = 0; row < n; ++row)
        encoded.values(row, out) =
            static_cast<double>(codes[static_cast<std::size_t>(row)]);
      encoded.columns.push_back({column.name, InputEncoding::embedding_index,
                                 -1, column.name});
      ++out;
    }
  }
  return encoded;
}

}  // namespace

EncodedMatrix encode_for_nn(const Dataset& data, int onehot_threshold,
                            const Dataset& scaling_source) {
  if (!(data.schema == scaling_source.schema))
    throw std::invalid_argument("scaling source schema does not match data");
  std::vector<ScalingRange> ranges;
  for (const auto& column : data.schema.features) {
    if (column.kind != FeatureKind::numeric) continue;
    const auto source = scaling_source.numeric(column.name);
    const auto [lo_it, hi_it] =
        std::minmax_element(source.begin(), source.end());
    if (!(*hi_it > *lo_it))
      throw std::invalid_argument("feature " + column.name +
                                  " is constant in the scaling source");
    ranges.push_back({column.name, *lo_it, *hi_it});
  }
  return encode_impl(data, onehot_threshold, ranges);
}

EncodedMatrix encode_with_ranges(const Dataset& data, int onehot_threshold,
                                 const std::vector<ScalingRange>& ranges) {
  return encode_impl(data, onehot_threshold, ranges);
}

}  // namespace nbi
