#pragma once

#include <filesystem>
#include <stdexcept>

#include "nbi/dataset.hpp"

namespace nbi {

// Malformed cell or structural problem in a CSV file.  The message names the
// file, the 1-based line and the column involved.
struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reads a modelling table.  The header must contain the schema's response,
// exposure and feature columns (any order, extra columns are ignored).
// Claims must be non-negative integers, exposure positive, numeric cells
// finite numbers, categorical cells one of the schema's labels.
Dataset read_dataset_csv(const std::filesystem::path& path,
                         const FeatureSchema& schema);

// Writes the table with columns [response, exposure, features...] in schema
// order.  Doubles carry 17 significant digits so a read-back is bit-exact.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);

}  // namespace nbi
