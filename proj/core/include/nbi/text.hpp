#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nbi {

// Formats a double with 17 significant digits, enough to reparse the exact
// same bit pattern.  Integral doubles still carry an exponent-free form
// (e.g. "2" -> "2"), infinities and NaN are spelled "inf"/"-inf"/"nan".
std::string format_double(double value);

// Parses a double, accepting exactly what format_double emits plus ordinary
// decimal and scientific notation.  Returns false if the text is not fully
// consumed or not a number.
bool parse_double(std::string_view text, double& out);

bool parse_int64(std::string_view text, std::int64_t& out);

std::string lowercase(std::string_view text);
std::string_view trim(std::string_view text);

// Splits one CSV record on commas.  Fields surrounded by double quotes are
// unwrapped; embedded separators inside quotes are kept.
std::vector<std::string> split_csv_line(std::string_view line);

// FNV-1a over the raw bytes of a file, hex-encoded.  Used to fingerprint
// pipeline artifacts; collisions only matter for accidental staleness checks,
// not security, so 64 bits is plenty.
std::string hash_file(const std::filesystem::path& path);
std::string hash_bytes(std::string_view bytes);

// Reads a whole file into a string; throws std::runtime_error when missing.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace nbi
