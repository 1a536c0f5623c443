#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lkld {

/// printf-style %.<digits>g rendering of a double.
std::string format_sig(double value, int digits = 9);

/// Rounds to `digits` significant digits (used before emitting JSON numbers).
double round_sig(double value, int digits = 9);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(std::string_view text);

/// Splits CSV text into rows of fields. Handles double-quoted fields.
/// Blank lines and lines starting with '#' are skipped.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Parses `start:stop:step` into start + i*step for every value below
/// stop - 1e-12. Throws std::invalid_argument on malformed ranges.
std::vector<double> parse_range(const std::string& text);

/// Parses a comma separated list of reals.
std::vector<double> parse_real_list(const std::string& text);

/// Parses a real, requiring the whole string to be consumed.
double parse_real(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so the
/// destination is either untouched or complete.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace lkld
