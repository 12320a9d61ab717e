#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ictd::io {

/// Shortest decimal string that parses back to the same double. Non-finite
/// values become "inf", "-inf" or "nan".
std::string format_double(double value);

/// Inverse of format_double; throws std::invalid_argument on garbage.
double parse_double(const std::string& text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

/// Writes with '\n' line endings and no quoting; cells must not contain
/// commas or newlines.
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace ictd::io
