#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wagepanel::csv {

/// Minimal comma-separated reader: no quoting, `#` starts a comment line,
/// blank lines are skipped. Empty fields denote missing values.
struct Table {
  std::filesystem::path source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers; ///< 1-based line of each row in the file

  /// Index of `name` in the header; throws ValidationError("missing-column").
  std::size_t column(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;
};

Table read(const std::filesystem::path &path);
Table parse(std::string_view text, const std::filesystem::path &source = "<memory>");

std::vector<std::string> split(std::string_view line, char sep = ',');

std::int64_t parse_int(std::string_view field, const Table &t, std::size_t row, std::string_view col);
double parse_double(std::string_view field, const Table &t, std::size_t row, std::string_view col);
std::optional<std::int64_t> parse_optional_int(std::string_view field, const Table &t, std::size_t row,
                                               std::string_view col);

/// Shortest round-trip decimal representation; locale independent.
std::string format(double value);

/// Writes rows with `\n` line endings. Throws on IO failure.
class Writer {
public:
  Writer(const std::filesystem::path &path, const std::vector<std::string> &header);
  void row(const std::vector<std::string> &fields);
  void close();

private:
  std::filesystem::path path_;
  std::ofstream out_;
};

} // namespace wagepanel::csv
