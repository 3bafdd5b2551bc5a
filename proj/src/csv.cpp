#include "wagepanel/csv.hpp"

#include <charconv>
#include <sstream>

#include <fmt/format.h>

#include "wagepanel/error.hpp"

namespace wagepanel::csv {

std::optional<std::size_t> Table::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  return std::nullopt;
}

std::size_t Table::column(std::string_view name) const {
  if (auto c = find_column(name)) {
    return *c;
  }
  throw ValidationError("missing-column", fmt::format("{}: required column '{}' not in header", source.string(), name));
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

Table parse(std::string_view text, const std::filesystem::path &source) {
  Table t;
  t.source = source;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool have_header = false;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) {
        break;
      }
      continue;
    }
    auto fields = split(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != t.header.size()) {
        throw ValidationError("field-count", fmt::format("{}:{}: expected {} fields, found {}", source.string(), line_no,
                                                         t.header.size(), fields.size()));
      }
      t.rows.push_back(std::move(fields));
      t.line_numbers.push_back(line_no);
    }
    if (end == text.size()) {
      break;
    }
  }
  if (!have_header) {
    throw ValidationError("empty-file", fmt::format("{}: no header line", source.string()));
  }
  return t;
}

Table read(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("io", fmt::format("cannot open '{}'", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::int64_t parse_int(std::string_view field, const Table &t, std::size_t row, std::string_view col) {
  std::int64_t v = 0;
  const auto *first = field.data();
  const auto *last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw ValidationError("non-numeric", fmt::format("{}:{}: column '{}' expects an integer, got '{}'",
                                                     t.source.string(), t.line_numbers.at(row), col, field));
  }
  return v;
}

std::optional<std::int64_t> parse_optional_int(std::string_view field, const Table &t, std::size_t row,
                                               std::string_view col) {
  if (field.empty()) {
    return std::nullopt;
  }
  return parse_int(field, t, row, col);
}

double parse_double(std::string_view field, const Table &t, std::size_t row, std::string_view col) {
  double v = 0.0;
  const auto *first = field.data();
  const auto *last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw ValidationError("non-numeric", fmt::format("{}:{}: column '{}' expects a number, got '{}'",
                                                     t.source.string(), t.line_numbers.at(row), col, field));
  }
  return v;
}

std::string format(double value) { return fmt::format("{}", value); }

Writer::Writer(const std::filesystem::path &path, const std::vector<std::string> &header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) {
    throw ValidationError("io", fmt::format("cannot write '{}'", path.string()));
  }
  row(header);
}

void Writer::row(const std::vector<std::string> &fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) {
      out_ << ',';
    }
    out_ << fields[i];
  }
  out_ << '\n';
}

void Writer::close() {
  out_.close();
  if (!out_) {
    throw ValidationError("io", fmt::format("failed writing '{}'", path_.string()));
  }
}

} // namespace wagepanel::csv
