#include "wagepanel/health.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>

#include "wagepanel/csv.hpp"
#include "wagepanel/error.hpp"

namespace wagepanel::health {

namespace detail {
std::string_view default_charlson_csv();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string normalize_code(std::string_view code) {
  std::string out;
  out.reserve(code.size());
  for (char c : code) {
    if (c == '.' || std::isspace(static_cast<unsigned char>(c))) {
      continue;
    }
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

CharlsonTable CharlsonTable::parse(std::string_view csv_text, std::string source) {
  const auto t = csv::parse(csv_text, source);
  const auto c_name = t.column("category"), c_weight = t.column("weight"), c9 = t.column("icd9_prefixes"),
             c10 = t.column("icd10_prefixes"), c_sup = t.column("supersedes");
  CharlsonTable table;
  table.checksum_ = fnv1a64(csv_text);
  std::vector<std::string> supersedes;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto &row = t.rows[i];
    CharlsonCategory c;
    c.name = row[c_name];
    c.weight = static_cast<int>(csv::parse_int(row[c_weight], t, i, "weight"));
    for (const auto &p : csv::split(row[c9], ';')) {
      if (!p.empty()) {
        c.icd9_prefixes.push_back(normalize_code(p));
      }
    }
    for (const auto &p : csv::split(row[c10], ';')) {
      if (!p.empty()) {
        c.icd10_prefixes.push_back(normalize_code(p));
      }
    }
    if (c.name.empty() || c.weight <= 0 || c.icd9_prefixes.empty() || c.icd10_prefixes.empty()) {
      throw ValidationError("invalid-table", fmt::format("{}:{}: category needs a name, a positive weight and "
                                                         "non-empty prefix lists",
                                                         source, t.line_numbers[i]));
    }
    supersedes.push_back(row[c_sup]);
    table.categories_.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < supersedes.size(); ++i) {
    if (!supersedes[i].empty()) {
      table.categories_[i].superseded_by = table.index_of(supersedes[i]);
    }
  }
  // The supersedes relation must be acyclic.
  for (std::size_t i = 0; i < table.categories_.size(); ++i) {
    std::set<std::size_t> visited{i};
    auto next = table.categories_[i].superseded_by;
    while (next) {
      if (!visited.insert(*next).second) {
        throw ValidationError("invalid-table",
                              fmt::format("{}: supersedes relation has a cycle through '{}'", source,
                                          table.categories_[i].name));
      }
      next = table.categories_[*next].superseded_by;
    }
  }
  for (std::size_t i = 0; i < table.categories_.size(); ++i) {
    const auto &c = table.categories_[i];
    for (int v = 0; v < 2; ++v) {
      for (const auto &p : v == 0 ? c.icd9_prefixes : c.icd10_prefixes) {
        auto &cats = table.prefixes_[v][p];
        if (std::find(cats.begin(), cats.end(), i) == cats.end()) {
          cats.push_back(i);
        }
        table.max_len_[v] = std::max(table.max_len_[v], p.size());
      }
    }
  }
  return table;
}

CharlsonTable CharlsonTable::load(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("io", fmt::format("cannot open '{}'", path.string()));
  }
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text, path.string());
}

const CharlsonTable &CharlsonTable::quan2005() {
  static const CharlsonTable table = parse(detail::default_charlson_csv(), "charlson_quan2005.csv");
  return table;
}

std::size_t CharlsonTable::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (categories_[i].name == name) {
      return i;
    }
  }
  throw ValidationError("invalid-table", fmt::format("unknown Charlson category '{}'", name));
}

std::vector<std::size_t> CharlsonTable::match(int icd_version, std::string_view code) const {
  if (icd_version != 9 && icd_version != 10) {
    throw ValidationError("invalid-value", fmt::format("unsupported ICD version {}", icd_version));
  }
  const int v = icd_version == 9 ? 0 : 1;
  const std::string norm = normalize_code(code);
  for (std::size_t len = std::min(norm.size(), max_len_[v]); len > 0; --len) {
    const auto it = prefixes_[v].find(norm.substr(0, len));
    if (it != prefixes_[v].end()) {
      auto cats = it->second;
      std::sort(cats.begin(), cats.end());
      return cats;
    }
  }
  return {};
}

CciScore cci_at_cutoff(std::span<const DiagnosisRecord> records, int birth_year, int cutoff_age,
                       const CharlsonTable &table) {
  const auto &cats = table.categories();
  std::vector<bool> present(cats.size(), false);
  CciScore out;
  for (const auto &r : records) {
    if (r.event_year - birth_year > cutoff_age) {
      continue;
    }
    const auto matched = table.match(r.icd_version, r.code);
    if (matched.empty()) {
      ++out.unmatched;
    }
    for (std::size_t c : matched) {
      present[c] = true;
    }
  }
  for (std::size_t c = 0; c < cats.size(); ++c) {
    if (!present[c]) {
      continue;
    }
    bool superseded = false;
    for (auto s = cats[c].superseded_by; s; s = cats[*s].superseded_by) {
      if (present[*s]) {
        superseded = true;
        break;
      }
    }
    if (!superseded) {
      out.score += cats[c].weight;
    }
  }
  return out;
}

std::vector<CciSeries> cci_series(std::span<const DiagnosisRecord> records,
                                  const std::map<std::int64_t, int> &birth_years, const CharlsonTable &table,
                                  int first_cutoff, int last_cutoff) {
  std::map<std::int64_t, std::vector<DiagnosisRecord>> by_person;
  for (const auto &r : records) {
    by_person[r.person_id].push_back(r);
  }
  std::vector<CciSeries> out;
  out.reserve(birth_years.size());
  for (const auto &[pid, by] : birth_years) {
    CciSeries s;
    s.person_id = pid;
    const auto it = by_person.find(pid);
    const std::span<const DiagnosisRecord> recs =
        it == by_person.end() ? std::span<const DiagnosisRecord>{} : std::span<const DiagnosisRecord>(it->second);
    for (int cut = first_cutoff; cut <= last_cutoff; ++cut) {
      s.scores[cut] = cci_at_cutoff(recs, by, cut, table).score;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<DiagnosisRecord> load_diagnoses(const std::filesystem::path &path) {
  const auto t = csv::read(path);
  const auto cp = t.column("person_id"), cy = t.column("event_year"), cv = t.column("icd_version"),
             cc = t.column("code");
  std::vector<DiagnosisRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto &row = t.rows[i];
    DiagnosisRecord r;
    r.person_id = csv::parse_int(row[cp], t, i, "person_id");
    r.event_year = static_cast<int>(csv::parse_int(row[cy], t, i, "event_year"));
    r.icd_version = static_cast<int>(csv::parse_int(row[cv], t, i, "icd_version"));
    r.code = row[cc];
    if (r.code.empty() || (r.icd_version != 9 && r.icd_version != 10)) {
      throw ValidationError("invalid-value", fmt::format("{}:{}: code must be non-empty and icd_version 9 or 10",
                                                         path.string(), t.line_numbers[i]));
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_diagnoses(std::span<const DiagnosisRecord> records, const std::filesystem::path &path) {
  csv::Writer w(path, {"person_id", "event_year", "icd_version", "code"});
  for (const auto &r : records) {
    w.row({std::to_string(r.person_id), std::to_string(r.event_year), std::to_string(r.icd_version), r.code});
  }
  w.close();
}

std::map<std::int64_t, int> load_birth_years(const std::filesystem::path &path) {
  const auto t = csv::read(path);
  const auto cp = t.column("person_id"), cb = t.column("birth_year");
  std::map<std::int64_t, int> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto pid = csv::parse_int(t.rows[i][cp], t, i, "person_id");
    const auto by = static_cast<int>(csv::parse_int(t.rows[i][cb], t, i, "birth_year"));
    if (!out.emplace(pid, by).second) {
      throw ValidationError("duplicate-key",
                            fmt::format("{}:{}: person {} repeated", path.string(), t.line_numbers[i], pid));
    }
  }
  return out;
}

} // namespace wagepanel::health
