#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wagepanel::health {

struct DiagnosisRecord {
  std::int64_t person_id = 0;
  int event_year = 0;
  int icd_version = 10; ///< 9 or 10
  std::string code;

  auto operator<=>(const DiagnosisRecord &) const = default;
};

struct CharlsonCategory {
  std::string name;
  int weight = 0;
  std::vector<std::string> icd9_prefixes;
  std::vector<std::string> icd10_prefixes;
  std::optional<std::size_t> superseded_by; ///< category that replaces this one when both occur
};

/// Uppercase, dots and whitespace removed.
std::string normalize_code(std::string_view code);

/// Charlson weight and code table. Loaded from CSV
/// `category,weight,icd9_prefixes,icd10_prefixes,supersedes` with
/// `;`-separated prefixes; immutable after construction.
class CharlsonTable {
public:
  static CharlsonTable parse(std::string_view csv_text, std::string source = "<memory>");
  static CharlsonTable load(const std::filesystem::path &path);
  /// Quan (2005) ICD-9-CM / ICD-10 coding with the original Charlson weights.
  static const CharlsonTable &quan2005();

  const std::vector<CharlsonCategory> &categories() const { return categories_; }
  std::size_t index_of(std::string_view name) const;

  /// Categories whose longest matching prefix has maximal length among all
  /// categories (several on ties). Empty when the code is not a Charlson condition.
  std::vector<std::size_t> match(int icd_version, std::string_view code) const;

  /// FNV-1a 64 of the source text.
  std::uint64_t checksum() const { return checksum_; }

private:
  std::vector<CharlsonCategory> categories_;
  std::unordered_map<std::string, std::vector<std::size_t>> prefixes_[2];
  std::size_t max_len_[2] = {0, 0};
  std::uint64_t checksum_ = 0;
};

std::uint64_t fnv1a64(std::string_view bytes);

struct CciScore {
  int score = 0;
  std::size_t unmatched = 0; ///< in-window records that map to no category
};

/// Charlson score of one person's records with event age <= cutoff_age.
CciScore cci_at_cutoff(std::span<const DiagnosisRecord> records, int birth_year, int cutoff_age,
                       const CharlsonTable &table);

struct CciSeries {
  std::int64_t person_id = 0;
  std::map<int, int> scores; ///< cutoff age -> score, nondecreasing
};

/// Scores at every cutoff in [first_cutoff, last_cutoff] for each person in
/// `birth_years` (persons without records get all-zero series).
std::vector<CciSeries> cci_series(std::span<const DiagnosisRecord> records,
                                  const std::map<std::int64_t, int> &birth_years, const CharlsonTable &table,
                                  int first_cutoff = 19, int last_cutoff = 50);

std::vector<DiagnosisRecord> load_diagnoses(const std::filesystem::path &path);
void write_diagnoses(std::span<const DiagnosisRecord> records, const std::filesystem::path &path);
std::map<std::int64_t, int> load_birth_years(const std::filesystem::path &path);

} // namespace wagepanel::health
