#include <doctest.h>

#include <fstream>

#include "support.hpp"
#include "wagepanel/csv.hpp"
#include "wagepanel/error.hpp"

using namespace wagepanel;
using testsupport::make_panel;
using testsupport::rec;

namespace {

const char *kHeader = "person_id,year,birth_year,gender,firm_id,annual_earnings,months_worked,education_level,"
                      "education_field,institution_id,graduation_year,biobank,EA_PGI\n";

void write(const std::filesystem::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string kind_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const ValidationError &e) {
    return e.kind();
  }
  return "";
}

} // namespace

TEST_CASE("monthly earnings") {
  CHECK(*monthly_earnings(rec(1, 2000, 5, 24000, 12)) == doctest::Approx(2000));
  CHECK(*monthly_earnings(rec(1, 2000, 5, 9000, 4)) == doctest::Approx(2250));
  CHECK_FALSE(monthly_earnings(rec(1, 2000, std::nullopt, 0)).has_value());
}

TEST_CASE("main employer selection") {
  std::vector<EmploymentSpell> a{{1, 100, true}, {2, 300, true}};
  CHECK(*select_main_employer(a) == 2);
  std::vector<EmploymentSpell> tie{{9, 200, true}, {4, 200, true}};
  CHECK(*select_main_employer(tie) == 4);
  std::vector<EmploymentSpell> one{{3, 50, true}};
  CHECK(*select_main_employer(one) == 3);
  std::vector<EmploymentSpell> ended{{3, 500, false}, {7, 10, true}};
  CHECK(*select_main_employer(ended) == 7);
  CHECK_FALSE(select_main_employer({}).has_value());
}

TEST_CASE("panel invariants") {
  auto p = make_panel({rec(2, 2001, 1, 10), rec(1, 2001, 1, 10), rec(1, 2000, 1, 10)});
  REQUIRE(p.size() == 3);
  CHECK(p[0].person_id == 1);
  CHECK(p[0].year == 2000);
  CHECK(p.person_count() == 2);
  CHECK(kind_of([] { make_panel({rec(1, 2000, 1, 10), rec(1, 2000, 2, 10)}); }) == "duplicate-key");
  auto bad = rec(1, 2000, 1, 10);
  bad.months_worked = 0;
  CHECK(kind_of([&] { make_panel({bad}); }) == "invalid-value");
  auto negative = rec(1, 2000, 1, -5);
  CHECK(kind_of([&] { make_panel({negative}); }) == "invalid-value");
}

TEST_CASE("load_panel deflates and validates") {
  const auto dir = testsupport::temp_dir("core_load");
  write(dir / "deflator.csv", "year,deflator\n2004,1.0\n2005,2.0\n");
  write(dir / "panel.csv", std::string(kHeader) +
                               "1,2004,1970,0,10,1200,12,tertiary,101,3,1995,default,0.5\n"
                               "1,2005,1970,0,10,1000,12,tertiary,101,3,1995,default,0.5\n"
                               "2,2005,1975,1,,0,0,secondary,,,1994,default,\n");
  const auto p = load_panel(dir / "panel.csv", dir / "deflator.csv");
  REQUIRE(p.size() == 3);
  CHECK(p[0].annual_earnings == doctest::Approx(1200));
  CHECK(p[1].annual_earnings == doctest::Approx(500));
  CHECK_FALSE(p[2].firm_id.has_value());
  CHECK(std::isnan(p.index_value(2, p.index_position("EA_PGI"))));

  SUBCASE("round trip through write_panel") {
    write_panel(p, dir / "again.csv");
    const auto q = load_panel(dir / "again.csv", dir / "deflator.csv");
    REQUIRE(q.size() == p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(q[i].annual_earnings == doctest::Approx(p[i].annual_earnings).epsilon(1e-14));
    }
  }
  SUBCASE("identity deflator leaves earnings unchanged") {
    write(dir / "one.csv", "year,deflator\n2004,1\n2005,1\n");
    const auto q = load_panel(dir / "panel.csv", dir / "one.csv");
    CHECK(q[1].annual_earnings == 1000.0);
  }
  SUBCASE("duplicate rows are named") {
    write(dir / "dup.csv", std::string(kHeader) + "1,2004,1970,0,10,1200,12,tertiary,,,1995,default,0\n"
                                                  "1,2004,1970,0,11,1300,12,tertiary,,,1995,default,0\n");
    try {
      load_panel(dir / "dup.csv", dir / "deflator.csv");
      FAIL("expected an error");
    } catch (const ValidationError &e) {
      CHECK(e.kind() == "duplicate-key");
      CHECK(std::string(e.what()).find("rows 2 and 3") != std::string::npos);
    }
  }
  SUBCASE("non-numeric field") {
    write(dir / "nn.csv", std::string(kHeader) + "1,2004,1970,0,10,abc,12,tertiary,,,1995,default,0\n");
    CHECK(kind_of([&] { load_panel(dir / "nn.csv", dir / "deflator.csv"); }) == "non-numeric");
  }
  SUBCASE("missing column") {
    write(dir / "mc.csv", "person_id,year\n1,2004\n");
    CHECK(kind_of([&] { load_panel(dir / "mc.csv", dir / "deflator.csv"); }) == "missing-column");
  }
  SUBCASE("deflator gap") {
    write(dir / "gap.csv", "year,deflator\n2004,1\n2006,1\n");
    CHECK(kind_of([&] { load_deflator(dir / "gap.csv"); }) == "deflator-gap");
  }
}

TEST_CASE("akm filters") {
  std::vector<PersonYearRecord> rs;
  // Two firms with ten workers aged 30, earnings well above half the median.
  for (int w = 0; w < 20; ++w) {
    rs.push_back(rec(w + 1, 2000, w < 10 ? 1 : 2, 36000, 12, 1970));
  }
  const auto base = make_panel(rs);
  CHECK(apply_akm_filters(base, FilterSpec::akm_defaults()).size() == base.size());

  SUBCASE("age boundary") {
    auto young = rs;
    young[0].birth_year = 1981; // age 19
    const auto f = apply_akm_filters(make_panel(young), FilterSpec::akm_defaults());
    CHECK(f.size() == rs.size() - 1);
    for (const auto &r : f.records()) {
      CHECK(r.person_id != 1);
    }
  }
  SUBCASE("small firms are removed") {
    auto small = rs;
    for (int w = 4; w < 10; ++w) {
      small[static_cast<std::size_t>(w)].firm_id = 2;
    }
    const auto f = apply_akm_filters(make_panel(small), FilterSpec::akm_defaults());
    CHECK(f.size() == 16);
    for (const auto &r : f.records()) {
      CHECK(*r.firm_id == 2);
    }
  }
  SUBCASE("earnings floor and months") {
    auto low = rs;
    low[0].annual_earnings = 1000;
    low[11].months_worked = 3;
    low[11].annual_earnings = 9000;
    const auto f = apply_akm_filters(make_panel(low), FilterSpec::akm_defaults());
    CHECK(f.size() == rs.size() - 2);
  }
  SUBCASE("idempotent given fixed medians") {
    auto mixed = rs;
    mixed[3].annual_earnings = 2000;
    const auto p = make_panel(mixed);
    const auto med = yearly_median_monthly_earnings(p);
    const auto once = apply_akm_filters(p, FilterSpec::akm_defaults(), med);
    const auto twice = apply_akm_filters(once, FilterSpec::akm_defaults(), med);
    CHECK(once.size() == twice.size());
  }
  SUBCASE("empty result is not an error") {
    FilterSpec s;
    s.min_firm_size = 100;
    CHECK(apply_akm_filters(base, s).empty());
  }
}

TEST_CASE("trajectory filters") {
  const auto spec = FilterSpec::trajectory_defaults();
  // Secondary, last seen at 29: dropped. Tertiary, last seen at 29: kept.
  std::vector<PersonYearRecord> rs;
  for (int y = 1990; y <= 1999; ++y) {
    rs.push_back(rec(1, y, 1, 1000, 12, 1970, Education::secondary, 1990));
    rs.push_back(rec(2, y, 1, 1000, 12, 1970, Education::tertiary, 1990));
    rs.push_back(rec(3, y, y < 1993 ? std::nullopt : std::optional<std::int64_t>(1), 1000, 12, 1960,
                     Education::secondary, 1990));
  }
  rs.push_back(rec(2, 1989, 1, 1000, 12, 1970, Education::tertiary, 1990));
  const auto f = apply_trajectory_filters(make_panel(rs), spec);
  std::map<std::int64_t, int> per;
  for (const auto &r : f.records()) {
    ++per[r.person_id];
    CHECK(r.horizon() >= 0);
    CHECK(r.horizon() <= 25);
  }
  CHECK(per.count(1) == 0);
  CHECK(per[2] == 10);
  CHECK(per[3] == 10); // zero-income years retained
}

TEST_CASE("deflation commutes with filtering") {
  std::vector<PersonYearRecord> rs;
  for (int w = 0; w < 12; ++w) {
    rs.push_back(rec(w + 1, 2000, 1, 20000 + 1000 * w, 12));
    rs.push_back(rec(w + 1, 2001, 1, 21000 + 1000 * w, 12));
  }
  std::map<int, double> d{{2000, 1.0}, {2001, 1.25}};
  const Panel nominal(rs, {}, {}, d);
  const auto filtered_then = deflate(apply_trajectory_filters(nominal, FilterSpec::trajectory_defaults()));
  const auto then_filtered = apply_trajectory_filters(deflate(nominal), FilterSpec::trajectory_defaults());
  REQUIRE(filtered_then.size() == then_filtered.size());
  for (std::size_t i = 0; i < filtered_then.size(); ++i) {
    CHECK(filtered_then[i].annual_earnings == then_filtered[i].annual_earnings);
  }
}

TEST_CASE("csv parsing") {
  const auto t = csv::parse("# comment\na,b\r\n1,2\n\n3,4\n");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.line_numbers[1] == 5);
  CHECK(kind_of([] { csv::parse("a,b\n1\n"); }) == "field-count");
  CHECK(csv::format(0.1) == "0.1");
}
