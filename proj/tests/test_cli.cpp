#include <doctest.h>

#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <json.hpp>

#include "support.hpp"
#include "wagepanel/cli.hpp"

namespace fs = std::filesystem;
using wagepanel::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Relative path -> contents for every file under `dir`.
std::map<std::string, std::string> snapshot(const fs::path &dir) {
  std::map<std::string, std::string> out;
  for (const auto &e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      out[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
    }
  }
  return out;
}

void write_population(const fs::path &p) {
  std::ofstream out(p);
  out << "gender,graduation_year,count\n";
  for (int g = 0; g < 2; ++g) {
    for (int y = 1987; y <= 1990; ++y) {
      out << g << ',' << y << ',' << 1000 + 100 * g + 37 * (y - 1987) << '\n';
    }
  }
}

} // namespace

TEST_CASE("version and usage errors") {
  const auto v = call({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("wagepanel " + wagepanel::cli::version()) == 0);
  CHECK(v.out.find("charlson_quan2005 fnv1a64:") != std::string::npos);

  const auto bogus = call({"simulate", "--bogus"});
  CHECK(bogus.code == 2);
  CHECK(bogus.err.find("usage error") == 0);
  CHECK(call({}).code == 2);
  CHECK(call({"frobnicate"}).code == 2);
  CHECK(call({"--threads", "0", "simulate"}).code == 2);
  CHECK(call({"weights"}).code == 2); // --population is required
}

TEST_CASE("missing inputs name the producing step") {
  const auto dir = testsupport::temp_dir("cli_missing");
  const auto akm = call({"akm", "--out-dir", dir.string()});
  CHECK(akm.code == 1);
  CHECK(akm.err.find("error: missing-input") == 0);
  CHECK(akm.err.find("simulate") != std::string::npos);

  CHECK(call({"simulate", "--out-dir", dir.string(), "--workers", "200", "--firms", "10"}).code == 0);
  const auto report = call({"report", "--out-dir", dir.string()});
  CHECK(report.code == 1);
  CHECK(report.err.find("akm") != std::string::npos);
}

TEST_CASE("invalid configuration is a validation error") {
  const auto dir = testsupport::temp_dir("cli_invalid");
  const auto r = call({"simulate", "--out-dir", dir.string(), "--firms", "1"});
  CHECK(r.code == 1);
  CHECK(r.err.find("error: invalid-config") == 0);
}

TEST_CASE("config file with command-line override") {
  const auto dir = testsupport::temp_dir("cli_config");
  {
    std::ofstream cfg(dir / "run.ini");
    cfg << "seed=7\n";
  }
  const std::string out = (dir / "run").string();
  CHECK(call({"--config", (dir / "run.ini").string(), "simulate", "--out-dir", out, "--workers", "50"}).code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "run" / "simulate.json"))["seed"] == 7);
  CHECK(call({"--config", (dir / "run.ini").string(), "--seed", "9", "simulate", "--out-dir", out, "--workers", "50"})
            .code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "run" / "simulate.json"))["seed"] == 9);
}

TEST_CASE("every subcommand reruns byte-identically") {
  const auto dir = testsupport::temp_dir("cli_pipeline");
  const std::string run_dir = (dir / "run").string();
  write_population(dir / "population.csv");
  const std::vector<std::string> common{"--out-dir", run_dir, "--seed", "3"};
  auto with = [&](std::vector<std::string> args, int threads) {
    args.insert(args.end(), common.begin(), common.end());
    args.push_back("--threads");
    args.push_back(std::to_string(threads));
    return args;
  };
  const std::vector<std::vector<std::string>> steps{
      {"simulate", "--workers", "800", "--firms", "25", "--years", "12", "--pgi-horizon-slope", "0.01"},
      {"connectivity"},
      {"akm"},
      {"cci"},
      {"trajectory", "--outcome", "log_income", "--max-horizon", "8"},
      {"trajectory", "--outcome", "firm_quality", "--max-horizon", "8"},
      {"trajectory", "--outcome", "cci", "--max-horizon", "8"},
      {"lifetime", "--horizon-cap", "8"},
      {"decompose", "--bootstrap", "20", "--max-horizon", "8"},
      {"weights", "--population", (dir / "population.csv").string()},
      {"report"},
  };
  for (const auto &step : steps) {
    CAPTURE(step[0]);
    const auto first = call(with(step, 1));
    REQUIRE_MESSAGE(first.code == 0, first.err);
    const auto before = snapshot(run_dir);
    for (int threads : {1, 3}) {
      const auto again = call(with(step, threads));
      REQUIRE(again.code == 0);
      CHECK(again.out == first.out);
      const auto after = snapshot(run_dir);
      REQUIRE(after.size() == before.size());
      for (const auto &[path, bytes] : before) {
        CHECK_MESSAGE(after.at(path) == bytes, step[0] << " changed " << path);
      }
    }
  }

  const fs::path run(run_dir);
  for (const char *f : {"panel.csv", "deflator.csv", "truth_workers.csv", "truth_firms.csv", "diagnoses.csv",
                        "akm/worker_effects.csv", "akm/firm_effects.csv", "akm/variance_decomposition.csv",
                        "akm/fit_report.json", "connectivity/components.csv", "trajectory/margins.csv",
                        "trajectory/fit_report.json", "lifetime/pv_income.csv", "lifetime/margins_pv.csv",
                        "decompose/decomposition.csv", "weights/weights.csv", "weights/balance.csv", "cci/cci.csv",
                        "figure_data/manifest.json"}) {
    CHECK_MESSAGE(fs::exists(run / f), f);
  }
  CHECK(slurp(run / "akm/worker_effects.csv").rfind("person_id,theta,theta_std", 0) == 0);
  CHECK(slurp(run / "akm/firm_effects.csv").rfind("firm_id,psi,psi_std", 0) == 0);
  CHECK(slurp(run / "trajectory/margins.csv").rfind("index,quantile,horizon,estimate,se,ci_lo,ci_hi", 0) == 0);
  CHECK(slurp(run / "lifetime/pv_income.csv").rfind("person_id,pv_income", 0) == 0);
  CHECK(slurp(run / "weights/weights.csv").rfind("person_id,weight", 0) == 0);
  CHECK(slurp(run / "decompose/decomposition.csv")
            .rfind("group,horizon,component,contribution,cumulative,ci_lo,ci_hi,share", 0) == 0);
  CHECK(slurp(run / "diagnoses.csv").rfind("person_id,event_year,icd_version,code", 0) == 0);

  const auto manifest = nlohmann::json::parse(slurp(run / "figure_data/manifest.json"));
  CHECK(manifest["version"] == wagepanel::cli::version());
  CHECK(manifest.contains("datasets"));
  for (const auto &d : manifest["datasets"]) {
    CHECK(fs::exists(run / d["path"].get<std::string>()));
  }

  const auto con = call(with({"connectivity"}, 1));
  CHECK(con.out.rfind("component,n_firms,n_workers,n_obs\n", 0) == 0);
}
