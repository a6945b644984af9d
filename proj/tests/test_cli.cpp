#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoxray/cli.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "geoxray");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return geoxray::cli::run(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("geoxray_cli_" + tag);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("unknown subcommands and bad configs exit with usage code 1") {
  CHECK(run_cli({"bogus"}) == 1);
  CHECK(run_cli({}) == 1);
  const fs::path out = fresh_dir("badmetric");
  CHECK(run_cli({"certify", "--metric", "kind:nosuch",
                 "--out", out.string()}) == 1);
}

TEST_CASE("certify passes on the flat disk and writes a full report") {
  const fs::path out = fresh_dir("certify");
  CHECK(run_cli({"certify", "--metric", "kind:euclidean",
                 "--out", out.string()}) == 0);
  const nlohmann::json rep = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(rep["passed"].get<bool>());
  CHECK(rep["simplicity"]["convex"].get<bool>());
  CHECK(rep["simplicity"]["nontrapping"].get<bool>());
  CHECK(rep["simplicity"]["no_conjugate"].get<bool>());
  // The config echo must be sufficient to repeat the run.
  CHECK(rep["config"]["command"] == "certify");
  CHECK(rep["config"]["metric"] == "kind:euclidean");
}

TEST_CASE("certify flags a strong conformal factor with exit code 2") {
  const fs::path out = fresh_dir("certify_bad");
  CHECK(run_cli({"certify", "--metric", "kind:conformal,c=3.0",
                 "--out", out.string()}) == 2);
  const nlohmann::json rep = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK_FALSE(rep["passed"].get<bool>());
  CHECK_FALSE(rep["simplicity"]["no_conjugate"].get<bool>());
}

TEST_CASE("metric specs load from JSON files") {
  const fs::path out = fresh_dir("json_metric");
  fs::create_directories(out);
  const fs::path spec = out / "metric.json";
  {
    std::ofstream f(spec);
    f << R"({"kind": "conformal", "params": {"c": 0.1}})";
  }
  CHECK(run_cli({"certify", "--metric", spec.string(),
                 "--out", (out / "run").string()}) == 0);
}

TEST_CASE("identity transport reports a refining residual table") {
  const fs::path out = fresh_dir("transport");
  CHECK(run_cli({"identity", "transport", "--metric", "kind:conformal,c=0.1",
                 "--refine", "2", "--plots", "--out", out.string()}) == 0);
  const nlohmann::json rep = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(rep["identity"]["min_ratio"].get<double>() >= 1.8);
  CHECK(fs::exists(out / "refinement.csv"));
  CHECK(fs::exists(out / "refinement.svg"));
  // Two table rows plus a header line.
  std::istringstream csv(slurp(out / "refinement.csv"));
  int lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  CHECK(lines == 3);
}

TEST_CASE("repeated runs with one config produce byte-identical CSVs") {
  const fs::path o1 = fresh_dir("det1"), o2 = fresh_dir("det2");
  CHECK(run_cli({"scatter", "--metric", "kind:conformal,c=0.1", "--nbeta",
                 "16", "--nalpha", "8", "--out", o1.string()}) == 0);
  CHECK(run_cli({"scatter", "--metric", "kind:conformal,c=0.1", "--nbeta",
                 "16", "--nalpha", "8", "--out", o2.string()}) == 0);
  CHECK(slurp(o1 / "scatter.csv") == slurp(o2 / "scatter.csv"));
  CHECK(slurp(o1 / "scatter.csv").size() > 100);
}

TEST_CASE("dn run checks the flat-disk spectrum") {
  const fs::path out = fresh_dir("dn");
  CHECK(run_cli({"dn", "--metric", "kind:euclidean", "--modes", "4",
                 "--out", out.string()}) == 0);
  const nlohmann::json rep = nlohmann::json::parse(slurp(out / "report.json"));
  bool found = false;
  for (const auto& c : rep["checks"])
    if (c["name"] == "dn_spectrum_matches_reference") {
      found = true;
      CHECK(c["passed"].get<bool>());
      CHECK(c["value"].get<double>() < 1e-2);
    }
  CHECK(found);
}
