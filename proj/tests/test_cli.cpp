#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

using namespace vcins;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string config(const std::string& name) {
  const char* dir = std::getenv("VC_SCENARIOS");
  return (fs::path(dir ? dir : "scenarios") / name).string();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "vcins_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "vcins_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("solve writes the two-point schedule") {
  const auto out = scratch("bernoulli.csv");
  const auto r = invoke({"solve", "--config", config("bernoulli_two_point.json"), "--out", out.string(), "--quiet"});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  const auto rows = csv(slurp(out));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][0] == "x");
  CHECK(std::stod(rows[2][1]) == Catch::Approx(4.0).margin(1e-10));
  CHECK(rows[2][5] == "nan");
  const auto j = json::parse(slurp(out.string() + ".json"));
  CHECK(j["regime"] == "two-point");
  CHECK(j["pay"].get<double>() == Catch::Approx(4.0).margin(1e-10));
  CHECK(j["incentive_compatible"] == true);
}

TEST_CASE("slack config returns the Arrow deductible") {
  const auto out = scratch("slack.csv");
  REQUIRE(invoke({"solve", "--config", config("slack_stop_loss.json"), "--out", out.string()}).code == 0);
  const auto j = json::parse(slurp(out.string() + ".json"));
  CHECK(j["regime"] == "slack-stop-loss");
  CHECK(j["deductible"].get<double>() == j["d_star"].get<double>());
  CHECK(j["beta"].get<double>() == 0.0);
}

TEST_CASE("certify agrees with the oracle") {
  const auto out = scratch("certify.json");
  const auto r = invoke({"certify", "--config", config("interior_loaded.json"), "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("sup-norm gap") != std::string::npos);
  const auto j = json::parse(slurp(out));
  CHECK(j["agreement"] == true);
  CHECK(j["kkt"]["passed"] == true);
  CHECK(j["oracle"]["converged"] == true);
}

TEST_CASE("comparison commands") {
  const auto out = scratch("cmp.json");
  REQUIRE(invoke({"compare-wealth", "--config", config("compare_wealth.json"), "--out", out.string()}).code == 0);
  auto j = json::parse(slurp(out));
  CHECK(j["all_passed"] == true);
  CHECK(j["exposure_crossings"]["count"] == 2);
  REQUIRE(invoke({"compare-variance", "--config", config("compare_variance.json"), "--out", out.string()}).code == 0);
  j = json::parse(slurp(out));
  CHECK(j["all_passed"] == true);
  CHECK(j["convex_verdict"] == true);
  // A wealth comparison needs a {w1, w2} block.
  const auto r = invoke({"compare-wealth", "--config", config("compare_variance.json"), "--out", out.string()});
  CHECK(r.code == cli::kValidation);
}

TEST_CASE("sweep output does not depend on the thread count") {
  const auto a = scratch("sweep1.csv");
  const auto b = scratch("sweep4.csv");
  ::setenv("VC_THREADS", "1", 1);
  REQUIRE(invoke({"sweep", "--config", config("sweep_loading.json"), "--out", a.string()}).code == 0);
  ::setenv("VC_THREADS", "4", 1);
  REQUIRE(invoke({"sweep", "--config", config("sweep_loading.json"), "--out", b.string()}).code == 0);
  ::unsetenv("VC_THREADS");
  CHECK(slurp(a) == slurp(b));

  const auto meta = json::parse(slurp(a.string() + ".meta.json"));
  const auto sc = parse_scenario(meta["scenario"]);
  CHECK(sc == load_scenario(config("sweep_loading.json")));
  const auto rows = csv(slurp(a));
  const std::size_t per = meta["rows_per_value"].get<std::size_t>();
  CHECK(rows.size() == 1 + per * sc.sweep->values.size());
  CHECK(rows[1][0] == "rho");
  CHECK(rows[1][2] == "interior-fair");
  CHECK(rows[1 + per][2] == "interior-loaded");
  CHECK(rows.back()[2] == "slack-stop-loss");
}

TEST_CASE("grid override") {
  const auto out = scratch("coarse.csv");
  REQUIRE(invoke({"solve", "--config", config("interior_fair.json"), "--out", out.string(), "--grid-n", "51"}).code == 0);
  CHECK(csv(slurp(out)).size() == 52);
}

TEST_CASE("errors map to exit codes") {
  const auto out = scratch("err.csv");
  CHECK(invoke({"solve"}).code == cli::kUsage);
  CHECK(invoke({"explode", "--config", "x", "--out", "y"}).code == cli::kUsage);
  auto r = invoke({"solve", "--config", "/nonexistent.json", "--out", out.string()});
  CHECK(r.code == cli::kIo);
  CHECK(json::parse(r.err)["error"]["category"] == "io");

  const auto bad = scratch("bad.json");
  std::ofstream(bad) << R"({"loss": {"type": "uniform", "support_max": -1}, "utility": {"type": "log"}, "nu": 1})";
  r = invoke({"solve", "--config", bad.string(), "--out", out.string()});
  CHECK(r.code == cli::kValidation);
  CHECK(json::parse(r.err)["error"]["problems"].size() >= 2);

  const auto cara = scratch("cara_wealth.json");
  std::ofstream(cara) << R"({"loss": {"type": "uniform", "support_max": 10}, "utility": {"type": "cara", "a": 0.2},
                            "w0": 20, "nu": 1, "compare": {"w1": 20, "w2": 21}})";
  CHECK(invoke({"compare-wealth", "--config", cara.string(), "--out", out.string()}).code == cli::kPrecondition);

  const auto disc = scratch("discrete_interior.json");
  std::ofstream(disc) << R"({"loss": {"type": "discrete", "atoms": [[0, 0.2], [1, 0.3], [4, 0.5]]},
                            "utility": {"type": "log"}, "w0": 10, "nu": 0.5})";
  r = invoke({"solve", "--config", disc.string(), "--out", out.string()});
  CHECK(r.code == cli::kUnsupported);
}
