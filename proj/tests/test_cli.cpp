#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "basic/cli.hpp"
#include "doctest.h"

using namespace basic;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "basic");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "basic_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const fs::path kGolden = fs::path(BASIC_SOURCE_DIR) / "tests" / "golden";
const char* kOutputs[] = {"marginal_probs.tsv", "q_posterior.tsv", "theta_posterior.tsv", "map_changepoints.tsv"};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help and version exit cleanly") {
    auto r = cli({"--help"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("run") != std::string::npos);
    CHECK(cli({"run", "--help"}).code == kExitOk);
    auto v = cli({"--version"});
    CHECK(v.code == kExitOk);
    CHECK(v.out.find(kVersion) != std::string::npos);
  }

  TEST_CASE("usage errors exit 1") {
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"frobnicate"}).code == kExitUsage);
    CHECK(cli({"run", "--bogus"}).code == kExitUsage);
    auto dir = scratch("usage");
    auto data = (kGolden / "sim.csv").string();
    CHECK(cli({"run", "--input", data, "--out-dir", dir.string(), "--burnin", "5", "--mcem-schedule", "3,9"}).code ==
          kExitUsage);
    CHECK(cli({"run", "--input", data, "--out-dir", dir.string(), "--eta", "1,2"}).code == kExitUsage);
    CHECK(cli({"run", "--input", data, "--out-dir", dir.string(), "--dictionary", "point:2"}).code == kExitUsage);
    CHECK(cli({"run", "--input", (dir / "missing.csv").string(), "--out-dir", dir.string()}).code == kExitUsage);
  }

  TEST_CASE("data errors exit 2 with a positioned message") {
    auto dir = scratch("data");
    std::ofstream(dir / "bad.csv") << "0,1,1\n0,2,1\n";
    auto r = cli({"run", "--input", (dir / "bad.csv").string(), "--model", "bernoulli", "--out-dir",
                  (dir / "out").string()});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("bernoulli") != std::string::npos);
    std::ofstream(dir / "ragged.csv") << "1,2,3\n4,5\n";
    auto g = cli({"run", "--input", (dir / "ragged.csv").string(), "--out-dir", (dir / "out").string()});
    CHECK(g.code == kExitData);
    CHECK(g.err.find("line 2") != std::string::npos);
  }

  TEST_CASE("simulate reproduces the fixture") {
    auto dir = scratch("simulate");
    auto r = cli({"simulate", "--seed", "1", "--out", (dir / "sim.csv").string(), "--truth",
                  (dir / "truth.csv").string()});
    REQUIRE(r.code == kExitOk);
    CHECK(slurp(dir / "sim.csv") == slurp(kGolden / "sim.csv"));
    CHECK(fs::exists(dir / "truth.csv"));
  }

  TEST_CASE("run matches the golden outputs and is deterministic") {
    auto dir = scratch("run");
    std::vector<std::string> args{"run",     "--input",   (kGolden / "sim.csv").string(), "--out-dir",
                                  (dir / "out").string(), "--seed", "2", "--burnin", "50", "--samples", "50"};
    REQUIRE(cli(args).code == kExitOk);
    std::map<std::string, std::string> first;
    for (const char* f : kOutputs) {
      first[f] = slurp(dir / "out" / f);
      CHECK_MESSAGE(first[f] == slurp(kGolden / "run" / f), f);
    }
    first["manifest.json"] = slurp(dir / "out" / "manifest.json");
    REQUIRE(cli(args).code == kExitOk);
    for (auto& [f, text] : first) CHECK_MESSAGE(slurp(dir / "out" / f) == text, f);
  }

  TEST_CASE("raw precision and multiple chains") {
    auto dir = scratch("raw");
    auto r = cli({"run", "--input", (kGolden / "sim.csv").string(), "--out-dir", (dir / "out").string(), "--burnin",
                  "10", "--samples", "10", "--chains", "2", "--raw", "--mcem-schedule", "none", "--block-size", "0"});
    REQUIRE(r.code == kExitOk);
    auto manifest = slurp(dir / "out" / "manifest.json");
    CHECK(manifest.find("\"chains\": 2") != std::string::npos);
    CHECK(manifest.find("pooled") != std::string::npos);
    CHECK(manifest.find("timings") == std::string::npos);
  }

  TEST_CASE("oracle subcommand agrees with enumeration") {
    auto dir = scratch("oracle");
    std::ofstream(dir / "tiny.csv") << "0.1,-0.4,2.2,2.5\n-0.3,0.2,1.9,2.4\n";
    auto r = cli({"oracle", "--input", (dir / "tiny.csv").string(), "--eta", "0,0.2,1", "--dictionary",
                  "0,0.25,0.5", "--weights", "0.6,0.3,0.1", "--seed", "3"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("max_abs_marginal_diff") != std::string::npos);
    CHECK(r.out.find("PASS") != std::string::npos);
  }

  TEST_CASE("map-only and summarize") {
    auto dir = scratch("map");
    auto r = cli({"map-only", "--input", (kGolden / "sim.csv").string(), "--out-dir", (dir / "out").string(),
                  "--eta", "0,0.2,1", "--dictionary", "0,0.2222222222222222", "--weights", "0.9,0.1"});
    REQUIRE(r.code == kExitOk);
    CHECK(fs::exists(dir / "out" / "map_changepoints.tsv"));
    auto s = cli({"summarize", "--run-dir", (dir / "out").string()});
    CHECK(s.code == kExitOk);
    CHECK_FALSE(s.out.empty());
    CHECK(cli({"summarize", "--run-dir", (dir / "nowhere").string()}).code != kExitOk);
  }
}
