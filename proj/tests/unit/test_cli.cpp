#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "drift/cli.hpp"
#include "drift/config.hpp"

using namespace drift;
namespace fs = std::filesystem;

namespace {

std::string model(const std::string& name) {
  return std::string(DRIFT_SOURCE_DIR) + "/models/" + name + ".toml";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("drift_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

int run(std::vector<std::string> args) {
  std::ostringstream out, err;
  return run_cli(args, out, err);
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream f(p);
  return nlohmann::json::parse(f);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("verify exit codes") {
  const fs::path dir = scratch("verify");
  CHECK(run({"verify", model("two_harmonic"), "--out", dir.string()}) == kExitPass);
  const auto j = read_json(dir / "verify.json");
  CHECK(j["schema"] == "drift.verify/1");
  CHECK(j["pass"] == true);
  CHECK(fs::exists(dir / "branch.csv"));

  std::ostringstream out, err;
  CHECK(run_cli({"verify", model("unperturbed"), "--out", dir.string()}, out, err) ==
        kExitHypothesisFail);
  CHECK(out.str().find("H3a: no nondegenerate critical points") != std::string::npos);
  CHECK(run({"verify", model("single_harmonic"), "--out", dir.string()}) == kExitHypothesisFail);
  CHECK(run({"verify", "/nonexistent/model.toml", "--out", dir.string()}) == kExitUsage);
  CHECK(run({"verify", model("two_harmonic"), "--quad-tol", "-1", "--out", dir.string()}) ==
        kExitUsage);
  CHECK(run({"verify", model("two_harmonic"), "--I", "1", "2", "--out", dir.string()}) ==
        kExitUsage);
  CHECK(run({"frobnicate"}) == kExitUsage);
  CHECK(run({}) == kExitUsage);
}

TEST_CASE("verify reports are byte-identical across runs") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run({"verify", model("two_harmonic"), "--out", a.string()});
  run({"verify", model("two_harmonic"), "--out", b.string()});
  CHECK(slurp(a / "verify.json") == slurp(b / "verify.json"));
  CHECK(slurp(a / "branch.csv") == slurp(b / "branch.csv"));
}

TEST_CASE("repair writes a certificate and a model that verifies") {
  const fs::path dir = scratch("repair");
  CHECK(run({"repair", model("unperturbed"), "--budget", "0.1", "--out", dir.string()}) ==
        kExitPass);
  const auto j = read_json(dir / "certificate.json");
  CHECK(j["schema"] == "drift.repair/1");
  CHECK(j["certificate"]["noop"] == false);
  CHECK(j["certificate"]["added_amplitude"].get<double>() < 0.1);
  CHECK(j["certificate"]["post_verification"]["h3a"]["pass"] == true);
  const fs::path v = scratch("repair_verify");
  CHECK(run({"verify", (dir / "repaired_model.toml").string(), "--out", v.string()}) == kExitPass);

  CHECK(run({"repair", model("two_harmonic"), "--phi", "1.5707963267948966", "--budget", "0.1",
             "--out", dir.string()}) == kExitPass);
  CHECK(read_json(dir / "certificate.json")["certificate"]["noop"] == true);
  CHECK(run({"repair", model("unperturbed"), "--budget", "0", "--out", dir.string()}) == kExitUsage);
  CHECK(run({"repair", model("unperturbed"), "--out", dir.string()}) == kExitUsage);
}

TEST_CASE("scan, diffuse and separatrix") {
  const fs::path dir = scratch("misc");
  CHECK(run({"scan", model("two_harmonic"), "--tau-points", "8", "--s-points", "4", "--out",
             dir.string()}) == kExitPass);
  const auto j = read_json(dir / "scan.json");
  CHECK(j["points"] == 32);
  CHECK(j["shift_identity"]["max_discrepancy"].get<double>() < 1e-8);
  CHECK(run({"scan", model("two_harmonic"), "--tau-points", "0", "--out", dir.string()}) ==
        kExitUsage);

  CHECK(run({"diffuse", model("two_harmonic"), "--eps", "0", "--out", dir.string()}) == kExitUsage);
  CHECK(run({"diffuse", model("two_harmonic"), "--eps", "0.01", "--t-end", "5", "--out",
             dir.string()}) == kExitPass);
  const auto d = read_json(dir / "diffuse.json");
  CHECK(d["schema"] == "drift.diffuse/1");
  CHECK(d["trajectory"]["complete"] == true);
  CHECK(slurp(dir / "trajectory.csv").rfind("t,p1,q1,I1,phi1\n", 0) == 0);

  CHECK(run({"separatrix", model("two_harmonic"), "--out", dir.string()}) == kExitPass);
  CHECK(read_json(dir / "separatrix.json")["separatrices"][0]["lambda"].get<double>() ==
        doctest::Approx(1.0));
  CHECK(fs::exists(dir / "separatrix_1.csv"));
}

TEST_CASE("bundled models parse and round-trip") {
  for (const char* name : {"two_harmonic", "single_harmonic", "unperturbed"}) {
    const SystemSpec spec = load_model(model(name));
    const SystemSpec again = parse_model(format_model(spec));
    CHECK(format_model(again) == format_model(spec));
  }
}
