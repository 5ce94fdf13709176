#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

#include "acbc/config.hpp"
#include "acbc/error.hpp"
#include "acbc/pipeline.hpp"
#include "case_studies.hpp"
#include "doctest.h"

using namespace acbc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kCase1 = ACBC_SOURCE_DIR "/configs/case_study_1.json";

json case1_json() {
  std::ifstream in(kCase1);
  return json::parse(in);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("acbc_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

json read(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

int run(const std::string& args) {
  const std::string cmd = std::string(ACBC_CLI) + " " + args + " > /dev/null 2>&1";
  const int s = std::system(cmd.c_str());
  return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

ErrorKind parse_kind(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("config accepted");
  return ErrorKind::Numerical;
}

}  // namespace

TEST_CASE("config: the shipped case 1 file builds the hand-written plant") {
  const RunConfig c = load_config(kCase1);
  const PlantModel p = build_plant(c);
  const PlantModel want = fixtures::case1_plant();
  CHECK((p.A.array() == want.A.array()).all());
  CHECK(p.dictionary.size() == want.dictionary.size());
  CHECK(c.augmentation.eps1 == 1.0 / 1500);
  CHECK(c.augmentation.eps2 == 1499.0 / 1500);
  const AugmentedModel a = build_augmented(c, p);
  const AugmentedModel b = augment(want, 1.0 / 1500, 1499.0 / 1500);
  CHECK((a.A_aug.array() == b.A_aug.array()).all());
  CHECK(a.unsafe_boxes.size() == b.unsafe_boxes.size());
}

TEST_CASE("config: round trip through JSON") {
  const RunConfig c = load_config(kCase1);
  const json j = config_to_json(c);
  CHECK(config_to_json(parse_config(j)) == j);
}

TEST_CASE("config: strict parsing") {
  json j = case1_json();
  j["synthesis"]["varpii"] = 0.1;
  CHECK(parse_kind(j) == ErrorKind::Config);
  j = case1_json();
  j["plant"]["A"][0].erase(0);
  CHECK(parse_kind(j) == ErrorKind::Config);
  j = case1_json();
  j["augmentation"]["eps1"] = "1/0";
  CHECK(parse_kind(j) == ErrorKind::Config);
  j = case1_json();
  j["scenario"]["path"] = "sometimes";
  CHECK(parse_kind(j) == ErrorKind::Config);
  j = case1_json();
  j["format_version"] = 99;
  CHECK(parse_kind(j) == ErrorKind::Config);
  j = case1_json();
  j.erase("plant");
  CHECK(parse_kind(j) == ErrorKind::Config);
  CHECK_THROWS_AS(load_config("/nonexistent/acbc.json"), Error);
}

TEST_CASE("config: seed override reaches every stage") {
  RunConfig c = load_config(kCase1);
  override_seed(c, 42);
  CHECK(c.experiment.seed == 42);
  CHECK(c.scenario.seed == 42);
  CHECK(c.verification.seed == 42);
}

TEST_CASE("certificate file round trip") {
  const RunConfig c = load_config(kCase1);
  const SynthesisRun r = run_synthesize(c);
  const json j = certificate_to_json(r.cert, r.ctrl, r.plant.dictionary);
  const auto [cert, ctrl] = certificate_from_json(json::parse(j.dump()), r.plant);
  CHECK((cert.P.array() == r.cert.P.array()).all());
  CHECK((ctrl.K.array() == r.ctrl.K.array()).all());
  CHECK(cert.eta == r.cert.eta);
  CHECK(cert.gamma == r.cert.gamma);
  CHECK(cert.c_a == r.cert.c_a);
  CHECK(cert.horizon == r.cert.horizon);
  json bad = j;
  bad["n"] = 3;
  CHECK_THROWS_AS(certificate_from_json(bad, r.plant), Error);
}

TEST_CASE("synthesis reports are identical across runs apart from timing") {
  const RunConfig c = load_config(kCase1);
  const json a = without_timing(run_synthesize(c).report);
  const json b = without_timing(run_synthesize(c).report);
  CHECK(a == b);
  CHECK_FALSE(a.contains("timing"));
}

TEST_CASE("cli: synthesize then verify") {
  const fs::path d = scratch("ok");
  CHECK(run("synthesize --config " + kCase1 + " --out " + d.string()) == kExitOk);
  REQUIRE(fs::exists(d / "certificate.json"));
  CHECK(fs::exists(d / "trajectory.csv"));
  const json rep = read(d / "synthesis_report.json");
  CHECK(rep["status"] == "ok");

  json cfg = case1_json();
  cfg["verification"]["runs"] = 50;
  cfg["verification"]["record_runs"] = 2;
  cfg["verification"]["grid_per_axis"] = 15;
  const fs::path vc = write(d, cfg);
  CHECK(run("verify --config " + vc.string() + " --certificate " + (d / "certificate.json").string() +
            " --out " + d.string()) == kExitOk);
  CHECK(read(d / "verification_report.json")["pass"] == true);
  CHECK(fs::exists(d / "heatmap.csv"));
  CHECK(run("simulate --config " + vc.string() + " --controller " +
            (d / "certificate.json").string() + " --runs 2 --out " + d.string()) == kExitOk);
  fs::remove_all(d);
}

TEST_CASE("cli: exit codes") {
  const fs::path d = scratch("codes");
  CHECK(run("") == kExitUsage);
  CHECK(run("synthesize") == kExitUsage);
  CHECK(run("synthesize --config " + kCase1 + " --bogus") == kExitUsage);

  json bad = case1_json();
  bad["synthesis"]["unknown"] = 1;
  CHECK(run("synthesize --config " + write(d, bad).string() + " --out " + d.string()) ==
        kExitConfig);
  const json err = read(d / "synthesize_error.json");
  CHECK(err["error"]["kind"] == "config");
  CHECK(err["exit_code"] == kExitConfig);

  // Exactly N samples can never be rich (N columns, N+1 needed).
  json thin = case1_json();
  thin["experiment"]["samples"] = 10;
  CHECK(run("synthesize --config " + write(d, thin).string() + " --out " + d.string()) ==
        kExitRichness);

  // A certificate whose P is blown up fails the decrement check.
  REQUIRE(run("synthesize --config " + kCase1 + " --out " + d.string()) == kExitOk);
  json cert = read(d / "certificate.json");
  for (auto& row : cert["P"])
    for (auto& v : row) v = v.get<double>() * 100;
  std::ofstream(d / "broken.json") << cert.dump();
  json quick = case1_json();
  quick["verification"]["runs"] = 10;
  quick["verification"]["grid_per_axis"] = 11;
  CHECK(run("verify --config " + write(d, quick).string() + " --certificate " +
            (d / "broken.json").string() + " --out " + d.string()) == kExitVerificationFailed);
  fs::remove_all(d);
}

TEST_CASE("exit code mapping") {
  CHECK(exit_code(ErrorKind::Io) == kExitUsage);
  CHECK(exit_code(ErrorKind::Config) == kExitConfig);
  CHECK(exit_code(ErrorKind::Syntax) == kExitConfig);
  CHECK(exit_code(ErrorKind::Richness) == kExitRichness);
  CHECK(exit_code(ErrorKind::Infeasible) == kExitInfeasible);
  CHECK(exit_code(ErrorKind::LevelSeparation) == kExitLevelSeparation);
  CHECK(exit_code(ErrorKind::Numerical) == kExitNumerical);
  CHECK(exit_code(ErrorKind::Domain) == kExitDomain);
}
