// Command-line front end: synthesize | scenario | verify | simulate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "acbc/pipeline.hpp"
#include "acbc/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "output directory (created if missing)");
  sub->add_option("--seed", c.seed, "overrides every seed in the config");
}

acbc::RunConfig load(const Common& c) {
  acbc::RunConfig cfg = acbc::load_config(c.config);
  if (c.seed) acbc::override_seed(cfg, *c.seed);
  return cfg;
}

fs::path prepare(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw acbc::Error(acbc::ErrorKind::Io, "cannot create '" + dir + "': " + ec.message());
  return fs::path(dir);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw acbc::Error(acbc::ErrorKind::Io, "cannot write '" + p.string() + "'");
  return os;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream os = open_out(p);
  os << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw acbc::Error(acbc::ErrorKind::Io, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw acbc::Error(acbc::ErrorKind::Config, "'" + path + "' is not valid JSON: " + e.what());
  }
}

int synthesis_command(const Common& c, bool scenario) {
  const acbc::RunConfig cfg = load(c);
  const fs::path out = prepare(c.out);
  acbc::SynthesisRun run = scenario ? acbc::run_scenario(cfg) : acbc::run_synthesize(cfg);
  {
    std::ofstream os = open_out(out / "trajectory.csv");
    acbc::write_trajectory_csv(os, run.traj);
  }
  write_json(out / "certificate.json",
             acbc::certificate_to_json(run.cert, run.ctrl, run.plant.dictionary));
  run.report["status"] = "ok";
  run.report["files"] = {{"certificate", "certificate.json"}, {"trajectory", "trajectory.csv"}};
  const char* name = scenario ? "scenario_report.json" : "synthesis_report.json";
  write_json(out / name, run.report);
  std::printf("horizon T = %s, eta = %.6g, gamma = %.6g, c_a = %.6g\n",
              run.cert.horizon.infinite ? "infinite"
                                        : std::to_string(run.cert.horizon.steps).c_str(),
              run.cert.eta, run.cert.gamma, run.cert.c_a);
  return acbc::kExitOk;
}

int verify_command(const Common& c, const std::string& cert_path) {
  const acbc::RunConfig cfg = load(c);
  const acbc::PlantModel plant = acbc::build_plant(cfg);
  const auto [cert, ctrl] = acbc::certificate_from_json(read_json(cert_path), plant);
  const fs::path out = prepare(c.out);
  acbc::VerificationRun v = acbc::run_verify(cfg, cert, ctrl);
  json files = {{"rollouts", "rollouts.csv"}};
  if (v.decrement.table.size() > 0) {
    std::ofstream os = open_out(out / "heatmap.csv");
    acbc::write_heatmap_csv(os, v.decrement);
    files["heatmap"] = "heatmap.csv";
  }
  {
    std::ofstream os = open_out(out / "rollouts.csv");
    acbc::write_rollout_csv(os, v.rollouts.trajectories);
  }
  v.report["status"] = v.pass ? "ok" : "failed";
  v.report["files"] = files;
  write_json(out / "verification_report.json", v.report);
  std::printf("decrement max = %.6g (%s), levels %s, rollouts: %d unsafe, %d input violations -> %s\n",
              v.decrement.max_value, v.decrement.sampled ? "sampled" : "grid",
              v.levels.ok() ? "ok" : "violated", v.rollouts.state_violations,
              v.rollouts.input_violations, v.pass ? "PASS" : "FAIL");
  return v.pass ? acbc::kExitOk : acbc::kExitVerificationFailed;
}

int simulate_command(const Common& c, const std::string& ctrl_path, std::int64_t steps, int runs) {
  const acbc::RunConfig cfg = load(c);
  const acbc::PlantModel plant = acbc::build_plant(cfg);
  const acbc::AugmentedModel aug = acbc::build_augmented(cfg, plant);
  const auto [cert, ctrl] = acbc::certificate_from_json(read_json(ctrl_path), plant);
  if (steps < 0) {
    if (cert.horizon.infinite) throw acbc::Error(acbc::ErrorKind::Config, "give --steps for an infinite horizon");
    steps = cert.horizon.steps;
  }
  const fs::path out = prepare(c.out);
  acbc::RolloutOptions ro;
  ro.record_runs = runs;
  const acbc::RolloutStats s =
      acbc::rollout(plant, aug, ctrl, steps, runs, acbc::substream_seed(cfg.verification.seed, 3), ro);
  std::ofstream os = open_out(out / "rollouts.csv");
  acbc::write_rollout_csv(os, s.trajectories);
  std::printf("%d runs of %lld steps written\n", runs, static_cast<long long>(steps));
  return acbc::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven augmented control barrier certificates"};
  app.require_subcommand(1);
  Common common;
  std::string cert_path;
  std::int64_t steps = -1;
  int runs = 1000;

  auto* syn = app.add_subcommand("synthesize", "certificate and controller from one trajectory");
  add_common(syn, common);
  auto* scn = app.add_subcommand("scenario", "certificate from the scenario program");
  add_common(scn, common);
  auto* ver = app.add_subcommand("verify", "check a certificate against the true model");
  add_common(ver, common);
  ver->add_option("--certificate", cert_path, "certificate.json")->required()->check(CLI::ExistingFile);
  auto* sim = app.add_subcommand("simulate", "export closed-loop rollouts");
  add_common(sim, common);
  sim->add_option("--controller", cert_path, "certificate.json holding the gain")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--steps", steps, "steps per run (default: certificate horizon)");
  sim->add_option("--runs", runs, "number of runs")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? acbc::kExitOk : acbc::kExitUsage;
  }

  std::string command;
  try {
    if (syn->parsed()) {
      command = "synthesize";
      return synthesis_command(common, false);
    }
    if (scn->parsed()) {
      command = "scenario";
      return synthesis_command(common, true);
    }
    if (ver->parsed()) {
      command = "verify";
      return verify_command(common, cert_path);
    }
    command = "simulate";
    return simulate_command(common, cert_path, steps, runs);
  } catch (const acbc::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", acbc::to_string(e.kind()), e.what());
    // Best effort: leave a machine-readable record next to the other outputs.
    try {
      const fs::path out = prepare(common.out);
      write_json(out / (command + "_error.json"),
                 {{"format_version", acbc::kReportFormatVersion},
                  {"command", command},
                  {"status", "error"},
                  {"error", {{"kind", acbc::to_string(e.kind())}, {"message", e.what()}}},
                  {"exit_code", acbc::exit_code(e.kind())}});
    } catch (...) {
    }
    return acbc::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return acbc::kExitNumerical;
  }
}
