#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "acbc/model.hpp"
#include "acbc/synth.hpp"

namespace acbc {

inline constexpr int kConfigFormatVersion = 1;

struct BoxSpec {
  std::vector<double> lower, upper;
};

struct PlantSpec {
  int n = 0, m = 0;
  std::vector<std::string> dictionary;
  std::vector<std::vector<double>> A;
  BoxSpec state;
  std::vector<BoxSpec> initial, unsafe;
  std::vector<double> input_bounds;
};

/// eps values may be written as numbers or as "p/q" fractions.
struct AugmentationSpec {
  double eps1 = 1.0 / 1500.0;
  double eps2 = 1499.0 / 1500.0;
  InputBand input_band = InputBand::PerCoordinate;
};

struct ExperimentSpec {
  int samples = 0;  // 0: N + 1
  /// Empty: the virtual-input image of the augmented input range.
  BoxSpec excitation;
  std::uint64_t seed = 1;
  int richness_retries = 3;
};

enum class LevelMode { Optimized, Conservative };

struct SynthesisSpec {
  double varpi = 0.01;
  int grid_res = 21;
  std::int64_t ca_budget = 200000;
  bool sound = false;
  LevelMode levels = LevelMode::Optimized;
  NormKind norm = NormKind::Spectral;
  std::int64_t residual_checks = 1000;  // random points for the closed-loop identity
};

enum class ScenarioPath { None, Deterministic, Probabilistic };
enum class Coupling { Auto, Never, Always };

struct ScenarioSpec {
  ScenarioPath path = ScenarioPath::None;
  double epsilon = 0.01;
  double beta = 1e-10;
  std::int64_t samples = 0;  // 0: the sample bound
  int grid_per_axis = 51;
  int rounds = 3;
  std::uint64_t seed = 1;
  std::int64_t audit_samples = 100000;
  Coupling coupling = Coupling::Auto;
  double contraction_margin = 1e-6;
};

struct VerificationSpec {
  int grid_per_axis = 0;  // 0: 51 up to 3 dimensions, else 9
  std::int64_t samples = 1'000'000;
  std::int64_t level_samples = 10000;
  int runs = 1000;
  std::int64_t horizon = 0;  // 0: the certificate's horizon
  int record_runs = 1000;
  std::uint64_t seed = 1;
};

struct RunConfig {
  PlantSpec plant;
  AugmentationSpec augmentation;
  ExperimentSpec experiment;
  SynthesisSpec synthesis;
  ScenarioSpec scenario;
  VerificationSpec verification;
};

/// Throws Error(Config) on unknown keys, wrong types or missing plant data.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json config_to_json(const RunConfig& c);

/// Sets every seed (experiment, scenario, verification).
void override_seed(RunConfig& c, std::uint64_t seed);

/// Validated plant (dictionary parsed, regions and inputs checked).
PlantModel build_plant(const RunConfig& c);
AugmentedModel build_augmented(const RunConfig& c, const PlantModel& plant);

Box to_box(const BoxSpec& b);

}  // namespace acbc
