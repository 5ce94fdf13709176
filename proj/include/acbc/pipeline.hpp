#pragma once

#include <string>
#include <utility>

#include "json.hpp"

#include "acbc/config.hpp"
#include "acbc/data.hpp"
#include "acbc/error.hpp"
#include "acbc/model.hpp"
#include "acbc/synth.hpp"
#include "acbc/verify.hpp"

namespace acbc {

inline constexpr int kReportFormatVersion = 1;
inline constexpr int kCertificateFormatVersion = 1;

/// Exit codes of the command-line tool. A stable contract, see docs/.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,  // bad arguments or file I/O
  kExitConfig = 2,
  kExitRichness = 3,
  kExitInfeasible = 4,
  kExitLevelSeparation = 5,
  kExitNumerical = 6,
  kExitVerificationFailed = 7,
  kExitDomain = 8,
};

int exit_code(ErrorKind kind);

struct SynthesisRun {
  PlantModel plant;
  AugmentedModel aug;
  TrajectoryData traj;
  DataMatrices dm;
  Eigen::MatrixXd Z1, Z2;
  Certificate cert;
  DynamicController ctrl;
  /// Everything except wall-clock numbers lives outside report["timing"].
  nlohmann::json report;
};

/// Data-driven synthesis: collect, richness check (with retries), Z2, barrier
/// LMI, decay constant, levels, horizon, controller.
SynthesisRun run_synthesize(const RunConfig& c);

/// Scenario route: Z2, then (P, c_a) from the configured scenario program,
/// then Y for Pi = P^-1. Throws Error(Infeasible) when no data-consistent Y
/// exists for the scenario P.
SynthesisRun run_scenario(const RunConfig& c);

struct VerificationRun {
  bool pass = false;
  DecrementResult decrement;
  LevelCheck levels;
  RolloutStats rollouts;
  nlohmann::json report;
};

/// Decrement check, level check and rollouts against the true model.
VerificationRun run_verify(const RunConfig& c, const Certificate& cert,
                           const DynamicController& ctrl);

/// Certificate file: P, levels, decay, horizon and the controller gain.
nlohmann::json certificate_to_json(const Certificate& cert, const DynamicController& ctrl,
                                   const Dictionary& plant_dict);
/// Throws Error(Config) when the file does not match the plant.
std::pair<Certificate, DynamicController> certificate_from_json(const nlohmann::json& j,
                                                                const PlantModel& plant);

/// Copy without the "timing" member.
nlohmann::json without_timing(nlohmann::json report);

/// max over `count` uniform points of the closed-loop identity residual,
/// relative to |A_aug F + B_aug K F| + 1.
double max_relative_closed_loop_residual(const AugmentedModel& aug, const DynamicController& ctrl,
                                         const Eigen::MatrixXd& S_plus,
                                         const Eigen::MatrixXd& Z1, const Eigen::MatrixXd& Z2,
                                         std::int64_t count, std::uint64_t seed);

}  // namespace acbc
