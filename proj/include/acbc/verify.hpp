#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acbc/model.hpp"
#include "acbc/synth.hpp"

namespace acbc {

struct DecrementOptions {
  /// 0 picks 51 per axis up to 3 dimensions and 9 above.
  int grid_per_axis = 0;
  /// Full grids larger than this are replaced by `samples` seeded draws.
  std::int64_t max_grid_points = 10'000'000;
  std::int64_t samples = 1'000'000;
  std::uint64_t seed = 1;
  /// Keep the (zeta, value) table; only honoured on grids.
  bool keep_table = true;
};

struct DecrementResult {
  double max_value = 0.0;
  Eigen::VectorXd argmax;
  bool sampled = false;
  int grid_per_axis = 0;
  std::int64_t points = 0;
  std::int64_t domain_errors = 0;
  /// d+1 rows: zeta coordinates, then the decrement value. Empty when sampled.
  Eigen::MatrixXd table;
};

/// B(A_aug F(zeta) + B_aug K F(zeta)) - B(zeta) - c_a over the augmented
/// state box.
double decrement_value(const AugmentedModel& aug, const Certificate& cert,
                       const DynamicController& ctrl, const Eigen::VectorXd& zeta);

DecrementResult check_decrement(const AugmentedModel& aug, const Certificate& cert,
                                const DynamicController& ctrl,
                                const DecrementOptions& opts = {});

/// zeta1..zetad,value with full round-trip precision.
void write_heatmap_csv(std::ostream& os, const DecrementResult& r);

struct LevelCheck {
  bool initial_ok = false;  // B <= eta + 1e-9 on the initial set
  bool unsafe_ok = false;   // B >= gamma - 1e-9 on the unsafe set
  double max_initial = 0.0;
  double min_unsafe = 0.0;
  std::int64_t points = 0;

  bool ok() const { return initial_ok && unsafe_ok; }
};

/// Samples n_samples points per box. Box vertices (up to 2^12 per box) and
/// the point of each box nearest the origin are always included.
LevelCheck check_levels(const Certificate& cert, const BoxUnion& initial,
                        const BoxUnion& unsafe, std::int64_t n_samples, std::uint64_t seed);

struct RolloutOptions {
  /// Number of runs whose trajectories are kept (from run 0 upward).
  int record_runs = 0;
  /// Enables the per-step check B(zeta(k)) <= eta + k c_a.
  const Certificate* certificate = nullptr;
};

struct Trajectory {
  int run = 0;
  Eigen::MatrixXd x;  // n x (steps+1)
  Eigen::MatrixXd u;  // m x (steps+1)
};

struct RolloutStats {
  int runs = 0;
  std::int64_t horizon = 0;
  int state_violations = 0;  // runs that touch the closed unsafe set
  int input_violations = 0;  // runs with some C_j^T u > 1
  int domain_errors = 0;
  /// Certificate checks (zero unless a certificate is given).
  int bound_violations = 0;  // runs with B(zeta(k)) > eta + k c_a + slack
  int level_crossings = 0;   // runs with B(zeta(k)) >= gamma for some k < T
  double max_bound_excess = -std::numeric_limits<double>::infinity();
  std::vector<Trajectory> trajectories;
};

/// Per-step slack in the barrier bound check, relative to 1 + eta + k c_a.
inline constexpr double kBoundSlack = 1e-6;

/// Simulates x+ = A f(x,u), u+ = K f(x,u) for T steps per run. Run r draws
/// x(0) uniformly from a plant initial box and u(0) uniformly from the
/// input part of the augmented initial box, using substream r of the seed.
RolloutStats rollout(const PlantModel& plant, const AugmentedModel& aug,
                     const DynamicController& ctrl, std::int64_t T, int n_runs,
                     std::uint64_t seed, const RolloutOptions& opts = {});

/// run,k,x1..xn,u1..um
void write_rollout_csv(std::ostream& os, const std::vector<Trajectory>& runs);

}  // namespace acbc
