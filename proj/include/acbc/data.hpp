#pragma once

#include <cstdint>
#include <optional>
#include <ostream>

#include <Eigen/Dense>

#include "acbc/model.hpp"

namespace acbc {

/// One experiment: S = zeta(0..T-1), I = theta(0..T-1), S_plus = zeta(1..T).
struct TrajectoryData {
  Eigen::MatrixXd S;
  Eigen::MatrixXd I;
  Eigen::MatrixXd S_plus;
  int T = 0;
  std::uint64_t seed = 0;
};

struct DataMatrices {
  Eigen::MatrixXd M;  // N x T
  int rank = 0;
  double sigma_max = 0.0;
  double sigma_min = 0.0;  // smallest of the min(N, T) singular values
};

/// i.i.d. uniform excitation theta(k) in [lo, hi].
struct Excitation {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

/// The virtual-input image of the augmented input range.
Excitation default_excitation(const AugmentedModel& aug);

/// Simulates zeta+ = A_aug F(zeta) + B_aug theta for T steps. The initial
/// state defaults to a uniform draw from an augmented initial box picked
/// uniformly at random.
TrajectoryData collect_trajectory(const AugmentedModel& aug, int T,
                                  const Excitation& excitation, std::uint64_t seed,
                                  const std::optional<Eigen::VectorXd>& zeta0 = {});

/// M[i, k] = term_i(S[:, k]); rank by singular-value threshold
/// max(N, T) * sigma_max * 2^-52 * 16.
DataMatrices assemble_M(const TrajectoryData& traj, const Dictionary& aug_dict);

/// rank(M) == N and T >= N + 1.
bool check_richness(const DataMatrices& dm);

/// Rows k, zeta..., theta...; the final row holds zeta(T) with empty theta.
void write_trajectory_csv(std::ostream& os, const TrajectoryData& traj);

}  // namespace acbc
