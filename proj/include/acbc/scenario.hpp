#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "acbc/model.hpp"
#include "acbc/sdp.hpp"

namespace acbc {

/// Uniform grid over a box. points is d x K; delta = |h| / 2 is the covering
/// radius (largest distance from a box point to the nearest grid point).
struct GridSamples {
  std::vector<int> counts;
  Eigen::MatrixXd points;
  Eigen::VectorXd h;
  double delta = 0.0;
};

inline constexpr double kMaxGridPoints = 1e7;

/// counts[i] >= 2 on every axis of positive width; a flat axis needs 1.
GridSamples grid_samples(const Box& box, const std::vector<int>& counts);

/// Uniform i.i.d. samples over the box (d x count).
Eigen::MatrixXd uniform_samples(const Box& box, std::int64_t count, std::uint64_t seed);

enum class ScpMode { WithMu, CaOnly };

/// Scale floor P >= kScpFloor I. The program is homogeneous in (P, c_a, mu),
/// so any positive floor gives the same certificate up to scale.
inline constexpr double kScpFloor = 1.0;

/// Relative gap at which a stalled but feasible SCP solve is still accepted.
inline constexpr double kScpGapTol = 1e-5;

/// Per-sample residual images v_d = G Psi(zeta_d), stored column-wise.
Eigen::MatrixXd residual_images(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& G,
                                const AugmentedModel& aug);

/// Extra convex constraint P/(1+varpi) - A_cl^T P A_cl >= margin I that keeps
/// Pi = P^{-1} compatible with a known data-based closed loop A_cl = S+ Z1.
struct Contraction {
  Eigen::MatrixXd A_cl;
  double margin = 1e-6;
};

struct ScpSpec {
  ScpMode mode = ScpMode::CaOnly;
  double varpi = 0.01;
  /// with_mu only: the optimal set is a ray along (c_a, mu) = (c + t, mu - t),
  /// bounded here by mu >= -mu_cap.
  double mu_cap = 1e3;
  /// Tie-break: adds trace_weight * tr(P) to the objective. Without it the
  /// optimum is not unique whenever some direction of P never meets a
  /// residual image, and the returned P is then arbitrary in that direction.
  double trace_weight = 1e-6;
  std::optional<Contraction> contraction;
};

/// Variables: P (upper triangle, row-major), c_a, then mu (with_mu only).
sdp::SdpProblem build_scp_problem(const Eigen::MatrixXd& images, int dim, const ScpSpec& spec);

struct ScpResult {
  Eigen::MatrixXd P;
  double c_a = 0.0;
  double mu = 0.0;
  /// max_d (1+1/varpi) v_d^T P v_d, the smallest c_a + mu the samples allow.
  double value = 0.0;
  double max_violation = 0.0;  // max_d g(zeta_d) - c_a - mu
  std::int64_t samples = 0;
  sdp::SdpSolution solution;
};

/// In with_mu mode the optimum is only fixed up to the ray c_a + mu = value;
/// the result is its mu = 0 end (solve_deterministic moves along it).
/// Throws Error(Infeasible / Numerical) on solver failure and
/// Error(InvalidArgument) on an empty sample set.
ScpResult solve_scp(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& G,
                    const AugmentedModel& aug, const ScpSpec& spec);

/// g(zeta) = (1+1/varpi) Psi^T G^T P G Psi.
double scp_objective(const Eigen::MatrixXd& P, const Eigen::MatrixXd& G,
                     const AugmentedModel& aug, double varpi, const Eigen::VectorXd& zeta);

/// 1.1 x the largest central-difference gradient norm of g over the points
/// (step 1e-6 x box width per axis). Heuristic, not a certified bound.
double lipschitz_estimate(const Eigen::MatrixXd& P, const Eigen::MatrixXd& G,
                          const AugmentedModel& aug, double varpi, const Box& box,
                          const Eigen::MatrixXd& points);

/// mu + L delta <= 0.
bool deterministic_check(double mu, double lipschitz, double delta);

/// ceil((2/eps)(ln(1/beta) + dim(dim+1)/2 + 1)).
std::int64_t sample_count(double epsilon, double beta, int dim);

struct DeterministicOptions {
  int grid_per_axis = 51;
  int rounds = 3;
  /// Largest mu magnitude accepted when placing the certificate on the
  /// optimal ray, as a multiple of the SCP value.
  double max_inflation = 1.0;
  std::optional<Contraction> contraction;
};

struct DeterministicResult {
  ScpResult scp;
  double lipschitz = 0.0;
  double delta = 0.0;
  int grid_per_axis = 0;
  int rounds_used = 0;
  bool passed = false;
};

/// Grid SCP, Lipschitz estimate and check; on failure the per-axis grid
/// resolution doubles (2c - 1 points, keeping the old ones) and the SCP is
/// re-solved, up to `rounds` rounds. On the optimal ray the certificate takes
/// mu = -L delta when that fits within max_inflation, so c_a = value + L delta.
DeterministicResult solve_deterministic(const Eigen::MatrixXd& G, const AugmentedModel& aug,
                                        double varpi, const DeterministicOptions& opts);

struct ProbabilisticParams {
  double epsilon = 0.01;
  double beta = 1e-10;
  std::uint64_t seed = 1;
  /// 0 selects sample_count(epsilon, beta, dim).
  std::int64_t samples = 0;
};

struct ProbabilisticResult {
  ScpResult scp;
  ProbabilisticParams params;
  std::int64_t required = 0;
};

/// ca_only SCP on i.i.d. uniform samples over the augmented state box.
/// Throws Error(InvalidArgument) if fewer samples than sample_count are given.
ProbabilisticResult solve_probabilistic(const ProbabilisticParams& params,
                                        const Eigen::MatrixXd& G, const AugmentedModel& aug,
                                        double varpi,
                                        const std::optional<Contraction>& contraction = {});

/// Fraction of fresh uniform samples with g(zeta) > c_a.
double violation_fraction(const Eigen::MatrixXd& P, double c_a, const Eigen::MatrixXd& G,
                          const AugmentedModel& aug, double varpi, std::int64_t count,
                          std::uint64_t seed);

}  // namespace acbc
