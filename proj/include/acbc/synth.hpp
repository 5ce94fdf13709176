#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "acbc/data.hpp"
#include "acbc/model.hpp"
#include "acbc/sdp.hpp"

namespace acbc {

/// Finite horizon or the infinite sentinel.
struct Horizon {
  bool infinite = false;
  std::int64_t steps = 0;

  bool operator==(const Horizon&) const = default;
};

/// Quadratic barrier B(zeta) = zeta^T P zeta with its levels and decay.
struct Certificate {
  Eigen::MatrixXd P;
  double eta = 0.0;
  double gamma = 0.0;
  double c_a = 0.0;
  double varpi = 0.0;
  Horizon horizon;

  double barrier(const Eigen::VectorXd& zeta) const { return zeta.dot(P * zeta); }
};

/// u+ = K f(x, u) on the plant, theta = K F(zeta) on the augmented system.
struct DynamicController {
  Eigen::MatrixXd K;  // m x N

  Eigen::VectorXd next_input(const Dictionary& plant_dict, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& u) const {
    return K * plant_dict.eval(x, u);
  }
};

enum class NormKind { Spectral, Frobenius };

struct Z2Result {
  Eigen::MatrixXd Z2;   // T x (N - n - m)
  double norm = 0.0;    // ||S+ Z2|| in the selected norm
  double eq_residual = 0.0;
  sdp::SdpSolution solution;
};

/// minimize ||S+ Z2|| subject to M Z2 = [0; I].
sdp::SdpProblem build_spectral_norm_problem(const Eigen::MatrixXd& S_plus,
                                            const Eigen::MatrixXd& M, int n, int m,
                                            NormKind norm = NormKind::Spectral);

Z2Result solve_z2(const DataMatrices& dm, const Eigen::MatrixXd& S_plus, int n, int m,
                  NormKind norm = NormKind::Spectral);

struct BarrierResult {
  Eigen::MatrixXd Pi;
  Eigen::MatrixXd Y;  // T x (n+m)
  Eigen::MatrixXd P;  // Pi^{-1}
  double kappa = 0.0;
  double lmi_min_eig = 0.0;
  double eq_residual = 0.0;
  sdp::SdpSolution solution;
};

inline constexpr double kKappaMin = 1e-6;

/// maximize kappa s.t. M Y = [Pi; 0], [Pi/(1+varpi), S+Y; *, Pi] >= 0,
/// Pi >= kappa I, I >= Pi, kappa >= kKappaMin. The last bound normalizes the
/// otherwise homogeneous problem.
sdp::SdpProblem build_barrier_lmi_problem(const Eigen::MatrixXd& S_plus,
                                          const Eigen::MatrixXd& M, double varpi);

/// Throws Error(Infeasible) when no certificate exists for this data/varpi.
BarrierResult solve_barrier(const DataMatrices& dm, const Eigen::MatrixXd& S_plus,
                            double varpi);

/// Largest margin s such that M Y = [Pi; 0] and the barrier LMI minus s I is
/// PSD, with Pi fixed. A negative margin means no data-consistent Y exists.
struct FixedPiResult {
  Eigen::MatrixXd Y;
  double margin = 0.0;
  double lmi_min_eig = 0.0;  // of the unshifted LMI at the returned Y
  double eq_residual = 0.0;
  bool feasible = false;     // lmi_min_eig >= -1e-8 and residual <= 1e-7
  sdp::SdpSolution solution;
};

FixedPiResult solve_y_for_fixed_pi(const DataMatrices& dm, const Eigen::MatrixXd& S_plus,
                                   const Eigen::MatrixXd& Pi, double varpi);

struct CaOptions {
  int grid_res = 21;
  /// Upper bound on objective evaluations for the seeding stage; above it the
  /// grid is replaced by this many seeded uniform samples.
  std::int64_t budget = 200000;
  int starts = 16;
  int iterations = 200;
  double tol = 1e-10;
  bool sound = false;
  std::uint64_t seed = 1;
};

struct CaResult {
  double c_a = 0.0;
  double max_residual_sq = 0.0;  // max |S+ Z2 Psi(zeta)|^2 found
  Eigen::VectorXd argmax;
  bool sampled = false;          // seeds drawn at random instead of a grid
  double lipschitz = 0.0;        // sound mode only
  double delta = 0.0;            // sound mode only
};

/// (1 + 1/varpi) * lambda_max(P) * max over the box of |G Psi(zeta)|^2 with
/// G = S+ Z2, by grid-seeded multi-start pattern search.
CaResult compute_ca(const Eigen::MatrixXd& P, const Eigen::MatrixXd& G,
                    const AugmentedModel& aug, double varpi, const CaOptions& opts = {});

/// Max over a union of boxes of |G Psi|^2 (pattern search core, exposed for
/// tests and the sampled audits).
CaResult maximize_residual(const Eigen::MatrixXd& G, const AugmentedModel& aug,
                           const Box& box, const CaOptions& opts);

struct Levels {
  double eta = 0.0;
  double gamma = 0.0;
  Eigen::VectorXd eta_arg;
  Eigen::VectorXd gamma_arg;
};

/// max of zeta^T P zeta over a box, by vertex enumeration (<= 2^20 vertices).
double max_quadratic_on_box(const Eigen::MatrixXd& P, const Box& b,
                            Eigen::VectorXd* arg = nullptr);

/// min of zeta^T P zeta over a box (P PSD): accelerated projected gradient
/// followed by an active-set polish.
double min_quadratic_on_box(const Eigen::MatrixXd& P, const Box& b,
                            Eigen::VectorXd* arg = nullptr);

/// Optimized levels: eta = max over the initial union, gamma = min over the
/// unsafe union.
Levels compute_levels(const Eigen::MatrixXd& P, const BoxUnion& initial,
                      const BoxUnion& unsafe);

/// eta = lambda_max(P) max |zeta|^2, gamma = lambda_min(P) min |zeta|^2.
Levels compute_levels_conservative(const Eigen::MatrixXd& P, const BoxUnion& initial,
                                   const BoxUnion& unsafe);

/// Largest integer strictly below (gamma - eta) / c_a; infinite when c_a = 0.
/// Throws Error(LevelSeparation) if gamma <= eta or the result is < 1.
Horizon horizon(double eta, double gamma, double c_a);

/// K = I [Y P | Z2].
DynamicController build_controller(const Eigen::MatrixXd& I, const Eigen::MatrixXd& Y,
                                   const Eigen::MatrixXd& P, const Eigen::MatrixXd& Z2);

/// |S+ Z1 zeta + S+ Z2 Psi(zeta) - (A_aug F(zeta) + B_aug K F(zeta))|.
double closed_loop_residual(const AugmentedModel& aug, const Eigen::MatrixXd& K,
                            const Eigen::MatrixXd& S_plus, const Eigen::MatrixXd& Z1,
                            const Eigen::MatrixXd& Z2, const Eigen::VectorXd& zeta);

}  // namespace acbc
