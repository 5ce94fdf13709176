#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "acbc/expr.hpp"

namespace acbc {

/// Closed axis-aligned box.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  /// Throws Error(Dimension) on size mismatch, Error(InvalidArgument) when
  /// some lower[i] > upper[i] or a bound is not finite.
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi);

  int dim() const { return static_cast<int>(lower.size()); }
  Eigen::VectorXd width() const { return upper - lower; }
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
  bool contains(const Eigen::VectorXd& p) const;
};

using BoxUnion = std::vector<Box>;

/// True iff p lies in some box (closed). Throws Error(Dimension) on mismatch.
bool contains(const BoxUnion& region, const Eigen::VectorXd& p);

/// Closed boxes share at least one point.
bool intersects(const Box& a, const Box& b);

/// Cartesian product a x b.
Box product(const Box& a, const Box& b);

struct RegionSpec {
  Box state_box;
  BoxUnion initial_boxes;
  BoxUnion unsafe_boxes;

  /// Subset and disjointness checks; throws Error(Config).
  void validate() const;
};

/// Admissible inputs {u : C_j^T u <= 1 for all j}.
struct InputConstraints {
  std::vector<Eigen::VectorXd> rows;

  /// Symmetric box |u_i| <= u_max[i], encoded as C = +-e_i / u_max[i].
  static InputConstraints box(const Eigen::VectorXd& u_max);

  int m() const { return rows.empty() ? 0 : static_cast<int>(rows.front().size()); }

  bool admissible(const Eigen::VectorXd& u, double tol = 0.0) const;

  /// Returns u_max when the constraints describe a symmetric box.
  std::optional<Eigen::VectorXd> as_box() const;

  /// Throws Error(Config) when the set is unbounded. Bounded iff the rows
  /// span R^m and some strictly positive combination of them vanishes.
  void validate_bounded() const;
};

/// True plant x+ = A f(x,u). A is only used as a simulation oracle.
struct PlantModel {
  Dictionary dictionary;
  Eigen::MatrixXd A;
  RegionSpec regions;
  InputConstraints inputs;

  int n() const { return dictionary.n(); }
  int m() const { return dictionary.m(); }

  void validate() const;
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
};

/// Integrator-augmented system zeta+ = A_aug F(zeta) + B_aug theta with
/// zeta = (x, u).
struct AugmentedModel {
  int n = 0;
  int m = 0;
  Dictionary dictionary;  // over zeta, no inputs
  Eigen::MatrixXd A_aug;  // (n+m) x N, oracle only
  Eigen::MatrixXd B_aug;  // (n+m) x m
  double eps1 = 0.0;
  double eps2 = 0.0;
  Eigen::VectorXd u_max;
  Box state_box;
  BoxUnion initial_boxes;
  BoxUnion unsafe_boxes;

  int dim() const { return n + m; }
  int N() const { return dictionary.size(); }

  Eigen::VectorXd features(const Eigen::VectorXd& zeta) const;
  Eigen::VectorXd psi(const Eigen::VectorXd& zeta) const;
  Eigen::VectorXd step(const Eigen::VectorXd& zeta,
                       const Eigen::VectorXd& theta) const;
};

/// How the input part of the augmented unsafe set is built.
/// PerCoordinate: every |u_i| >= u_max_i slab (the closed band outside the
/// input box). Joint: only the two corner bands where all inputs sit past
/// their bounds at once, as listed for the 10-state example.
enum class InputBand { PerCoordinate, Joint };

/// Adds one integrator at the plant input. Only box input constraints are
/// supported; unsafe boxes are ordered plant-unsafe x input-range first,
/// then the input bands (lower before upper).
AugmentedModel augment(const PlantModel& plant, double eps1, double eps2,
                       InputBand band = InputBand::PerCoordinate);

}  // namespace acbc
