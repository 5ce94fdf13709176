#include "acbc/data.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "acbc/error.hpp"
#include "acbc/rng.hpp"

namespace acbc {

Excitation default_excitation(const AugmentedModel& aug) {
  const Eigen::VectorXd r = (1.0 + aug.eps1) * aug.u_max;
  return {-r, r};
}

TrajectoryData collect_trajectory(const AugmentedModel& aug, int T,
                                  const Excitation& excitation, std::uint64_t seed,
                                  const std::optional<Eigen::VectorXd>& zeta0) {
  if (T < 1) throw Error(ErrorKind::InvalidArgument, "trajectory length must be >= 1");
  const int d = aug.dim(), m = aug.m;
  if (excitation.lo.size() != m || excitation.hi.size() != m) {
    throw Error(ErrorKind::Dimension, "excitation box dimension differs from m");
  }
  if (!excitation.lo.allFinite() || !excitation.hi.allFinite() ||
      (excitation.lo.array() > excitation.hi.array()).any()) {
    throw Error(ErrorKind::InvalidArgument, "excitation bounds must be finite and ordered");
  }
  Rng rng(seed);
  TrajectoryData t;
  t.T = T;
  t.seed = seed;
  t.S.resize(d, T);
  t.I.resize(m, T);
  t.S_plus.resize(d, T);
  Eigen::VectorXd z;
  if (zeta0) {
    if (zeta0->size() != d) throw Error(ErrorKind::Dimension, "initial state dimension");
    z = *zeta0;
  } else {
    const Box& b = aug.initial_boxes.at(rng.index(aug.initial_boxes.size()));
    z = rng.uniform(b.lower, b.upper);
  }
  for (int k = 0; k < T; ++k) {
    const Eigen::VectorXd theta = rng.uniform(excitation.lo, excitation.hi);
    Eigen::VectorXd next;
    try {
      next = aug.step(z, theta);
    } catch (const Error& e) {
      std::ostringstream os;
      os << "at step " << k << ": " << e.what();
      throw Error(e.kind(), os.str());
    }
    if (!next.allFinite()) {
      std::ostringstream os;
      os << "trajectory diverged at step " << k;
      throw Error(ErrorKind::Numerical, os.str());
    }
    t.S.col(k) = z;
    t.I.col(k) = theta;
    t.S_plus.col(k) = next;
    z = next;
  }
  return t;
}

DataMatrices assemble_M(const TrajectoryData& traj, const Dictionary& aug_dict) {
  const int N = aug_dict.size();
  if (traj.S.rows() != aug_dict.n() || aug_dict.m() != 0) {
    throw Error(ErrorKind::Dimension, "dictionary does not match trajectory state");
  }
  DataMatrices dm;
  dm.M.resize(N, traj.T);
  const Eigen::VectorXd none(0);
  for (int k = 0; k < traj.T; ++k) dm.M.col(k) = aug_dict.eval(traj.S.col(k), none);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dm.M);
  const Eigen::VectorXd& sv = svd.singularValues();
  dm.sigma_max = sv.size() ? sv(0) : 0.0;
  dm.sigma_min = sv.size() ? sv(sv.size() - 1) : 0.0;
  const double thresh = std::max(N, traj.T) * dm.sigma_max * std::ldexp(1.0, -52) * 16.0;
  dm.rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > thresh) ++dm.rank;
  }
  return dm;
}

bool check_richness(const DataMatrices& dm) {
  const int N = static_cast<int>(dm.M.rows());
  const int T = static_cast<int>(dm.M.cols());
  return dm.rank == N && T >= N + 1;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryData& traj) {
  const int d = static_cast<int>(traj.S.rows()), m = static_cast<int>(traj.I.rows());
  os << "k";
  for (int i = 0; i < d; ++i) os << ",zeta" << i + 1;
  for (int i = 0; i < m; ++i) os << ",theta" << i + 1;
  os << "\n" << std::setprecision(17);
  for (int k = 0; k <= traj.T; ++k) {
    os << k;
    for (int i = 0; i < d; ++i) {
      os << "," << (k < traj.T ? traj.S(i, k) : traj.S_plus(i, traj.T - 1));
    }
    for (int i = 0; i < m; ++i) {
      os << ",";
      if (k < traj.T) os << traj.I(i, k);
    }
    os << "\n";
  }
}

}  // namespace acbc
