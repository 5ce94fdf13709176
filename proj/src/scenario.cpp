#include "acbc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "acbc/error.hpp"
#include "acbc/rng.hpp"

namespace acbc {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using sdp::AffineMatrix;
using sdp::LinExpr;

GridSamples grid_samples(const Box& box, const std::vector<int>& counts) {
  const int d = box.dim();
  if (static_cast<int>(counts.size()) != d) {
    throw Error(ErrorKind::Dimension, "grid counts and box differ in dimension");
  }
  GridSamples g;
  g.counts = counts;
  g.h = VectorXd::Zero(d);
  double total = 1.0;
  for (int i = 0; i < d; ++i) {
    const double w = box.upper(i) - box.lower(i);
    if (counts[i] < (w > 0.0 ? 2 : 1)) {
      throw Error(ErrorKind::InvalidArgument, "grid needs at least 2 points per axis");
    }
    if (w > 0.0) g.h(i) = w / (counts[i] - 1);
    total *= counts[i];
  }
  if (total > kMaxGridPoints) {
    std::ostringstream os;
    os << "grid of " << total << " points exceeds the limit of " << kMaxGridPoints;
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
  g.delta = 0.5 * g.h.norm();
  const auto K = static_cast<Eigen::Index>(total);
  g.points.resize(d, K);
  std::vector<int> idx(d, 0);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (int i = 0; i < d; ++i) {
      // The last point is placed on the upper face exactly.
      g.points(i, k) = idx[i] == counts[i] - 1 ? box.upper(i) : box.lower(i) + idx[i] * g.h(i);
    }
    for (int i = 0; i < d && ++idx[i] == counts[i]; ++i) idx[i] = 0;
  }
  return g;
}

MatrixXd uniform_samples(const Box& box, std::int64_t count, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd s(box.dim(), count);
  for (std::int64_t k = 0; k < count; ++k) s.col(k) = rng.uniform(box.lower, box.upper);
  return s;
}

MatrixXd residual_images(const MatrixXd& samples, const MatrixXd& G, const AugmentedModel& aug) {
  MatrixXd v(G.rows(), samples.cols());
  for (Eigen::Index k = 0; k < samples.cols(); ++k) {
    v.col(k) = G * aug.psi(samples.col(k));
  }
  return v;
}

namespace {

struct ScpModel {
  sdp::ProblemBuilder builder;
  AffineMatrix P;
  int c = -1, mu = -1;
};

ScpModel scp_model(const MatrixXd& images, int dim, const ScpSpec& spec) {
  if (images.cols() == 0) throw Error(ErrorKind::InvalidArgument, "no scenario samples");
  if (images.rows() != dim) throw Error(ErrorKind::Dimension, "images and P differ");
  if (!(spec.varpi > 0.0)) throw Error(ErrorKind::InvalidArgument, "varpi must be positive");
  const double k = 1.0 + 1.0 / spec.varpi;
  ScpModel s;
  s.P = s.builder.symmetric_var(dim);
  s.c = s.builder.scalar();
  const bool with_mu = spec.mode == ScpMode::WithMu;
  if (with_mu) s.mu = s.builder.scalar();

  s.builder.add_psd(s.P - AffineMatrix::identity(dim, LinExpr(kScpFloor)));
  s.builder.add_nonneg(LinExpr::var(s.c));
  if (with_mu) {
    s.builder.add_nonneg(LinExpr::var(s.mu, -1.0));
    s.builder.add_nonneg(LinExpr::var(s.mu) + LinExpr(spec.mu_cap));
  }
  if (spec.contraction) {
    const MatrixXd& A = spec.contraction->A_cl;
    if (A.rows() != dim || A.cols() != dim) throw Error(ErrorKind::Dimension, "A_cl shape");
    const AffineMatrix lhs = (1.0 / (1.0 + spec.varpi)) * s.P -
                             (A.transpose() * s.P) * A -
                             AffineMatrix::identity(dim, LinExpr(spec.contraction->margin));
    s.builder.add_psd(lhs);
  }
  // c_a + mu - k v^T P v >= 0 for every sample.
  for (Eigen::Index d = 0; d < images.cols(); ++d) {
    LinExpr e = LinExpr::var(s.c);
    if (with_mu) e += LinExpr::var(s.mu);
    const VectorXd v = images.col(d);
    for (int i = 0; i < dim; ++i) {
      for (int j = i; j < dim; ++j) {
        const double w = (i == j ? 1.0 : 2.0) * k * v(i) * v(j);
        if (w != 0.0) e -= w * s.P(i, j);
      }
    }
    s.builder.add_nonneg(e);
  }
  LinExpr obj = LinExpr::var(s.c);
  if (with_mu) obj += LinExpr::var(s.mu);
  for (int i = 0; i < dim; ++i) obj += spec.trace_weight * s.P(i, i);
  s.builder.minimize(obj);
  return s;
}

}  // namespace

sdp::SdpProblem build_scp_problem(const MatrixXd& images, int dim, const ScpSpec& spec) {
  return scp_model(images, dim, spec).builder.build();
}

ScpResult solve_scp(const MatrixXd& samples, const MatrixXd& G, const AugmentedModel& aug,
                    const ScpSpec& spec) {
  const int dim = aug.dim();
  const MatrixXd images = residual_images(samples, G, aug);
  ScpModel m = scp_model(images, dim, spec);
  ScpResult r;
  r.samples = samples.cols();
  r.solution = sdp::solve(m.builder.build());
  if (r.solution.status == sdp::Status::Infeasible) {
    throw Error(ErrorKind::Infeasible, "scenario program is infeasible");
  }
  // A stalled solve is still usable when the iterate is feasible and close to
  // optimal: c_a is snapped to the sample maximum below anyway.
  const sdp::SdpSolution& sol = r.solution;
  const bool usable = sol.status == sdp::Status::Optimal ||
                      (sol.status == sdp::Status::NumericalFailure && sol.y.size() > 0 &&
                       sol.primal_infeas <= 1e-9 && sol.min_eig >= -1e-9 &&
                       sol.rel_gap <= kScpGapTol);
  if (!usable) {
    throw Error(ErrorKind::Numerical, "scenario program: " + r.solution.message);
  }
  r.P = m.P.eval(r.solution.y);
  r.P = (0.5 * (r.P + r.P.transpose())).eval();
  const double k = 1.0 + 1.0 / spec.varpi;
  r.value = 0.0;
  for (Eigen::Index d = 0; d < images.cols(); ++d) {
    r.value = std::max(r.value, k * images.col(d).dot(r.P * images.col(d)));
  }
  // Snap onto the exact sample maximum so every stored constraint holds. With
  // mu the optimal set is the ray c_a + mu = value; report its mu = 0 end.
  r.mu = 0.0;
  r.c_a = r.value;
  r.max_violation = r.value - r.c_a - r.mu;
  return r;
}

double scp_objective(const MatrixXd& P, const MatrixXd& G, const AugmentedModel& aug,
                     double varpi, const VectorXd& zeta) {
  const VectorXd v = G * aug.psi(zeta);
  return (1.0 + 1.0 / varpi) * v.dot(P * v);
}

double lipschitz_estimate(const MatrixXd& P, const MatrixXd& G, const AugmentedModel& aug,
                          double varpi, const Box& box, const MatrixXd& points) {
  const int d = box.dim();
  double best = 0.0;
  for (Eigen::Index k = 0; k < points.cols(); ++k) {
    VectorXd grad = VectorXd::Zero(d);
    for (int i = 0; i < d; ++i) {
      const double w = box.upper(i) - box.lower(i);
      if (w <= 0.0) continue;
      const double e = 1e-6 * w;
      VectorXd a = points.col(k), b = points.col(k);
      a(i) += e;
      b(i) -= e;
      grad(i) = (scp_objective(P, G, aug, varpi, a) - scp_objective(P, G, aug, varpi, b)) /
                (2.0 * e);
    }
    best = std::max(best, grad.norm());
  }
  return 1.1 * best;
}

bool deterministic_check(double mu, double lipschitz, double delta) {
  return mu + lipschitz * delta <= 0.0;
}

std::int64_t sample_count(double epsilon, double beta, int dim) {
  if (!(epsilon > 0.0 && epsilon < 1.0) || !(beta > 0.0 && beta < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "epsilon and beta must lie in (0, 1)");
  }
  if (dim < 1) throw Error(ErrorKind::InvalidArgument, "dimension must be positive");
  const double decisions = 0.5 * dim * (dim + 1.0) + 1.0;
  return static_cast<std::int64_t>(std::ceil(2.0 / epsilon * (std::log(1.0 / beta) + decisions)));
}

DeterministicResult solve_deterministic(const MatrixXd& G, const AugmentedModel& aug,
                                        double varpi, const DeterministicOptions& opts) {
  if (opts.rounds < 1) throw Error(ErrorKind::InvalidArgument, "rounds must be >= 1");
  DeterministicResult r;
  int per_axis = opts.grid_per_axis;
  for (int round = 1; round <= opts.rounds; ++round) {
    std::vector<int> counts(aug.dim());
    for (int i = 0; i < aug.dim(); ++i) {
      counts[i] = aug.state_box.upper(i) > aug.state_box.lower(i) ? per_axis : 1;
    }
    const GridSamples grid = grid_samples(aug.state_box, counts);
    ScpSpec spec;
    spec.mode = ScpMode::WithMu;
    spec.varpi = varpi;
    spec.contraction = opts.contraction;
    r.scp = solve_scp(grid.points, G, aug, spec);
    r.lipschitz = lipschitz_estimate(r.scp.P, G, aug, varpi, aug.state_box, grid.points);
    r.delta = grid.delta;
    r.grid_per_axis = per_axis;
    r.rounds_used = round;
    const double need = r.lipschitz * r.delta;
    const double room = opts.max_inflation * r.scp.value;
    r.scp.mu = -std::min(need, room);
    r.scp.c_a = r.scp.value - r.scp.mu;
    r.scp.max_violation = r.scp.value - r.scp.c_a - r.scp.mu;
    r.passed = deterministic_check(r.scp.mu, r.lipschitz, r.delta);
    if (r.passed) break;
    per_axis = 2 * per_axis - 1;
  }
  return r;
}

ProbabilisticResult solve_probabilistic(const ProbabilisticParams& params, const MatrixXd& G,
                                        const AugmentedModel& aug, double varpi,
                                        const std::optional<Contraction>& contraction) {
  ProbabilisticResult r;
  r.params = params;
  r.required = sample_count(params.epsilon, params.beta, aug.dim());
  if (r.params.samples == 0) r.params.samples = r.required;
  if (r.params.samples < r.required) {
    std::ostringstream os;
    os << "scenario needs at least " << r.required << " samples, got " << r.params.samples;
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
  const MatrixXd samples = uniform_samples(aug.state_box, r.params.samples, params.seed);
  ScpSpec spec;
  spec.mode = ScpMode::CaOnly;
  spec.varpi = varpi;
  spec.contraction = contraction;
  r.scp = solve_scp(samples, G, aug, spec);
  return r;
}

double violation_fraction(const MatrixXd& P, double c_a, const MatrixXd& G,
                          const AugmentedModel& aug, double varpi, std::int64_t count,
                          std::uint64_t seed) {
  if (count <= 0) return 0.0;
  Rng rng(seed);
  std::int64_t bad = 0;
  for (std::int64_t k = 0; k < count; ++k) {
    const VectorXd z = rng.uniform(aug.state_box.lower, aug.state_box.upper);
    if (scp_objective(P, G, aug, varpi, z) > c_a) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(count);
}

}  // namespace acbc
