#include "acbc/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <thread>

#include "acbc/error.hpp"
#include "acbc/rng.hpp"

namespace acbc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::int64_t kChunk = 16384;

// Runs fn(chunk) for chunk in [0, chunks) on all hardware threads. Results
// must not depend on the schedule.
void parallel_chunks(std::int64_t chunks, const std::function<void(std::int64_t)>& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<unsigned>(std::min<std::int64_t>(hw, chunks));
  if (workers <= 1) {
    for (std::int64_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::int64_t c = next++; c < chunks; c = next++) fn(c);
    });
  }
  for (auto& t : pool) t.join();
}

VectorXd grid_point(const Box& box, const std::vector<int>& counts, std::int64_t index) {
  VectorXd p(box.dim());
  for (int i = 0; i < box.dim(); ++i) {
    const int c = counts[i];
    const int k = static_cast<int>(index % c);
    index /= c;
    if (c == 1) {
      p(i) = box.lower(i);
    } else if (k == c - 1) {
      p(i) = box.upper(i);
    } else {
      p(i) = box.lower(i) + k * (box.upper(i) - box.lower(i)) / (c - 1);
    }
  }
  return p;
}

struct ChunkMax {
  double value = -std::numeric_limits<double>::infinity();
  std::int64_t index = -1;
  VectorXd arg;
  std::int64_t domain_errors = 0;
};

}  // namespace

double decrement_value(const AugmentedModel& aug, const Certificate& cert,
                       const DynamicController& ctrl, const VectorXd& zeta) {
  const VectorXd F = aug.features(zeta);
  const VectorXd next = aug.A_aug * F + aug.B_aug * (ctrl.K * F);
  return cert.barrier(next) - cert.barrier(zeta) - cert.c_a;
}

DecrementResult check_decrement(const AugmentedModel& aug, const Certificate& cert,
                                const DynamicController& ctrl, const DecrementOptions& opts) {
  const int d = aug.dim();
  const Box& box = aug.state_box;
  DecrementResult r;
  r.grid_per_axis = opts.grid_per_axis > 0 ? opts.grid_per_axis : (d <= 3 ? 51 : 9);
  std::vector<int> counts(d);
  double total = 1.0;
  for (int i = 0; i < d; ++i) {
    counts[i] = box.upper(i) > box.lower(i) ? r.grid_per_axis : 1;
    total *= counts[i];
  }
  r.sampled = total > static_cast<double>(opts.max_grid_points);
  r.points = r.sampled ? opts.samples : static_cast<std::int64_t>(total);
  if (r.points <= 0) throw Error(ErrorKind::InvalidArgument, "no decrement points");
  if (r.sampled) r.grid_per_axis = 0;
  const bool table = !r.sampled && opts.keep_table;
  if (table) r.table.resize(d + 1, r.points);

  const std::int64_t chunks = (r.points + kChunk - 1) / kChunk;
  std::vector<ChunkMax> best(chunks);
  parallel_chunks(chunks, [&](std::int64_t c) {
    Rng rng(substream_seed(opts.seed, static_cast<std::uint64_t>(c)));
    ChunkMax& b = best[c];
    const std::int64_t end = std::min(r.points, (c + 1) * kChunk);
    for (std::int64_t k = c * kChunk; k < end; ++k) {
      const VectorXd z = r.sampled ? rng.uniform(box.lower, box.upper) : grid_point(box, counts, k);
      double v;
      try {
        v = decrement_value(aug, cert, ctrl, z);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Domain) throw;
        ++b.domain_errors;
        v = std::numeric_limits<double>::quiet_NaN();
      }
      if (table) {
        r.table.col(k).head(d) = z;
        r.table(d, k) = v;
      }
      if (v > b.value) {
        b.value = v;
        b.index = k;
        b.arg = z;
      }
    }
  });
  r.max_value = -std::numeric_limits<double>::infinity();
  for (const ChunkMax& b : best) {
    r.domain_errors += b.domain_errors;
    if (b.index >= 0 && b.value > r.max_value) {
      r.max_value = b.value;
      r.argmax = b.arg;
    }
  }
  return r;
}

void write_heatmap_csv(std::ostream& os, const DecrementResult& r) {
  const auto d = r.table.rows() - 1;
  for (Eigen::Index i = 0; i < d; ++i) os << "zeta" << i + 1 << ',';
  os << "value\n";
  char buf[32];
  for (Eigen::Index k = 0; k < r.table.cols(); ++k) {
    for (Eigen::Index i = 0; i <= d; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r.table(i, k));
      os << buf << (i == d ? '\n' : ',');
    }
  }
}

namespace {

// Vertices (when few enough), the point nearest the origin, then samples.
template <class Fn>
void box_probe(const Box& b, std::int64_t n_samples, Rng& rng, Fn&& fn) {
  const int d = b.dim();
  if (d <= 12) {
    for (std::int64_t mask = 0; mask < (std::int64_t{1} << d); ++mask) {
      VectorXd v(d);
      for (int i = 0; i < d; ++i) v(i) = (mask >> i) & 1 ? b.upper(i) : b.lower(i);
      fn(v);
    }
  }
  fn(VectorXd(VectorXd::Zero(d).cwiseMax(b.lower).cwiseMin(b.upper)));
  for (std::int64_t k = 0; k < n_samples; ++k) fn(rng.uniform(b.lower, b.upper));
}

}  // namespace

LevelCheck check_levels(const Certificate& cert, const BoxUnion& initial, const BoxUnion& unsafe,
                        std::int64_t n_samples, std::uint64_t seed) {
  LevelCheck r;
  r.max_initial = -std::numeric_limits<double>::infinity();
  r.min_unsafe = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  for (const Box& b : initial) {
    box_probe(b, n_samples, rng, [&](const VectorXd& z) {
      r.max_initial = std::max(r.max_initial, cert.barrier(z));
      ++r.points;
    });
  }
  for (const Box& b : unsafe) {
    box_probe(b, n_samples, rng, [&](const VectorXd& z) {
      r.min_unsafe = std::min(r.min_unsafe, cert.barrier(z));
      ++r.points;
    });
  }
  r.initial_ok = r.max_initial <= cert.eta + 1e-9;
  r.unsafe_ok = r.min_unsafe >= cert.gamma - 1e-9;
  return r;
}

namespace {

struct RunOutcome {
  bool state = false, input = false, domain = false, bound = false, crossing = false;
  double excess = -std::numeric_limits<double>::infinity();
  Trajectory traj;
};

}  // namespace

RolloutStats rollout(const PlantModel& plant, const AugmentedModel& aug,
                     const DynamicController& ctrl, std::int64_t T, int n_runs,
                     std::uint64_t seed, const RolloutOptions& opts) {
  if (T < 0 || n_runs < 0) throw Error(ErrorKind::InvalidArgument, "negative horizon or runs");
  if (aug.initial_boxes.empty()) throw Error(ErrorKind::InvalidArgument, "no initial set");
  const int n = plant.n(), m = plant.m();
  if (ctrl.K.rows() != m || ctrl.K.cols() != plant.dictionary.size()) {
    throw Error(ErrorKind::Dimension, "controller gain does not match the plant dictionary");
  }
  const Certificate* cert = opts.certificate;
  std::vector<RunOutcome> out(n_runs);
  parallel_chunks(n_runs, [&](std::int64_t run) {
    RunOutcome& o = out[run];
    Rng rng(substream_seed(seed, static_cast<std::uint64_t>(run)));
    const Box& b0 = aug.initial_boxes[rng.index(aug.initial_boxes.size())];
    VectorXd zeta = rng.uniform(b0.lower, b0.upper);
    const bool record = run < opts.record_runs;
    if (record) {
      o.traj.run = static_cast<int>(run);
      o.traj.x.resize(n, T + 1);
      o.traj.u.resize(m, T + 1);
    }
    for (std::int64_t k = 0;; ++k) {
      const VectorXd x = zeta.head(n), u = zeta.tail(m);
      if (record) {
        o.traj.x.col(k) = x;
        o.traj.u.col(k) = u;
      }
      if (contains(plant.regions.unsafe_boxes, x)) o.state = true;
      if (!plant.inputs.admissible(u)) o.input = true;
      if (cert) {
        const double bound = cert->eta + static_cast<double>(k) * cert->c_a;
        const double excess = cert->barrier(zeta) - bound;
        o.excess = std::max(o.excess, excess);
        if (excess > kBoundSlack * (1.0 + std::abs(bound))) o.bound = true;
        // eta + k c_a < gamma holds for every k <= T, so k = T is checked too.
        if (cert->barrier(zeta) >= cert->gamma) o.crossing = true;
      }
      if (k == T) break;
      try {
        const VectorXd f = plant.dictionary.eval(x, u);
        zeta.head(n) = plant.A * f;
        zeta.tail(m) = ctrl.K * f;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Domain) throw;
        o.domain = true;
        if (record) {
          o.traj.x.conservativeResize(n, k + 1);
          o.traj.u.conservativeResize(m, k + 1);
        }
        break;
      }
    }
  });
  RolloutStats s;
  s.runs = n_runs;
  s.horizon = T;
  for (RunOutcome& o : out) {
    s.state_violations += o.state;
    s.input_violations += o.input;
    s.domain_errors += o.domain;
    s.bound_violations += o.bound;
    s.level_crossings += o.crossing;
    s.max_bound_excess = std::max(s.max_bound_excess, o.excess);
  }
  for (int r = 0; r < std::min(opts.record_runs, n_runs); ++r) {
    s.trajectories.push_back(std::move(out[r].traj));
  }
  return s;
}

void write_rollout_csv(std::ostream& os, const std::vector<Trajectory>& runs) {
  if (runs.empty()) {
    os << "run,k\n";
    return;
  }
  const auto n = runs.front().x.rows(), m = runs.front().u.rows();
  os << "run,k";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i + 1;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u" << i + 1;
  os << '\n';
  char buf[32];
  for (const Trajectory& t : runs) {
    for (Eigen::Index k = 0; k < t.x.cols(); ++k) {
      os << t.run << ',' << k;
      for (Eigen::Index i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", t.x(i, k));
        os << ',' << buf;
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", t.u(i, k));
        os << ',' << buf;
      }
      os << '\n';
    }
  }
}

}  // namespace acbc
