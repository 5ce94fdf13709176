// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "json.hpp"

#include "acbc/config.hpp"
#include "acbc/pipeline.hpp"
#include "acbc/rng.hpp"
#include "acbc/scenario.hpp"
#include "acbc/synth.hpp"
#include "case_studies.hpp"

using namespace acbc;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("%s [%2d] %s: %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Runs one criterion; an escaping exception counts as a failure.
void criterion(int id, const std::string& what, const std::function<std::pair<bool, std::string>()>& f) {
  try {
    const auto [ok, detail] = f();
    report(id, ok, what, detail);
  } catch (const std::exception& e) {
    report(id, false, what, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string horizon_str(const Horizon& h) {
  return h.infinite ? "inf" : std::to_string(h.steps);
}

double min_eig(const MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (m + m.transpose())).eigenvalues()(0);
}

const std::string kDir = ACBC_SOURCE_DIR "/configs/";

// Pipeline outputs shared between criteria, produced once.
struct Runs {
  RunConfig c1, c2;
  std::optional<SynthesisRun> syn1, scn1, syn2;
  std::optional<VerificationRun> ver1, ver2;
  double syn1_s = 0, scn1_s = 0, syn2_s = 0, ver2_s = 0;
};

}  // namespace

int main() {
  Runs R;

  criterion(1, "horizon arithmetic", [] {
    const auto t0 = Clock::now();
    const Horizon a = horizon(66.6553, 125.7459, 3.9385);
    const Horizon b = horizon(0.1334, 0.6483, 0.0078);
    const Horizon c = horizon(11.1984, 42.9171, 0.0566);
    const double ms = 1e3 * since(t0) / 3;
    const bool ok = a == Horizon{false, 15} && b == Horizon{false, 66} &&
                    c == Horizon{false, 560} && ms < 1;
    return std::pair{ok, fmt("T = %s, %s, %s (%.4f ms each)", horizon_str(a).c_str(),
                             horizon_str(b).c_str(), horizon_str(c).c_str(), ms)};
  });

  criterion(2, "scenario sample count", [] {
    const auto t0 = Clock::now();
    const auto n = sample_count(0.01, 1e-10, 3);
    const double ms = 1e3 * since(t0);
    return std::pair{n == 6006 && ms < 1, fmt("N = %lld (%.4f ms)", static_cast<long long>(n), ms)};
  });

  criterion(3, "level sets for the printed case 1 P", [] {
    const auto t0 = Clock::now();
    const AugmentedModel a = augment(fixtures::case1_plant(), 1.0 / 1500, 1499.0 / 1500);
    const Levels l = compute_levels(fixtures::case1_reference_P(), a.initial_boxes, a.unsafe_boxes);
    const double s = since(t0);
    const bool ok = std::abs(l.eta - 66.6553) <= 1e-3 && std::abs(l.gamma - 125.7459) <= 1e-2 && s < 1;
    return std::pair{ok, fmt("eta = %.6f, gamma = %.6f (%.3f s)", l.eta, l.gamma, s)};
  });

  criterion(4, "augmentation of the case 1 plant", [] {
    const AugmentedModel a = augment(fixtures::case1_plant(), 1.0 / 1500, 1499.0 / 1500);
    MatrixXd A = MatrixXd::Zero(3, 10);
    A(0, 0) = 1;
    A(0, 1) = 0.01;
    A(0, 9) = 0.01;
    A(1, 0) = -0.01;
    A(1, 1) = 1 + 0.01;
    A(1, 2) = 0.01;
    A(1, 3) = -0.01;
    const MatrixXd B = (MatrixXd(3, 1) << 0, 0, 1).finished();
    const bool ok = a.A_aug.rows() == 3 && a.A_aug.cols() == 10 && (a.A_aug.array() == A.array()).all() &&
                    a.B_aug.rows() == 3 && a.B_aug.cols() == 1 && (a.B_aug.array() == B.array()).all();
    return std::pair{ok, std::string(ok ? "bitwise equal" : "mismatch")};
  });

  criterion(5, "case 1 end to end", [&] {
    R.c1 = load_config(kDir + "case_study_1.json");
    const auto t0 = Clock::now();
    R.syn1 = run_synthesize(R.c1);
    R.syn1_s = since(t0);
    const Certificate& c = R.syn1->cert;
    const bool ok = R.c1.experiment.samples == 11 && R.c1.synthesis.varpi == 0.01 &&
                    R.syn1->traj.T == 11 && c.gamma > c.eta && !c.horizon.infinite &&
                    c.horizon.steps >= 10 && R.syn1_s <= 60;
    return std::pair{ok, fmt("T = %s, eta = %.4f, gamma = %.4f, c_a = %.4f (%.2f s)",
                             horizon_str(c.horizon).c_str(), c.eta, c.gamma, c.c_a, R.syn1_s)};
  });

  criterion(6, "case 1 decrement on the 51^3 grid", [&] {
    if (!R.syn1) return std::pair{false, std::string("no certificate")};
    R.ver1 = run_verify(R.c1, R.syn1->cert, R.syn1->ctrl);
    const DecrementResult& d = R.ver1->decrement;
    const bool ok = !d.sampled && d.grid_per_axis == 51 && d.domain_errors == 0 && d.max_value <= 1e-6;
    return std::pair{ok, fmt("max = %.6g over %lld points", d.max_value, static_cast<long long>(d.points))};
  });

  criterion(7, "case 1 Monte Carlo safety", [&] {
    if (!R.ver1) return std::pair{false, std::string("no verification run")};
    const RolloutStats& s = R.ver1->rollouts;
    const double t = R.ver1->report["timing"]["rollout_seconds"].get<double>();
    const bool ok = s.runs == 1000 && s.horizon == R.syn1->cert.horizon.steps && s.state_violations == 0 &&
                    s.input_violations == 0 && s.domain_errors == 0 && t <= 10;
    return std::pair{ok, fmt("%d runs x %lld steps: %d unsafe, %d input violations (%.2f s)", s.runs,
                             static_cast<long long>(s.horizon), s.state_violations, s.input_violations, t)};
  });

  criterion(8, "case 1 scenario path", [&] {
    if (R.c1.plant.n == 0) R.c1 = load_config(kDir + "case_study_1.json");
    const auto t0 = Clock::now();
    R.scn1 = run_scenario(R.c1);
    R.scn1_s = since(t0);
    const Certificate& c = R.scn1->cert;
    const json& a = R.scn1->report["audit"];
    const double frac = a["violation_fraction"].get<double>();
    const bool ok = R.c1.scenario.epsilon == 0.01 && R.c1.scenario.beta == 1e-10 &&
                    R.scn1->report["scenario"]["samples"] == 6006 && a["samples"] == 100000 &&
                    !c.horizon.infinite && c.horizon.steps >= 30 && frac <= 0.01 && R.scn1_s <= 120;
    return std::pair{ok, fmt("T = %s, c_a = %.4f, audit violation fraction = %.5f (%.2f s)",
                             horizon_str(c.horizon).c_str(), c.c_a, frac, R.scn1_s)};
  });

  // Case 2 runs before 9 so that criterion covers every pipeline output.
  const auto case2 = [&] {
    R.c2 = load_config(kDir + "case_study_2.json");
    auto t0 = Clock::now();
    R.syn2 = run_synthesize(R.c2);
    R.syn2_s = since(t0);
    t0 = Clock::now();
    R.ver2 = run_verify(R.c2, R.syn2->cert, R.syn2->ctrl);
    R.ver2_s = since(t0);
  };
  std::string case2_error;
  try {
    case2();
  } catch (const std::exception& e) {
    case2_error = e.what();
  }

  criterion(9, "closed-loop identity on 1000 points per output", [&] {
    double worst = 0;
    int outputs = 0;
    for (const auto* r : {&R.syn1, &R.scn1, &R.syn2}) {
      if (!*r) continue;
      ++outputs;
      worst = std::max(worst, max_relative_closed_loop_residual((*r)->aug, (*r)->ctrl, (*r)->traj.S_plus,
                                                                (*r)->Z1, (*r)->Z2, 1000, 99));
    }
    return std::pair{outputs == 3 && worst <= 1e-6, fmt("%d outputs, max relative residual = %.3g", outputs, worst)};
  });

  criterion(10, "Schur equivalence and Young decomposition", [&] {
    if (!R.syn1) return std::pair{false, std::string("no certificate")};
    const SynthesisRun& r = *R.syn1;
    const double w = r.cert.varpi;
    const MatrixXd& P = r.cert.P;
    const MatrixXd Pi = P.inverse();
    const MatrixXd SY = r.traj.S_plus * r.Z1 * Pi;
    const MatrixXd G = r.traj.S_plus * r.Z2;
    const Eigen::Index d = P.rows();
    MatrixXd L(2 * d, 2 * d);
    L << Pi / (1 + w), SY, SY.transpose(), Pi;
    Rng rng(10);
    double schur = 1e300, young = -1e300;
    for (int i = 0; i < 1000; ++i) {
      const VectorXd z = rng.uniform(r.aug.state_box.lower, r.aug.state_box.upper);
      // Block form along (z, -P SY^T z), where it equals the Schur complement.
      VectorXd v(2 * d);
      v << z, -(P * SY.transpose() * z);
      v /= v.norm();
      schur = std::min(schur, v.dot(L * v));
      // Reduced form: (1+w) |SY P z|_P^2 <= |z|_P^2.
      const VectorXd lin = SY * P * z;
      schur = std::min(schur, (z.dot(P * z) - (1 + w) * lin.dot(P * lin)) / (1 + z.dot(P * z)));
      const VectorXd F = r.aug.features(z);
      const VectorXd next = r.aug.A_aug * F + r.aug.B_aug * (r.ctrl.K * F);
      const VectorXd nl = G * r.aug.psi(z);
      const double rhs = (1 + w) * lin.dot(P * lin) + (1 + 1 / w) * nl.dot(P * nl);
      young = std::max(young, (next.dot(P * next) - rhs) / (1 + rhs));
    }
    const double reduced = min_eig(P - (1 + w) * P * SY.transpose() * P * SY * P);
    const double block = min_eig(L);
    const bool ok = schur >= -1e-6 && young <= 1e-6 && (block >= -1e-6) == (reduced >= -1e-6);
    return std::pair{ok, fmt("min Schur form = %.3g, max Young excess = %.3g, lambda_min LMI = %.3g",
                             schur, young, block)};
  });

  criterion(11, "case 2 scalability", [&] {
    if (!R.syn2 || !R.ver2) return std::pair{false, "exception: " + case2_error};
    const Certificate& c = R.syn2->cert;
    const DecrementResult& d = R.ver2->decrement;
    // Per-coordinate input bands, for information only.
    std::string per = "n/a";
    try {
      RunConfig pc = R.c2;
      pc.augmentation.input_band = InputBand::PerCoordinate;
      per = horizon_str(run_synthesize(pc).cert.horizon);
    } catch (const Error& e) {
      per = std::string("error (") + to_string(e.kind()) + ")";
    }
    const double total = R.syn2_s + R.ver2->report["timing"]["decrement_seconds"].get<double>();
    const bool ok = !c.horizon.infinite && c.horizon.steps >= 100 && d.sampled && d.points == 1'000'000 &&
                    d.domain_errors == 0 && d.max_value <= 1e-6 && total <= 300;
    return std::pair{ok, fmt("T = %s (per-coordinate bands: %s), sampled decrement max = %.6g over %lld "
                             "points (%.2f s)",
                             horizon_str(c.horizon).c_str(), per.c_str(), d.max_value,
                             static_cast<long long>(d.points), total)};
  });

  criterion(12, "determinism of reports", [&] {
    if (!R.syn1 || !R.ver1 || !R.scn1 || !R.syn2 || !R.ver2) {
      return std::pair{false, std::string("missing earlier results")};
    }
    int same = 0;
    const SynthesisRun s1 = run_synthesize(R.c1);
    same += without_timing(s1.report) == without_timing(R.syn1->report);
    same += without_timing(run_verify(R.c1, s1.cert, s1.ctrl).report) == without_timing(R.ver1->report);
    same += without_timing(run_scenario(R.c1).report) == without_timing(R.scn1->report);
    const SynthesisRun s2 = run_synthesize(R.c2);
    same += without_timing(s2.report) == without_timing(R.syn2->report);
    same += without_timing(run_verify(R.c2, s2.cert, s2.ctrl).report) == without_timing(R.ver2->report);
    return std::pair{same == 5, fmt("%d of 5 reports identical", same)};
  });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
