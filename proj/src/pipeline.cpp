#include "acbc/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "acbc/rng.hpp"
#include "acbc/scenario.hpp"

namespace acbc {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io:
      return kExitUsage;
    case ErrorKind::InvalidArgument:
    case ErrorKind::Syntax:
    case ErrorKind::Dimension:
    case ErrorKind::Config:
      return kExitConfig;
    case ErrorKind::Richness:
      return kExitRichness;
    case ErrorKind::Infeasible:
      return kExitInfeasible;
    case ErrorKind::LevelSeparation:
      return kExitLevelSeparation;
    case ErrorKind::Numerical:
      return kExitNumerical;
    case ErrorKind::Domain:
      return kExitDomain;
  }
  return kExitUsage;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

json mat(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vec(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

MatrixXd mat_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw Error(ErrorKind::Config, what + ": expected a matrix");
  }
  MatrixXd m(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != j[0].size()) {
      throw Error(ErrorKind::Config, what + ": ragged matrix");
    }
    for (std::size_t c = 0; c < j[r].size(); ++c) {
      if (!j[r][c].is_number()) throw Error(ErrorKind::Config, what + ": non-numeric entry");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

json horizon_json(const Horizon& h) {
  return h.infinite ? json{{"infinite", true}, {"steps", nullptr}}
                    : json{{"infinite", false}, {"steps", h.steps}};
}

json solver_json(const sdp::SdpSolution& s) {
  return {{"status", sdp::to_string(s.status)},
          {"message", s.message},
          {"iterations", s.iterations},
          {"objective", s.objective},
          {"min_eig", s.min_eig},
          {"eq_residual", s.eq_residual},
          {"primal_infeas", s.primal_infeas},
          {"dual_infeas", s.dual_infeas},
          {"rel_gap", s.rel_gap}};
}

struct Prefix {
  PlantModel plant;
  AugmentedModel aug;
  TrajectoryData traj;
  DataMatrices dm;
  Z2Result z2;
  MatrixXd G;
  int attempts = 0;
};

// Everything up to and including the Z2 program, shared by both routes.
Prefix prefix(const RunConfig& c, json& report, json& timing) {
  Prefix p;
  auto t0 = Clock::now();
  p.plant = build_plant(c);
  p.aug = build_augmented(c, p.plant);
  const int N = p.aug.N();
  report["augmented"] = {{"dim", p.aug.dim()}, {"N", N}, {"eps1", p.aug.eps1}, {"eps2", p.aug.eps2}};

  Excitation ex = default_excitation(p.aug);
  if (!c.experiment.excitation.lower.empty()) {
    const Box b = to_box(c.experiment.excitation);
    if (b.dim() != p.aug.m) throw Error(ErrorKind::Config, "excitation box must have m entries");
    ex = {b.lower, b.upper};
  }
  int T = c.experiment.samples > 0 ? c.experiment.samples : N + 1;
  if (T <= N) {
    std::ostringstream os;
    os << "data is not rich: " << T << " samples cannot give rank N = " << N
       << " with T >= N + 1";
    throw Error(ErrorKind::Richness, os.str());
  }
  for (p.attempts = 1;; ++p.attempts) {
    p.traj = collect_trajectory(p.aug, T, ex, c.experiment.seed);
    p.dm = assemble_M(p.traj, p.aug.dictionary);
    if (check_richness(p.dm)) break;
    if (p.attempts > c.experiment.richness_retries) {
      std::ostringstream os;
      os << "data is not rich: rank(M) = " << p.dm.rank << " < N = " << N << " after "
         << p.attempts << " trajectories (last T = " << T << ")";
      throw Error(ErrorKind::Richness, os.str());
    }
    T *= 2;
  }
  report["data"] = {{"T", p.traj.T},
                    {"seed", p.traj.seed},
                    {"attempts", p.attempts},
                    {"rank", p.dm.rank},
                    {"sigma_min", p.dm.sigma_min},
                    {"sigma_max", p.dm.sigma_max}};
  timing["collect_seconds"] = seconds_since(t0);

  t0 = Clock::now();
  p.z2 = solve_z2(p.dm, p.traj.S_plus, p.aug.n, p.aug.m, c.synthesis.norm);
  p.G = p.z2.Z2.size() ? MatrixXd(p.traj.S_plus * p.z2.Z2) : MatrixXd::Zero(p.aug.dim(), 0);
  report["z2"] = {{"norm", p.z2.norm}, {"eq_residual", p.z2.eq_residual},
                  {"solver", solver_json(p.z2.solution)}};
  timing["z2_seconds"] = seconds_since(t0);
  return p;
}

Levels levels_for(const RunConfig& c, const MatrixXd& P, const AugmentedModel& aug) {
  return c.synthesis.levels == LevelMode::Optimized
             ? compute_levels(P, aug.initial_boxes, aug.unsafe_boxes)
             : compute_levels_conservative(P, aug.initial_boxes, aug.unsafe_boxes);
}

json levels_json(const Levels& L, LevelMode mode) {
  return {{"mode", mode == LevelMode::Optimized ? "optimized" : "conservative"},
          {"eta", L.eta},
          {"gamma", L.gamma},
          {"eta_argmax", vec(L.eta_arg)},
          {"gamma_argmin", vec(L.gamma_arg)}};
}

// Levels, horizon, controller and the closed-loop identity check.
void finish(const RunConfig& c, const Prefix& p, const MatrixXd& P, double c_a,
            const MatrixXd& Y, SynthesisRun& run, json& report) {
  const Levels L = levels_for(c, P, p.aug);
  report["levels"] = levels_json(L, c.synthesis.levels);
  run.cert.P = P;
  run.cert.eta = L.eta;
  run.cert.gamma = L.gamma;
  run.cert.c_a = c_a;
  run.cert.varpi = c.synthesis.varpi;
  run.cert.horizon = horizon(L.eta, L.gamma, c_a);
  run.Z1 = Y * P;
  run.Z2 = p.z2.Z2;
  run.ctrl = build_controller(p.traj.I, Y, P, p.z2.Z2);
  const double res = max_relative_closed_loop_residual(
      p.aug, run.ctrl, p.traj.S_plus, run.Z1, run.Z2, c.synthesis.residual_checks,
      substream_seed(c.experiment.seed, 2));
  report["closed_loop_identity"] = {{"points", c.synthesis.residual_checks},
                                    {"max_relative_residual", res}};
  report["certificate"] = {{"P", mat(P)},
                           {"eta", L.eta},
                           {"gamma", L.gamma},
                           {"c_a", c_a},
                           {"varpi", c.synthesis.varpi},
                           {"horizon", horizon_json(run.cert.horizon)}};
  report["controller"] = {{"K", mat(run.ctrl.K)}};
  run.plant = p.plant;
  run.aug = p.aug;
  run.traj = p.traj;
  run.dm = p.dm;
}

}  // namespace

double max_relative_closed_loop_residual(const AugmentedModel& aug, const DynamicController& ctrl,
                                         const MatrixXd& S_plus, const MatrixXd& Z1,
                                         const MatrixXd& Z2, std::int64_t count,
                                         std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::int64_t k = 0; k < count; ++k) {
    const VectorXd z = rng.uniform(aug.state_box.lower, aug.state_box.upper);
    const VectorXd F = aug.features(z);
    const double scale = (aug.A_aug * F + aug.B_aug * (ctrl.K * F)).norm() + 1.0;
    worst = std::max(worst, closed_loop_residual(aug, ctrl.K, S_plus, Z1, Z2, z) / scale);
  }
  return worst;
}

SynthesisRun run_synthesize(const RunConfig& c) {
  const auto t_start = Clock::now();
  SynthesisRun run;
  json report, timing;
  report["format_version"] = kReportFormatVersion;
  report["command"] = "synthesize";
  report["config"] = config_to_json(c);
  Prefix p = prefix(c, report, timing);
  const double varpi = c.synthesis.varpi;

  auto t0 = Clock::now();
  const BarrierResult b = solve_barrier(p.dm, p.traj.S_plus, varpi);
  report["barrier"] = {{"kappa", b.kappa},
                       {"lmi_min_eig", b.lmi_min_eig},
                       {"eq_residual", b.eq_residual},
                       {"solver", solver_json(b.solution)}};
  timing["barrier_seconds"] = seconds_since(t0);

  t0 = Clock::now();
  CaOptions co;
  co.grid_res = c.synthesis.grid_res;
  co.budget = c.synthesis.ca_budget;
  co.sound = c.synthesis.sound;
  co.seed = substream_seed(c.experiment.seed, 1);
  const CaResult ca = compute_ca(b.P, p.G, p.aug, varpi, co);
  report["decay"] = {{"c_a", ca.c_a},
                     {"max_residual_sq", ca.max_residual_sq},
                     {"argmax", vec(ca.argmax)},
                     {"sampled_seeds", ca.sampled},
                     {"sound", c.synthesis.sound},
                     {"lipschitz", ca.lipschitz},
                     {"delta", ca.delta}};
  finish(c, p, b.P, ca.c_a, b.Y, run, report);
  timing["levels_seconds"] = seconds_since(t0);
  timing["total_seconds"] = seconds_since(t_start);
  report["timing"] = timing;
  run.report = std::move(report);
  return run;
}

SynthesisRun run_scenario(const RunConfig& c) {
  const ScenarioSpec& sc = c.scenario;
  if (sc.path == ScenarioPath::None) {
    throw Error(ErrorKind::Config, "scenario.path is 'none'; choose deterministic or probabilistic");
  }
  const auto t_start = Clock::now();
  SynthesisRun run;
  json report, timing;
  report["format_version"] = kReportFormatVersion;
  report["command"] = "scenario";
  report["config"] = config_to_json(c);
  Prefix p = prefix(c, report, timing);
  const double varpi = c.synthesis.varpi;

  auto t0 = Clock::now();
  struct Attempt {
    ScpResult scp;
    json details;
    FixedPiResult y;
  };
  auto attempt = [&](const std::optional<Contraction>& contraction) {
    Attempt a;
    if (sc.path == ScenarioPath::Probabilistic) {
      ProbabilisticParams pp;
      pp.epsilon = sc.epsilon;
      pp.beta = sc.beta;
      pp.seed = sc.seed;
      pp.samples = sc.samples;
      const ProbabilisticResult r = solve_probabilistic(pp, p.G, p.aug, varpi, contraction);
      a.scp = r.scp;
      a.details = {{"path", "probabilistic"},
                   {"epsilon", r.params.epsilon},
                   {"beta", r.params.beta},
                   {"samples", r.params.samples},
                   {"required_samples", r.required},
                   {"seed", r.params.seed}};
    } else {
      DeterministicOptions o;
      o.grid_per_axis = sc.grid_per_axis;
      o.rounds = sc.rounds;
      o.contraction = contraction;
      const DeterministicResult r = solve_deterministic(p.G, p.aug, varpi, o);
      a.scp = r.scp;
      a.details = {{"path", "deterministic"},
                   {"grid_per_axis", r.grid_per_axis},
                   {"rounds_used", r.rounds_used},
                   {"samples", r.scp.samples},
                   {"lipschitz_estimate", r.lipschitz},
                   {"lipschitz_certified", false},
                   {"delta", r.delta},
                   {"check_passed", r.passed}};
      if (!r.passed) {
        std::ostringstream os;
        os << "deterministic check mu + L delta <= 0 failed after " << r.rounds_used
           << " rounds (L = " << r.lipschitz << ", delta = " << r.delta << ")";
        throw Error(ErrorKind::Infeasible, os.str());
      }
    }
    a.details["c_a"] = a.scp.c_a;
    a.details["mu"] = a.scp.mu;
    a.details["sample_max"] = a.scp.value;
    a.details["max_violation"] = a.scp.max_violation;
    a.details["solver"] = solver_json(a.scp.solution);
    a.y = solve_y_for_fixed_pi(p.dm, p.traj.S_plus, a.scp.P.inverse(), varpi);
    a.details["y_step"] = {{"feasible", a.y.feasible},
                           {"margin", a.y.margin},
                           {"lmi_min_eig", a.y.lmi_min_eig},
                           {"eq_residual", a.y.eq_residual}};
    return a;
  };

  std::optional<Contraction> contraction;
  auto coupled = [&] {
    const BarrierResult b = solve_barrier(p.dm, p.traj.S_plus, varpi);
    return Contraction{p.traj.S_plus * (b.Y * b.P), sc.contraction_margin};
  };
  if (sc.coupling == Coupling::Always) contraction = coupled();
  Attempt a = attempt(contraction);
  json tries = json::array({a.details});
  if (!a.y.feasible && sc.coupling == Coupling::Auto) {
    contraction = coupled();
    a = attempt(contraction);
    tries.push_back(a.details);
  }
  report["scenario"] = a.details;
  report["scenario"]["coupled"] = contraction.has_value();
  report["scenario"]["attempts"] = tries;
  timing["scenario_seconds"] = seconds_since(t0);
  if (!a.y.feasible) {
    throw Error(ErrorKind::Infeasible,
                "the scenario P admits no data-consistent Y (LMI margin " +
                    std::to_string(a.y.lmi_min_eig) +
                    "); re-run with a different varpi or seed");
  }

  t0 = Clock::now();
  finish(c, p, a.scp.P, a.scp.c_a, a.y.Y, run, report);
  const std::int64_t audit = sc.audit_samples;
  const double frac = violation_fraction(a.scp.P, a.scp.c_a, p.G, p.aug, varpi, audit,
                                         substream_seed(sc.seed, 1));
  report["audit"] = {{"samples", audit}, {"violation_fraction", frac}};
  timing["levels_seconds"] = seconds_since(t0);
  timing["total_seconds"] = seconds_since(t_start);
  report["timing"] = timing;
  run.report = std::move(report);
  return run;
}

VerificationRun run_verify(const RunConfig& c, const Certificate& cert,
                           const DynamicController& ctrl) {
  const auto t_start = Clock::now();
  const VerificationSpec& vs = c.verification;
  const PlantModel plant = build_plant(c);
  const AugmentedModel aug = build_augmented(c, plant);
  VerificationRun v;
  json report, timing;
  report["format_version"] = kReportFormatVersion;
  report["command"] = "verify";
  report["config"] = config_to_json(c);

  auto t0 = Clock::now();
  DecrementOptions dopt;
  dopt.grid_per_axis = vs.grid_per_axis;
  dopt.samples = vs.samples;
  dopt.seed = substream_seed(vs.seed, 1);
  v.decrement = check_decrement(aug, cert, ctrl, dopt);
  timing["decrement_seconds"] = seconds_since(t0);

  v.levels = check_levels(cert, aug.initial_boxes, aug.unsafe_boxes, vs.level_samples,
                          substream_seed(vs.seed, 2));

  std::int64_t T = vs.horizon;
  if (T == 0) {
    if (cert.horizon.infinite) {
      throw Error(ErrorKind::Config, "certificate horizon is infinite; set verification.horizon");
    }
    T = cert.horizon.steps;
  }
  t0 = Clock::now();
  RolloutOptions ro;
  ro.record_runs = vs.record_runs;
  ro.certificate = &cert;
  v.rollouts = rollout(plant, aug, ctrl, T, vs.runs, substream_seed(vs.seed, 3), ro);
  timing["rollout_seconds"] = seconds_since(t0);

  const bool dec_ok = v.decrement.max_value <= 1e-6 && v.decrement.domain_errors == 0;
  const RolloutStats& rs = v.rollouts;
  const bool roll_ok = rs.state_violations == 0 && rs.input_violations == 0 && rs.domain_errors == 0;
  v.pass = dec_ok && v.levels.ok() && roll_ok;

  report["decrement"] = {{"max_value", v.decrement.max_value},
                         {"argmax", vec(v.decrement.argmax)},
                         {"sampled", v.decrement.sampled},
                         {"grid_per_axis", v.decrement.grid_per_axis},
                         {"points", v.decrement.points},
                         {"domain_errors", v.decrement.domain_errors},
                         {"seed", dopt.seed},
                         {"tolerance", 1e-6},
                         {"pass", dec_ok}};
  report["levels"] = {{"initial_pass", v.levels.initial_ok},
                      {"unsafe_pass", v.levels.unsafe_ok},
                      {"max_on_initial", v.levels.max_initial},
                      {"min_on_unsafe", v.levels.min_unsafe},
                      {"eta", cert.eta},
                      {"gamma", cert.gamma},
                      {"points", v.levels.points}};
  report["rollouts"] = {{"runs", rs.runs},
                        {"horizon", rs.horizon},
                        {"state_violations", rs.state_violations},
                        {"input_violations", rs.input_violations},
                        {"domain_errors", rs.domain_errors},
                        {"bound_violations", rs.bound_violations},
                        {"level_crossings", rs.level_crossings},
                        {"max_bound_excess", rs.runs > 0 ? json(rs.max_bound_excess) : json(nullptr)},
                        {"recorded_runs", rs.trajectories.size()},
                        {"seed", substream_seed(vs.seed, 3)},
                        {"pass", roll_ok}};
  report["pass"] = v.pass;
  timing["total_seconds"] = seconds_since(t_start);
  report["timing"] = timing;
  v.report = std::move(report);
  return v;
}

json certificate_to_json(const Certificate& cert, const DynamicController& ctrl,
                         const Dictionary& plant_dict) {
  json terms = json::array();
  for (const TermExpr& t : plant_dict.terms()) terms.push_back(render_term(t));
  return {{"format_version", kCertificateFormatVersion},
          {"n", plant_dict.n()},
          {"m", plant_dict.m()},
          {"dictionary", terms},
          {"P", mat(cert.P)},
          {"eta", cert.eta},
          {"gamma", cert.gamma},
          {"c_a", cert.c_a},
          {"varpi", cert.varpi},
          {"horizon", horizon_json(cert.horizon)},
          {"K", mat(ctrl.K)}};
}

std::pair<Certificate, DynamicController> certificate_from_json(const json& j,
                                                                const PlantModel& plant) {
  try {
    if (j.at("format_version").get<int>() != kCertificateFormatVersion) {
      throw Error(ErrorKind::Config, "certificate: unsupported format_version");
    }
    if (j.at("n").get<int>() != plant.n() || j.at("m").get<int>() != plant.m()) {
      throw Error(ErrorKind::Config, "certificate: dimensions differ from the config plant");
    }
    const auto& terms = plant.dictionary.terms();
    const json& jt = j.at("dictionary");
    bool same = jt.size() == terms.size();
    for (std::size_t i = 0; same && i < terms.size(); ++i) {
      same = jt[i].get<std::string>() == render_term(terms[i]);
    }
    if (!same) throw Error(ErrorKind::Config, "certificate: dictionary differs from the config plant");
    Certificate cert;
    cert.P = mat_from(j.at("P"), "certificate P");
    cert.eta = j.at("eta").get<double>();
    cert.gamma = j.at("gamma").get<double>();
    cert.c_a = j.at("c_a").get<double>();
    cert.varpi = j.at("varpi").get<double>();
    const json& h = j.at("horizon");
    cert.horizon.infinite = h.at("infinite").get<bool>();
    if (!cert.horizon.infinite) cert.horizon.steps = h.at("steps").get<std::int64_t>();
    DynamicController ctrl{mat_from(j.at("K"), "certificate K")};
    const int d = plant.n() + plant.m();
    if (cert.P.rows() != d || cert.P.cols() != d) throw Error(ErrorKind::Config, "certificate: P shape");
    if (ctrl.K.rows() != plant.m() || ctrl.K.cols() != plant.dictionary.size()) {
      throw Error(ErrorKind::Config, "certificate: K shape");
    }
    return {cert, ctrl};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("certificate: ") + e.what());
  }
}

json without_timing(json report) {
  report.erase("timing");
  return report;
}

}  // namespace acbc
