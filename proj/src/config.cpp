#include "acbc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "acbc/error.hpp"

namespace acbc {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::Config, where + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) fail(where, "unknown key '" + k + "'");
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

// A number or a "p/q" fraction string.
double fraction(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) fail(where, "expected a number or a \"p/q\" string");
  const std::string s = j.get<std::string>();
  const auto slash = s.find('/');
  char* end = nullptr;
  const double p = std::strtod(s.c_str(), &end);
  if (slash == std::string::npos) {
    if (*end != '\0' || end == s.c_str()) fail(where, "bad number '" + s + "'");
    return p;
  }
  if (end != s.c_str() + slash) fail(where, "bad fraction '" + s + "'");
  const char* qs = s.c_str() + slash + 1;
  const double q = std::strtod(qs, &end);
  if (*end != '\0' || end == qs || q == 0.0) fail(where, "bad fraction '" + s + "'");
  return p / q;
}

std::int64_t integer(const json& j, const std::string& where, std::int64_t lo) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < lo) fail(where, "must be at least " + std::to_string(lo));
  return v;
}

std::uint64_t seed_value(const json& j, const std::string& where) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    fail(where, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) fail(where, "expected true or false");
  return j.get<bool>();
}

std::vector<double> vec(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], where));
  return v;
}

BoxSpec box(const json& j, const std::string& where) {
  only_keys(j, where, {"lower", "upper"});
  if (!j.contains("lower") || !j.contains("upper")) fail(where, "needs lower and upper");
  BoxSpec b{vec(j["lower"], where + ".lower"), vec(j["upper"], where + ".upper")};
  if (b.lower.size() != b.upper.size()) fail(where, "lower and upper differ in length");
  return b;
}

std::vector<BoxSpec> boxes(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array of boxes");
  std::vector<BoxSpec> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(box(j[i], where + "[" + std::to_string(i) + "]"));
  return v;
}

template <class E>
E choice(const json& j, const std::string& where, const std::vector<std::pair<std::string, E>>& opts) {
  if (!j.is_string()) fail(where, "expected a string");
  const std::string s = j.get<std::string>();
  for (const auto& [name, e] : opts) {
    if (s == name) return e;
  }
  std::string list;
  for (const auto& o : opts) list += (list.empty() ? "" : ", ") + o.first;
  fail(where, "'" + s + "' is not one of " + list);
}

const std::vector<std::pair<std::string, InputBand>> kBands = {
    {"per_coordinate", InputBand::PerCoordinate}, {"joint", InputBand::Joint}};
const std::vector<std::pair<std::string, LevelMode>> kLevels = {
    {"optimized", LevelMode::Optimized}, {"conservative", LevelMode::Conservative}};
const std::vector<std::pair<std::string, NormKind>> kNorms = {
    {"spectral", NormKind::Spectral}, {"frobenius", NormKind::Frobenius}};
const std::vector<std::pair<std::string, ScenarioPath>> kPaths = {
    {"none", ScenarioPath::None},
    {"deterministic", ScenarioPath::Deterministic},
    {"probabilistic", ScenarioPath::Probabilistic}};
const std::vector<std::pair<std::string, Coupling>> kCouplings = {
    {"auto", Coupling::Auto}, {"never", Coupling::Never}, {"always", Coupling::Always}};

template <class E>
std::string name_of(E e, const std::vector<std::pair<std::string, E>>& opts) {
  for (const auto& [name, v] : opts) {
    if (v == e) return name;
  }
  return "";
}

PlantSpec parse_plant(const json& j) {
  only_keys(j, "plant", {"n", "m", "dictionary", "A", "regions", "input_bounds"});
  for (const char* k : {"n", "m", "dictionary", "A", "regions", "input_bounds"}) {
    if (!j.contains(k)) fail("plant", std::string("missing '") + k + "'");
  }
  PlantSpec p;
  p.n = static_cast<int>(integer(j["n"], "plant.n", 1));
  p.m = static_cast<int>(integer(j["m"], "plant.m", 1));
  const json& d = j["dictionary"];
  if (!d.is_array()) fail("plant.dictionary", "expected an array of strings");
  for (const auto& t : d) {
    if (!t.is_string()) fail("plant.dictionary", "expected an array of strings");
    p.dictionary.push_back(t.get<std::string>());
  }
  const json& a = j["A"];
  if (!a.is_array() || static_cast<int>(a.size()) != p.n) {
    fail("plant.A", "expected n rows");
  }
  for (std::size_t r = 0; r < a.size(); ++r) {
    p.A.push_back(vec(a[r], "plant.A[" + std::to_string(r) + "]"));
    if (p.A.back().size() != p.dictionary.size()) {
      fail("plant.A[" + std::to_string(r) + "]", "row length differs from the dictionary size");
    }
  }
  const json& reg = j["regions"];
  only_keys(reg, "plant.regions", {"state", "initial", "unsafe"});
  for (const char* k : {"state", "initial", "unsafe"}) {
    if (!reg.contains(k)) fail("plant.regions", std::string("missing '") + k + "'");
  }
  p.state = box(reg["state"], "plant.regions.state");
  p.initial = boxes(reg["initial"], "plant.regions.initial");
  p.unsafe = boxes(reg["unsafe"], "plant.regions.unsafe");
  p.input_bounds = vec(j["input_bounds"], "plant.input_bounds");
  if (static_cast<int>(p.input_bounds.size()) != p.m) fail("plant.input_bounds", "expected m entries");
  return p;
}

json box_json(const BoxSpec& b) { return {{"lower", b.lower}, {"upper", b.upper}}; }

}  // namespace

RunConfig parse_config(const json& j) {
  only_keys(j, "config",
            {"format_version", "plant", "augmentation", "experiment", "synthesis", "scenario",
             "verification"});
  if (j.contains("format_version") &&
      integer(j["format_version"], "format_version", 1) != kConfigFormatVersion) {
    fail("format_version", "unsupported version");
  }
  if (!j.contains("plant")) fail("config", "missing 'plant'");
  RunConfig c;
  c.plant = parse_plant(j["plant"]);

  if (j.contains("augmentation")) {
    const json& a = j["augmentation"];
    only_keys(a, "augmentation", {"eps1", "eps2", "input_band"});
    if (a.contains("eps1")) c.augmentation.eps1 = fraction(a["eps1"], "augmentation.eps1");
    if (a.contains("eps2")) c.augmentation.eps2 = fraction(a["eps2"], "augmentation.eps2");
    if (a.contains("input_band")) {
      c.augmentation.input_band = choice(a["input_band"], "augmentation.input_band", kBands);
    }
  }
  if (j.contains("experiment")) {
    const json& e = j["experiment"];
    only_keys(e, "experiment", {"samples", "excitation", "seed", "richness_retries"});
    if (e.contains("samples")) c.experiment.samples = static_cast<int>(integer(e["samples"], "experiment.samples", 0));
    if (e.contains("excitation")) c.experiment.excitation = box(e["excitation"], "experiment.excitation");
    if (e.contains("seed")) c.experiment.seed = seed_value(e["seed"], "experiment.seed");
    if (e.contains("richness_retries")) {
      c.experiment.richness_retries = static_cast<int>(integer(e["richness_retries"], "experiment.richness_retries", 0));
    }
  }
  if (j.contains("synthesis")) {
    const json& s = j["synthesis"];
    only_keys(s, "synthesis", {"varpi", "grid_res", "ca_budget", "sound", "levels", "norm", "residual_checks"});
    if (s.contains("varpi")) c.synthesis.varpi = number(s["varpi"], "synthesis.varpi");
    if (s.contains("grid_res")) c.synthesis.grid_res = static_cast<int>(integer(s["grid_res"], "synthesis.grid_res", 2));
    if (s.contains("ca_budget")) c.synthesis.ca_budget = integer(s["ca_budget"], "synthesis.ca_budget", 1);
    if (s.contains("sound")) c.synthesis.sound = boolean(s["sound"], "synthesis.sound");
    if (s.contains("levels")) c.synthesis.levels = choice(s["levels"], "synthesis.levels", kLevels);
    if (s.contains("norm")) c.synthesis.norm = choice(s["norm"], "synthesis.norm", kNorms);
    if (s.contains("residual_checks")) {
      c.synthesis.residual_checks = integer(s["residual_checks"], "synthesis.residual_checks", 0);
    }
    if (!(c.synthesis.varpi > 0.0)) fail("synthesis.varpi", "must be positive");
  }
  if (j.contains("scenario")) {
    const json& s = j["scenario"];
    only_keys(s, "scenario",
              {"path", "epsilon", "beta", "samples", "grid_per_axis", "rounds", "seed",
               "audit_samples", "coupling", "contraction_margin"});
    ScenarioSpec& sc = c.scenario;
    if (s.contains("path")) sc.path = choice(s["path"], "scenario.path", kPaths);
    if (s.contains("epsilon")) sc.epsilon = number(s["epsilon"], "scenario.epsilon");
    if (s.contains("beta")) sc.beta = number(s["beta"], "scenario.beta");
    if (s.contains("samples")) sc.samples = integer(s["samples"], "scenario.samples", 0);
    if (s.contains("grid_per_axis")) sc.grid_per_axis = static_cast<int>(integer(s["grid_per_axis"], "scenario.grid_per_axis", 2));
    if (s.contains("rounds")) sc.rounds = static_cast<int>(integer(s["rounds"], "scenario.rounds", 1));
    if (s.contains("seed")) sc.seed = seed_value(s["seed"], "scenario.seed");
    if (s.contains("audit_samples")) sc.audit_samples = integer(s["audit_samples"], "scenario.audit_samples", 0);
    if (s.contains("coupling")) sc.coupling = choice(s["coupling"], "scenario.coupling", kCouplings);
    if (s.contains("contraction_margin")) {
      sc.contraction_margin = number(s["contraction_margin"], "scenario.contraction_margin");
    }
    if (!(sc.epsilon > 0.0 && sc.epsilon < 1.0)) fail("scenario.epsilon", "must lie in (0, 1)");
    if (!(sc.beta > 0.0 && sc.beta < 1.0)) fail("scenario.beta", "must lie in (0, 1)");
    if (!(sc.contraction_margin >= 0.0)) fail("scenario.contraction_margin", "must be >= 0");
  }
  if (j.contains("verification")) {
    const json& v = j["verification"];
    only_keys(v, "verification",
              {"grid_per_axis", "samples", "level_samples", "runs", "horizon", "record_runs", "seed"});
    VerificationSpec& vs = c.verification;
    if (v.contains("grid_per_axis")) vs.grid_per_axis = static_cast<int>(integer(v["grid_per_axis"], "verification.grid_per_axis", 0));
    if (v.contains("samples")) vs.samples = integer(v["samples"], "verification.samples", 1);
    if (v.contains("level_samples")) vs.level_samples = integer(v["level_samples"], "verification.level_samples", 0);
    if (v.contains("runs")) vs.runs = static_cast<int>(integer(v["runs"], "verification.runs", 0));
    if (v.contains("horizon")) vs.horizon = integer(v["horizon"], "verification.horizon", 0);
    if (v.contains("record_runs")) vs.record_runs = static_cast<int>(integer(v["record_runs"], "verification.record_runs", 0));
    if (v.contains("seed")) vs.seed = seed_value(v["seed"], "verification.seed");
    if (vs.grid_per_axis == 1) fail("verification.grid_per_axis", "needs 0 (auto) or at least 2");
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json config_to_json(const RunConfig& c) {
  json j;
  j["format_version"] = kConfigFormatVersion;
  json regions = {{"state", box_json(c.plant.state)}, {"initial", json::array()}, {"unsafe", json::array()}};
  for (const auto& b : c.plant.initial) regions["initial"].push_back(box_json(b));
  for (const auto& b : c.plant.unsafe) regions["unsafe"].push_back(box_json(b));
  j["plant"] = {{"n", c.plant.n},
                {"m", c.plant.m},
                {"dictionary", c.plant.dictionary},
                {"A", c.plant.A},
                {"regions", regions},
                {"input_bounds", c.plant.input_bounds}};
  j["augmentation"] = {{"eps1", c.augmentation.eps1},
                       {"eps2", c.augmentation.eps2},
                       {"input_band", name_of(c.augmentation.input_band, kBands)}};
  j["experiment"] = {{"samples", c.experiment.samples},
                     {"seed", c.experiment.seed},
                     {"richness_retries", c.experiment.richness_retries}};
  if (!c.experiment.excitation.lower.empty()) {
    j["experiment"]["excitation"] = box_json(c.experiment.excitation);
  }
  const SynthesisSpec& s = c.synthesis;
  j["synthesis"] = {{"varpi", s.varpi},
                    {"grid_res", s.grid_res},
                    {"ca_budget", s.ca_budget},
                    {"sound", s.sound},
                    {"levels", name_of(s.levels, kLevels)},
                    {"norm", name_of(s.norm, kNorms)},
                    {"residual_checks", s.residual_checks}};
  const ScenarioSpec& sc = c.scenario;
  j["scenario"] = {{"path", name_of(sc.path, kPaths)},
                   {"epsilon", sc.epsilon},
                   {"beta", sc.beta},
                   {"samples", sc.samples},
                   {"grid_per_axis", sc.grid_per_axis},
                   {"rounds", sc.rounds},
                   {"seed", sc.seed},
                   {"audit_samples", sc.audit_samples},
                   {"coupling", name_of(sc.coupling, kCouplings)},
                   {"contraction_margin", sc.contraction_margin}};
  const VerificationSpec& v = c.verification;
  j["verification"] = {{"grid_per_axis", v.grid_per_axis},
                       {"samples", v.samples},
                       {"level_samples", v.level_samples},
                       {"runs", v.runs},
                       {"horizon", v.horizon},
                       {"record_runs", v.record_runs},
                       {"seed", v.seed}};
  return j;
}

void override_seed(RunConfig& c, std::uint64_t seed) {
  c.experiment.seed = seed;
  c.scenario.seed = seed;
  c.verification.seed = seed;
}

Box to_box(const BoxSpec& b) {
  return Box(Eigen::Map<const Eigen::VectorXd>(b.lower.data(), static_cast<Eigen::Index>(b.lower.size())),
             Eigen::Map<const Eigen::VectorXd>(b.upper.data(), static_cast<Eigen::Index>(b.upper.size())));
}

PlantModel build_plant(const RunConfig& c) {
  const PlantSpec& p = c.plant;
  PlantModel plant;
  plant.dictionary = Dictionary::parse(p.n, p.m, p.dictionary);
  plant.A.resize(p.n, static_cast<Eigen::Index>(p.dictionary.size()));
  for (int r = 0; r < p.n; ++r) {
    for (std::size_t k = 0; k < p.A[r].size(); ++k) plant.A(r, static_cast<Eigen::Index>(k)) = p.A[r][k];
  }
  try {
    plant.regions.state_box = to_box(p.state);
    for (const auto& b : p.initial) plant.regions.initial_boxes.push_back(to_box(b));
    for (const auto& b : p.unsafe) plant.regions.unsafe_boxes.push_back(to_box(b));
    plant.inputs = InputConstraints::box(
        Eigen::Map<const Eigen::VectorXd>(p.input_bounds.data(), p.m));
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, std::string("plant regions: ") + e.what());
  }
  plant.validate();
  return plant;
}

AugmentedModel build_augmented(const RunConfig& c, const PlantModel& plant) {
  return augment(plant, c.augmentation.eps1, c.augmentation.eps2, c.augmentation.input_band);
}

}  // namespace acbc
