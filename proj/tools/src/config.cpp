#include "geonet/cli/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "geonet/errors.hpp"

namespace geonet::cli {
namespace {

using nlohmann::json;

void check_object(const json& j, const std::string& where, std::initializer_list<const char*> allowed,
                  std::initializer_list<const char*> required = {}) {
  if (!j.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.contains(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
  for (const char* key : required) {
    if (!j.contains(key)) {
      throw ConfigError(where + ": missing required key '" + std::string(key) + "'");
    }
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) {
    return fallback;
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <class T>
std::optional<T> get_optional(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) {
    return std::nullopt;
  }
  return get<T>(j, key, where, T{});
}

double positive(double v, const std::string& what) {
  if (!(v > 0.0)) {
    throw ConfigError(what + " must be positive");
  }
  return v;
}

void parse_model(const json& j, ExperimentConfig& c) {
  const std::string kind = get<std::string>(j, "kind", "model", "");
  if (kind == "sphere") {
    check_object(j, "model", {"kind", "n", "radius"}, {"kind", "n"});
  } else if (kind == "flat_torus") {
    check_object(j, "model", {"kind", "periods"}, {"kind", "periods"});
  } else {
    throw ConfigError("model.kind must be 'sphere' or 'flat_torus'");
  }
  c.model = ManifoldModel::from_json(j);
}

void parse_density(const json& j, ExperimentConfig& c) {
  check_object(j, "density", {"kind", "amplitude"}, {"kind"});
  c.density = DensitySpec::from_json(j);
}

void parse_noise(const json& j, ExperimentConfig& c) {
  check_object(j, "noise", {"family", "sigma", "scale"}, {"family"});
  c.noise = NoiseSpec::from_json(j);
}

void parse_mask(const json& j, ExperimentConfig& c) {
  check_object(j, "mask", {"profile", "phi0", "decay_length", "range", "c1", "c2", "anisotropy", "H"}, {"profile"});
  c.mask = MaskSpec::from_json(j);
}

void parse_split(const json& j, ExperimentConfig& c) {
  check_object(j, "split", {"N0", "N1", "N2"}, {"N0", "N1", "N2"});
  NetSplit s{get<std::size_t>(j, "N0", "split", 0), get<std::size_t>(j, "N1", "split", 0),
             get<std::size_t>(j, "N2", "split", 0)};
  s.validate();
  c.split = s;
}

void parse_sizes(const json& j, ExperimentConfig& c) {
  check_object(j, "sizes", {"C3", "C10", "C15"});
  c.sizes.C3 = positive(get<double>(j, "C3", "sizes", 1.0), "sizes.C3");
  c.sizes.C10 = positive(get<double>(j, "C10", "sizes", 1.0), "sizes.C10");
  c.sizes.C15 = positive(get<double>(j, "C15", "sizes", 1.0), "sizes.C15");
}

void parse_ledger(const json& j, ExperimentConfig& c) {
  check_object(j, "ledger", {"eps1", "delta1", "theta", "c5", "rho_rule", "allow_rho_above_r1", "delta"});
  ParameterInputs& in = c.ledger.inputs;
  in.eps1 = get<double>(j, "eps1", "ledger", in.eps1);
  in.delta1 = get<double>(j, "delta1", "ledger", in.delta1);
  in.theta = get<double>(j, "theta", "ledger", in.theta);
  in.delta = get<double>(j, "delta", "ledger", in.delta);
  in.allow_rho_above_r1 = get<bool>(j, "allow_rho_above_r1", "ledger", false);
  if (j.contains("c5")) {
    if (j["c5"].is_string()) {
      if (j["c5"].get<std::string>() != "calibrate") {
        throw ConfigError("ledger.c5 must be a number or \"calibrate\"");
      }
      c.ledger.calibrate_c5 = true;
    } else {
      in.c5 = get<double>(j, "c5", "ledger", in.c5);
    }
  }
  const std::string rule = get<std::string>(j, "rho_rule", "ledger", "cascade");
  if (rule == "cascade") {
    in.rho_rule = RhoRule::kCascade;
  } else if (rule == "matched_accuracy") {
    in.rho_rule = RhoRule::kMatchedAccuracy;
  } else {
    throw ConfigError("ledger.rho_rule must be 'cascade' or 'matched_accuracy'");
  }
}

void parse_oracle(const json& j, ExperimentConfig& c) {
  check_object(j, "oracle", {"M_int", "M_outer", "quadrature", "budget"});
  c.oracle.M_int = get<std::size_t>(j, "M_int", "oracle", c.oracle.M_int);
  c.oracle.M_outer = get<std::size_t>(j, "M_outer", "oracle", c.oracle.M_outer);
  c.oracle.quadrature = get<bool>(j, "quadrature", "oracle", c.oracle.quadrature);
  c.oracle.budget = get<std::size_t>(j, "budget", "oracle", c.oracle.budget);
  if (c.oracle.M_int == 0 || c.oracle.M_outer == 0) {
    throw ConfigError("oracle sample counts must be positive");
  }
}

void parse_refine(const json& j, ExperimentConfig& c) {
  check_object(j, "refine",
               {"source", "delta_hat", "r_hat", "K", "budget", "C1", "C4", "charts", "dedupe", "max_grid"});
  RefineConfig& r = c.refine;
  const std::string source = get<std::string>(j, "source", "refine", "dapp");
  if (source == "dapp") {
    r.source = RefineConfig::Source::kDapp;
  } else if (source == "perturbed_truth") {
    r.source = RefineConfig::Source::kPerturbedTruth;
  } else {
    throw ConfigError("refine.source must be 'dapp' or 'perturbed_truth'");
  }
  r.delta_hat = positive(get<double>(j, "delta_hat", "refine", r.delta_hat), "refine.delta_hat");
  r.r_hat = get_optional<double>(j, "r_hat", "refine");
  r.K = get_optional<double>(j, "K", "refine");
  if (r.r_hat && r.K) {
    throw ConfigError("refine: give r_hat or K, not both");
  }
  if (r.r_hat) {
    positive(*r.r_hat, "refine.r_hat");
  }
  if (r.K) {
    positive(*r.K, "refine.K");
  }
  r.options.budget = get<std::size_t>(j, "budget", "refine", r.options.budget);
  r.options.C1 = positive(get<double>(j, "C1", "refine", r.options.C1), "refine.C1");
  r.C4 = positive(get<double>(j, "C4", "refine", r.C4), "refine.C4");
  r.options.charts = get<std::vector<std::size_t>>(j, "charts", "refine", {});
  r.options.dedupe = get<bool>(j, "dedupe", "refine", true);
  r.options.max_grid = get<std::size_t>(j, "max_grid", "refine", r.options.max_grid);
}

void parse_verify(const json& j, ExperimentConfig& c) {
  check_object(j, "verify", {"target", "bound", "max_violation_rate", "net_delta"});
  const std::string bound = get<std::string>(j, "bound", "verify", "eps1");
  if (bound == "eps1") {
    c.verify.bound = VerifyConfig::Bound::kEps1;
  } else if (bound == "near_pair") {
    c.verify.bound = VerifyConfig::Bound::kNearPair;
  } else {
    throw ConfigError("verify.bound must be 'eps1' or 'near_pair'");
  }
  const std::string target = get<std::string>(j, "target", "verify", "dapp");
  if (target == "dapp") {
    c.verify.target = VerifyConfig::Target::kDapp;
  } else if (target == "observations") {
    c.verify.target = VerifyConfig::Target::kObservations;
  } else {
    throw ConfigError("verify.target must be 'dapp' or 'observations'");
  }
  c.verify.max_violation_rate = get<double>(j, "max_violation_rate", "verify", 0.0);
  if (!(c.verify.max_violation_rate >= 0.0 && c.verify.max_violation_rate <= 1.0)) {
    throw ConfigError("verify.max_violation_rate must lie in [0, 1]");
  }
  c.verify.net_delta = get_optional<double>(j, "net_delta", "verify");
}

void parse_calibrate(const json& j, ExperimentConfig& c) {
  check_object(j, "calibrate", {"constants", "seeds", "target", "factor", "max_steps", "c5_pairs"});
  CalibrateConfig& k = c.calibrate;
  k.constants = get<std::vector<std::string>>(j, "constants", "calibrate", {});
  for (const auto& name : k.constants) {
    if (name != "C3" && name != "C10" && name != "C15") {
      throw ConfigError("calibrate.constants entries must be C3, C10 or C15");
    }
  }
  k.seeds = get<std::size_t>(j, "seeds", "calibrate", k.seeds);
  k.target = get_optional<double>(j, "target", "calibrate");
  k.factor = get<double>(j, "factor", "calibrate", k.factor);
  k.max_steps = get<int>(j, "max_steps", "calibrate", k.max_steps);
  k.c5_pairs = get<std::size_t>(j, "c5_pairs", "calibrate", k.c5_pairs);
  if (k.seeds == 0 || k.max_steps <= 0 || k.c5_pairs == 0) {
    throw ConfigError("calibrate: seeds, max_steps and c5_pairs must be positive");
  }
}

}  // namespace

RefinementScales RefineConfig::scales(int n) const {
  if (r_hat) {
    return make_scales_with_radius(delta_hat, *r_hat, n);
  }
  if (K) {
    return make_scales(delta_hat, *K, n);
  }
  throw ConfigError("refine needs r_hat or K");
}

NetSplit ExperimentConfig::resolved_split() const {
  if (split) {
    return *split;
  }
  const ParameterInputs& in = ledger.inputs;
  return sample_sizes(model.dimension(), in.eps1, in.delta1, in.theta, sizes, model.diameter());
}

nlohmann::json ExperimentConfig::to_json() const {
  json j = {{"schema_version", kSchemaVersion},
            {"seed", seed},
            {"model", model.to_json()},
            {"density", density.to_json()},
            {"noise", noise.to_json()},
            {"mask", mask.to_json()}};
  if (split) {
    j["split"] = split->to_json();
  } else {
    j["sizes"] = {{"C3", sizes.C3}, {"C10", sizes.C10}, {"C15", sizes.C15}};
  }
  const ParameterInputs& in = ledger.inputs;
  j["ledger"] = {{"eps1", in.eps1},
                 {"delta1", in.delta1},
                 {"theta", in.theta},
                 {"delta", in.delta},
                 {"rho_rule", in.rho_rule == RhoRule::kCascade ? "cascade" : "matched_accuracy"},
                 {"allow_rho_above_r1", in.allow_rho_above_r1}};
  if (ledger.calibrate_c5) {
    j["ledger"]["c5"] = "calibrate";
  } else {
    j["ledger"]["c5"] = in.c5;
  }
  return j;
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  check_object(j, "config",
               {"schema_version", "seed", "output", "model", "density", "noise", "mask", "split", "sizes", "ledger",
                "oracle", "refine", "verify", "calibrate"},
               {"schema_version", "model"});
  const int version = get<int>(j, "schema_version", "config", 0);
  if (version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  ExperimentConfig c;
  c.seed = get<std::uint64_t>(j, "seed", "config", 0);
  c.output = get<std::string>(j, "output", "config", c.output.string());
  parse_model(j["model"], c);
  if (j.contains("density")) {
    parse_density(j["density"], c);
  }
  if (j.contains("noise")) {
    parse_noise(j["noise"], c);
  }
  if (j.contains("mask")) {
    parse_mask(j["mask"], c);
  }
  if (j.contains("split") && j.contains("sizes")) {
    throw ConfigError("config: give split or sizes, not both");
  }
  if (j.contains("split")) {
    parse_split(j["split"], c);
  }
  if (j.contains("sizes")) {
    parse_sizes(j["sizes"], c);
  }
  if (j.contains("ledger")) {
    parse_ledger(j["ledger"], c);
  }
  if (j.contains("oracle")) {
    parse_oracle(j["oracle"], c);
  }
  if (j.contains("refine")) {
    parse_refine(j["refine"], c);
  }
  if (j.contains("verify")) {
    parse_verify(j["verify"], c);
  }
  if (j.contains("calibrate")) {
    parse_calibrate(j["calibrate"], c);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open config " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace geonet::cli
