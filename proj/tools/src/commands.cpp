#include "geonet/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>

#include "geonet/cli/experiment.hpp"
#include "geonet/csv.hpp"
#include "geonet/errors.hpp"

namespace geonet::cli {
namespace {

using nlohmann::json;

std::ostream& log_of(const CommandContext& ctx) {
  static std::ofstream null_stream;
  return ctx.log != nullptr ? *ctx.log : static_cast<std::ostream&>(null_stream);
}

void write_json(const std::filesystem::path& path, const json& j) {
  auto out = csv::open_output(path);
  out << j.dump(2) << '\n';
  if (!out) {
    throw InputError("failed writing " + path.string());
  }
}

json read_json(const std::filesystem::path& path) {
  auto in = csv::open_input(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::filesystem::path require(const CommandContext& ctx, const char* name, const char* producer) {
  const auto path = ctx.out / name;
  if (!std::filesystem::exists(path)) {
    throw InputError("missing " + path.string() + "; run `geonet " + producer + "` first");
  }
  return path;
}

ParameterLedger ledger_from_json(const json& j) {
  ParameterLedger l;
  try {
    l.n = j.at("n").get<int>();
    l.D = j.at("D").get<double>();
    l.sigma = j.at("sigma").get<double>();
    l.r1 = j.at("r1").get<double>();
    l.eps1 = j.at("eps1").get<double>();
    l.delta1 = j.at("delta1").get<double>();
    l.theta = j.at("theta").get<double>();
    l.rho = j.at("rho").get<double>();
    l.c5 = j.at("c5").get<double>();
    l.h0 = j.at("h0").get<double>();
  } catch (const json::exception& e) {
    throw InputError(std::string("ledger.json is incomplete: ") + e.what());
  }
  return l;
}

DenseTable<double> coarse_points(const SampleSet& samples, std::size_t N0) {
  if (N0 > samples.size()) {
    throw InputError("sample file holds fewer points than N0");
  }
  const std::size_t k = samples.model().coordinate_count();
  DenseTable<double> t(N0, k);
  for (std::size_t i = 0; i < N0; ++i) {
    std::copy(samples.point(i).begin(), samples.point(i).end(), t.row(i).begin());
  }
  return t;
}

}  // namespace

void save_refined_points(const std::filesystem::path& path, const std::vector<RefinedPoint>& points, int n) {
  auto out = csv::open_output(path);
  out << "index,chart";
  for (int i = 1; i <= n; ++i) {
    out << ",a" << i;
  }
  for (int i = 1; i <= n; ++i) {
    out << ",t" << i;
  }
  out << '\n';
  for (std::size_t r = 0; r < points.size(); ++r) {
    out << r << ',' << points[r].chart;
    for (std::size_t a : points[r].alpha) {
      out << ',' << a;
    }
    for (double t : points[r].tau) {
      out << ',' << csv::format_double(t);
    }
    out << '\n';
  }
  if (!out) {
    throw InputError("failed writing " + path.string());
  }
}

std::vector<RefinedPoint> load_refined_points(const std::filesystem::path& path) {
  auto in = csv::open_input(path);
  csv::LineReader reader(in);
  std::string line;
  if (!reader.next(line)) {
    throw ParseError("missing header", 1);
  }
  const auto header = csv::split(line);
  if (header.size() < 4 || header.size() % 2 != 0 || header[0] != "index" || header[1] != "chart") {
    throw ParseError("header must be index,chart,a1..an,t1..tn", reader.line_number());
  }
  const std::size_t n = (header.size() - 2) / 2;
  std::vector<RefinedPoint> points;
  while (reader.next(line)) {
    if (line.empty()) {
      continue;
    }
    const std::size_t ln = reader.line_number();
    const auto f = csv::split(line);
    if (f.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields", ln);
    }
    if (csv::parse_index(f[0], ln) != points.size()) {
      throw ParseError("refined point indices must be consecutive from 0", ln);
    }
    RefinedPoint p;
    p.chart = csv::parse_index(f[1], ln);
    for (std::size_t i = 0; i < n; ++i) {
      p.alpha.push_back(csv::parse_index(f[2 + i], ln));
      p.tau.push_back(csv::parse_double(f[2 + n + i], ln));
    }
    points.push_back(std::move(p));
  }
  return points;
}

int cmd_simulate(const CommandContext& ctx) {
  auto& log = log_of(ctx);
  const SimulationData data = simulate(ctx.config, ctx.config.seed, ctx.threads);
  save_samples(data.samples, ctx.out / files::kSamples);
  save_observations(data.obs, ctx.out / files::kObservations);

  const std::size_t N0 = data.split.N0;
  DenseTable<std::uint8_t> flags(N0, N0, 0);
  for (std::size_t i = 0; i < N0; ++i) {
    for (std::size_t j = i + 1; j < N0; ++j) {
      flags(i, j) = flags(j, i) = data.obs.observed(i, j) ? 1 : 0;
    }
  }
  const DenseTable<double> truth = truth_table(data.samples, 0, N0, ctx.threads);
  save_pair_table(ctx.out / files::kTruth, truth, flags, "distance", "observed");

  ExperimentConfig resolved = ctx.config;
  resolved.split = data.split;
  const json config = resolved.to_json();
  write_json(ctx.out / files::kConfig, config);
  log << "simulate: " << data.split.total() << " points, " << data.obs.observed_count() << " observed pairs -> "
      << ctx.out.string() << '\n';
  return kExitOk;
}

int cmd_estimate(const CommandContext& ctx) {
  auto& log = log_of(ctx);
  const ObservedDistances obs = load_observations(require(ctx, files::kObservations, "simulate"));
  const NetSplit split = ctx.config.resolved_split();
  split.validate_against(obs);
  const LedgerResult ledger = build_ledger(ctx.config, ctx.threads);
  const EstimatorTable table = run_pipeline(obs, split, ledger.ledger, {ctx.threads});
  save_pair_table(ctx.out / files::kDapp, table.dapp, table.passed, "dapp", "w_passed");

  json lj = ledger.ledger.to_json();
  if (ledger.c5) {
    lj["c5_calibration"] = ledger.c5->to_json();
  }
  write_json(ctx.out / files::kLedger, lj);

  std::size_t pairs = 0;
  std::size_t both = 0;
  std::size_t none = 0;
  for (std::size_t i = 0; i < split.N0; ++i) {
    for (std::size_t j = i + 1; j < split.N0; ++j) {
      ++pairs;
      both += table.passed(i, j) == 2 ? 1 : 0;
      none += table.passed(i, j) == 0 ? 1 : 0;
    }
  }
  write_json(ctx.out / files::kEstimate,
             {{"split", split.to_json()}, {"pairs", pairs}, {"passed_both", both}, {"passed_none", none}});
  log << "estimate: rho = " << ledger.ledger.rho << ", c5 = " << ledger.ledger.c5 << ", " << (pairs - none) << "/"
      << pairs << " pairs passed the W threshold\n";
  for (const auto& w : ledger.ledger.warnings) {
    log << "warning: " << w << '\n';
  }
  return kExitOk;
}

int cmd_refine(const CommandContext& ctx) {
  auto& log = log_of(ctx);
  const ExperimentConfig& config = ctx.config;
  const int n = config.model.dimension();
  const RefinementScales scales = config.refine.scales(n);
  RefineOptions options = config.refine.options;
  options.seed = config.seed;
  options.threads = ctx.threads;
  if (std::getenv("GEONET_BUDGET") != nullptr) {
    options.budget = std::min(options.budget, default_refinement_budget());
  }

  RefinementResult result;
  if (config.refine.source == RefineConfig::Source::kDapp) {
    auto [dapp, passed] = load_pair_table(require(ctx, files::kDapp, "estimate"));
    result = refine(CoarseNet(std::move(dapp)), scales, options);
  } else {
    const SampleSet samples = load_samples(require(ctx, files::kSamples, "simulate"));
    const DenseTable<double> coarse = coarse_points(samples, config.resolved_split().N0);
    const ManifoldModel& model = config.model;
    const double delta_hat = scales.delta_hat;
    const std::uint64_t seed = config.seed;
    const CoarseNet net(coarse.rows(), [&](std::size_t i, std::size_t j) {
      return perturbed_distance(model.distance(coarse.row(i), coarse.row(j)), delta_hat, seed, i, j);
    });
    result = refine(net, scales, options);
  }
  save_pair_table(ctx.out / files::kDtilde, result.dprime, result.covered, "dtilde", "covered");
  save_refined_points(ctx.out / files::kRefinedPoints, result.points, n);
  write_json(ctx.out / files::kCharts, result.diagnostics_json());
  log << "refine: " << result.points.size() << " refined points over " << result.charts.size() << " charts\n";
  for (const auto& w : result.warnings) {
    log << "warning: " << w << '\n';
  }
  return kExitOk;
}

int cmd_verify(const CommandContext& ctx) {
  auto& log = log_of(ctx);
  const ExperimentConfig& config = ctx.config;
  auto [truth, observed] = load_pair_table(require(ctx, files::kTruth, "simulate"));
  const std::size_t N0 = truth.rows();
  json report;
  bool pass = true;

  if (config.verify.target == VerifyConfig::Target::kObservations) {
    const ObservedDistances obs = load_observations(require(ctx, files::kObservations, "simulate"));
    DenseTable<double> values(N0, N0, 0.0);
    for (std::size_t i = 0; i < N0; ++i) {
      for (std::size_t j = i + 1; j < N0; ++j) {
        if (observed(i, j) != 0) {
          values(i, j) = values(j, i) = obs.value(i, j);
        }
      }
    }
    const ReportTargets targets{std::numeric_limits<double>::infinity(), 4.0 * config.noise.sigma(), 0.0,
                                config.verify.max_violation_rate};
    const ErrorReport r = error_report(values, truth, targets, &observed);
    write_error_csv(ctx.out / files::kErrors, values, truth, targets.r1, &observed);
    report["observations"] = r.to_json();
    pass = r.pass;
  } else {
    const json lj = read_json(require(ctx, files::kLedger, "estimate"));
    const ParameterLedger ledger = ledger_from_json(lj);
    auto [dapp, passed] = load_pair_table(require(ctx, files::kDapp, "estimate"));
    if (dapp.rows() != N0) {
      throw InputError("dapp.csv and truth.csv cover different point sets");
    }
    ErrorReport r = error_report(dapp, truth, dapp_targets(ledger, config.verify));
    const SampleSet samples = load_samples(require(ctx, files::kSamples, "simulate"));
    OracleConfig oracle = config.oracle;
    oracle.seed = config.seed;
    oracle.threads = ctx.threads;
    r.net = is_delta_net(coarse_points(samples, N0), config.model, config.verify.net_delta.value_or(ledger.delta1),
                         oracle);
    r.ledger = lj;
    json rj = r.to_json();
    bool any_passed = false;
    for (std::size_t i = 0; i < N0 && !any_passed; ++i) {
      for (std::size_t j = i + 1; j < N0; ++j) {
        if (passed(i, j) != 0) {
          any_passed = true;
          break;
        }
      }
    }
    if (!any_passed && N0 > 1) {
      rj["diagnosis"] = "no pair passed the W threshold; dapp fell back to D everywhere (insufficient observations)";
    }
    write_error_csv(ctx.out / files::kErrors, dapp, truth, ledger.r1);
    report["dapp"] = rj;
    pass = r.pass;
    log << "verify: near violations " << r.near_violations << "/" << r.near_pairs << ", far violations "
        << r.far_violations << "/" << r.far_pairs << '\n';
  }

  const auto dtilde_path = ctx.out / files::kDtilde;
  const auto points_path = ctx.out / files::kRefinedPoints;
  if (config.verify.target == VerifyConfig::Target::kDapp && std::filesystem::exists(dtilde_path) &&
      std::filesystem::exists(points_path)) {
    const SampleSet samples = load_samples(require(ctx, files::kSamples, "simulate"));
    const DenseTable<double> coarse = coarse_points(samples, N0);
    const std::vector<RefinedPoint> points = load_refined_points(points_path);
    auto [dtilde, covered] = load_pair_table(dtilde_path);
    if (dtilde.rows() != points.size()) {
      throw InputError("dtilde.csv and refined_points.csv disagree on the number of refined points");
    }
    const std::size_t P = points.size();
    DenseTable<double> located(P, config.model.coordinate_count());
    for (std::size_t i = 0; i < P; ++i) {
      for (std::size_t a = 0; a < points[i].anchor_count(); ++a) {
        if (points[i].anchor(a) >= N0) {
          throw InputError("refined point " + std::to_string(i) + " references a point outside the coarse net");
        }
      }
      const Point x = materialize_refined_point(
          config.model, [&](std::size_t k) { return coarse.row(k); }, points[i]);
      std::copy(x.begin(), x.end(), located.row(i).begin());
    }
    DenseTable<double> refined_truth(P, P, 0.0);
    for (std::size_t i = 0; i < P; ++i) {
      for (std::size_t j = i + 1; j < P; ++j) {
        refined_truth(i, j) = refined_truth(j, i) = config.model.distance(located.row(i), located.row(j));
      }
    }
    const RefinementScales scales = config.refine.scales(config.model.dimension());
    const double bound = config.refine.C4 * scales.delta_hat;
    const ReportTargets targets{scales.r_hat / 4.0, bound, scales.r_hat / 4.0 - bound,
                                config.verify.max_violation_rate};
    const ErrorReport r = error_report(dtilde, refined_truth, targets, &covered);
    write_error_csv(ctx.out / files::kRefinedErrors, dtilde, refined_truth, targets.r1, &covered);
    report["refined"] = r.to_json();
    pass = pass && r.pass;
    log << "verify: refined near violations " << r.near_violations << "/" << r.near_pairs << '\n';
  }
  report["pass"] = pass;
  write_json(ctx.out / files::kReport, report);
  log << "verify: " << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kExitOk : kExitAcceptanceFailure;
}

int cmd_calibrate(const CommandContext& ctx) {
  auto& log = log_of(ctx);
  ExperimentConfig config = ctx.config;
  json out;

  OracleConfig oracle = config.oracle;
  oracle.seed = config.seed;
  oracle.threads = ctx.threads;
  const double c4_hat = c4_hat_of(config);
  const C5Estimate c5 =
      estimate_c5(config.model, config.density, config.mask, c4_hat, oracle, config.calibrate.c5_pairs);
  out["c5"] = c5.to_json();
  out["c4_hat"] = c4_hat;
  log << "calibrate: c5 = " << c5.c5 << " from " << c5.gated << " gated pairs\n";
  if (config.ledger.calibrate_c5) {
    config.ledger.calibrate_c5 = false;
    config.ledger.inputs.c5 = std::min(1.0, c5.c5);
  }

  int code = kExitOk;
  auto csv_out = csv::open_output(ctx.out / files::kCalibrationCsv);
  csv_out << "constant,value,success\n";
  if (!config.calibrate.constants.empty()) {
    if (config.split) {
      throw ConfigError("calibrating size constants needs `sizes`, not an explicit `split`");
    }
    const ParameterLedger ledger =
        derive_parameters(model_bounds(config.model, config.density), config.mask, config.noise, config.ledger.inputs);
    const double target = config.calibrate.target.value_or(1.0 - ledger.theta);
    json constants = json::object();
    for (const std::string& name : config.calibrate.constants) {
      double& slot = name == "C3" ? config.sizes.C3 : name == "C10" ? config.sizes.C10 : config.sizes.C15;
      auto success = [&](double value) {
        slot = value;
        std::size_t ok = 0;
        for (std::size_t s = 0; s < config.calibrate.seeds; ++s) {
          ok += run_scenario(config, ledger, config.seed + s, ctx.threads).report.pass ? 1 : 0;
        }
        const double rate = static_cast<double>(ok) / static_cast<double>(config.calibrate.seeds);
        log << "calibrate: " << name << " = " << value << " -> success " << rate << '\n';
        csv_out << name << ',' << csv::format_double(value) << ',' << csv::format_double(rate) << '\n';
        return rate;
      };
      const double start = slot;
      try {
        const CalibrationResult r =
            calibrate_doubling(success, start, target, config.calibrate.factor, config.calibrate.max_steps);
        slot = r.value;
        constants[name] = r.to_json();
      } catch (const CalibrationError& e) {
        slot = start;
        constants[name] = {{"error", e.what()}};
        code = kExitAcceptanceFailure;
      }
    }
    out["constants"] = constants;
    out["target"] = target;
    out["split"] = config.resolved_split().to_json();
  }
  write_json(ctx.out / files::kCalibration, out);
  return code;
}

}  // namespace geonet::cli
