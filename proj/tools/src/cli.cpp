#include <cstdlib>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "geonet/cli/commands.hpp"
#include "geonet/errors.hpp"

namespace geonet::cli {

int run(int argc, char** argv) {
  CLI::App app{"geonet: geodesic distance reconstruction from noisy, partially observed samples"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out;

  using Command = int (*)(const CommandContext&);
  const std::map<std::string, std::pair<Command, std::string>> commands = {
      {"simulate", {cmd_simulate, "Draw samples and noisy, masked observations"}},
      {"estimate", {cmd_estimate, "Compute the approximate distances d^app on the coarse net"}},
      {"refine", {cmd_refine, "Build charts and refined distances from the coarse net"}},
      {"verify", {cmd_verify, "Compare outputs with the ground truth"}},
      {"calibrate", {cmd_calibrate, "Estimate c5 and grow size constants until the target holds"}},
  };
  std::map<CLI::App*, Command> dispatch;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.second);
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Seed overriding the config");
    sub->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
    sub->add_option("--out", out, "Experiment directory overriding the config");
    dispatch[sub] = entry.first;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    CommandContext ctx;
    ctx.config = load_config(config_path);
    for (CLI::App* sub : app.get_subcommands()) {
      if (sub->count("--seed") > 0) {
        ctx.config.seed = seed;
      }
      if (sub->count("--out") > 0) {
        ctx.config.output = out;
      }
    }
    ctx.out = ctx.config.output;
    ctx.threads = threads;
    ctx.log = &std::cerr;
    return dispatch.at(app.get_subcommands().front())(ctx);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace geonet::cli
