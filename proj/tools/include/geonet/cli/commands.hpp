#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "geonet/cli/config.hpp"

namespace geonet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAcceptanceFailure = 2;

/// File names inside the experiment directory.
namespace files {
inline constexpr const char* kSamples = "samples.csv";
inline constexpr const char* kObservations = "observations.csv";
inline constexpr const char* kTruth = "truth.csv";
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kDapp = "dapp.csv";
inline constexpr const char* kLedger = "ledger.json";
inline constexpr const char* kEstimate = "estimate.json";
inline constexpr const char* kDtilde = "dtilde.csv";
inline constexpr const char* kRefinedPoints = "refined_points.csv";
inline constexpr const char* kCharts = "charts.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kErrors = "errors.csv";
inline constexpr const char* kRefinedErrors = "refined_errors.csv";
inline constexpr const char* kCalibration = "calibration.json";
inline constexpr const char* kCalibrationCsv = "calibration.csv";
}  // namespace files

struct CommandContext {
  ExperimentConfig config;
  std::filesystem::path out;
  unsigned threads = 1;
  std::ostream* log = nullptr;
};

int cmd_simulate(const CommandContext& ctx);
int cmd_estimate(const CommandContext& ctx);
int cmd_refine(const CommandContext& ctx);
int cmd_verify(const CommandContext& ctx);
int cmd_calibrate(const CommandContext& ctx);

void save_refined_points(const std::filesystem::path& path, const std::vector<RefinedPoint>& points, int n);
std::vector<RefinedPoint> load_refined_points(const std::filesystem::path& path);

/// Parses the command line and runs one subcommand; returns the process exit code.
int run(int argc, char** argv);

}  // namespace geonet::cli
