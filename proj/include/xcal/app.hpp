#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xcal/error.hpp"
#include "xcal/io.hpp"
#include "xcal/pipeline.hpp"

namespace xcal::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 2,
  kExitDisconnected = 3,
  kExitContamination = 4,
  kExitSolverFailure = 5,
};

int exit_code_for(ErrorCode code);

/// Reads XCAL_LOG (error, warn, info, debug; default warn). Logs go to stderr.
void configure_logging();

struct SimulateArgs {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
};

// Command-line overrides on top of an optional PipelineConfig JSON file.
struct CalibrateArgs {
  std::filesystem::path dataset;
  std::filesystem::path out;
  std::optional<std::filesystem::path> config;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<double> ransac_threshold_mm;
  std::optional<double> ransac_threshold_px;
  std::optional<int> max_iters;
  std::optional<int> reference_rig;
};

struct EvaluateArgs {
  std::filesystem::path dataset;
  std::filesystem::path bundle;
  std::filesystem::path out;
  std::vector<std::pair<int, int>> pairs;
};

/// Validates and resolves a PipelineConfig object. Unknown keys and bad
/// values throw kInputError.
pipeline::CalibrationOptions options_from_json(const io::Json& j);
io::Json to_json(const pipeline::CalibrationOptions& options);

/// "0:1,2:0" -> {(0, 1), (2, 0)}; throws kInputError on malformed input.
std::vector<std::pair<int, int>> parse_pairs(const std::string& text);

int run_simulate(const SimulateArgs& args);
int run_calibrate(const CalibrateArgs& args);
int run_evaluate(const EvaluateArgs& args);

}  // namespace xcal::app
