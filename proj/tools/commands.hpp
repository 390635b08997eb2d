#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "experiment.hpp"

namespace wsdaor::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kMissingInput = 3,
  kShapeMismatch = 4,
};

struct CommonOptions {
  std::filesystem::path config;  // empty: built-in defaults
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<MetricLevel> level;
  bool quiet = false;
};

/// Loads the config file (or defaults) and applies command-line overrides.
ExperimentConfig resolve_config(const CommonOptions& options);

// Each command writes its files under the output directory and returns an
// ExitCode; errors are reported on `err`, progress on `log` unless quiet.
//
//   generate  source.csv, target.csv, manifest.json
//   train     checkpoint.txt, history.json, manifest.json
//   evaluate  metrics.json, trace.csv, manifest.json
//   ablate    ablation.csv, ablation_seeds.csv, manifest.json
int cmd_generate(const CommonOptions& options, std::ostream& log, std::ostream& err);
int cmd_train(const CommonOptions& options, std::ostream& log, std::ostream& err);
int cmd_evaluate(const CommonOptions& options, const std::filesystem::path& checkpoint, std::ostream& log,
                 std::ostream& err);
int cmd_ablate(const CommonOptions& options, std::ostream& log, std::ostream& err);
int cmd_encode(int label, double sigma, int levels, bool normalize, std::ostream& out, std::ostream& err);

}  // namespace wsdaor::cli
