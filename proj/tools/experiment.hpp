#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsdaor/metrics.hpp"
#include "wsdaor/network.hpp"
#include "wsdaor/synth.hpp"
#include "wsdaor/trainer.hpp"

namespace wsdaor::cli {

/// Bad or unknown configuration; key() names the offending "section.key".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// A required input file is absent or unreadable.
class MissingInput : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Checkpoint, config and dataset disagree on dimensions.
class ShapeMismatch : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class AblationTable { table2, table1, windows };

std::string_view to_string(AblationTable table) noexcept;
AblationTable parse_ablation_table(std::string_view name);

struct ExperimentConfig {
  DomainSpec data;
  NetworkConfig network;  // input_dim and levels are taken from data
  TrainConfig train;

  std::uint64_t seed = 1;
  std::filesystem::path dataset;  // directory with source.csv and target.csv; empty: generate
  std::filesystem::path out = "out";
  MetricLevel level = MetricLevel::frame;
  Aggregation aggregation = Aggregation::per_sequence;
  int max_folds = 0;
  int validation_subject = -1;  // train command; -1 picks the last target subject
  AblationTable table = AblationTable::table2;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::size_t> windows{8, 16, 32, 64};

  /// Propagates `seed` and the data dimensions into the sub-configs.
  void sync();
  void validate() const;
};

// INI file with sections [data], [network], [train] and [experiment]. Unknown
// sections or keys and unparsable values raise ConfigError. Numbers are
// written in their shortest round-trip form, so save -> load is lossless.
ExperimentConfig load_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(std::ostream& out, const ExperimentConfig& config);
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

struct Dataset {
  std::vector<Sequence> source;
  std::vector<Sequence> target;
};

/// Reads `config.dataset` when set, otherwise generates from `config.data`.
Dataset load_dataset(const ExperimentConfig& config);

struct AblationCell {
  std::string name;
  PoolingMode pooling = PoolingMode::adaptive;
  LabelEncoding encoding = LabelEncoding::gaussian;
  DaMode mode = DaMode::adversarial;
  std::size_t window = 64;
};

std::vector<AblationCell> ablation_cells(const ExperimentConfig& config);

struct CellRun {
  std::string cell;
  std::uint64_t seed = 0;
  AggregateMetrics frame;
  AggregateMetrics sequence;
  double seconds = 0.0;
};

/// Runs every cell under every seed with LOSO. All cells of one seed see the
/// same generated dataset and the same training seed.
std::vector<CellRun> run_ablation(const ExperimentConfig& config, const std::vector<AblationCell>& cells,
                                  const std::function<void(const CellRun&)>& progress = {});

}  // namespace wsdaor::cli
