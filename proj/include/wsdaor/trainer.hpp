#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wsdaor/losses.hpp"
#include "wsdaor/metrics.hpp"
#include "wsdaor/milbags.hpp"
#include "wsdaor/network.hpp"
#include "wsdaor/ordinal.hpp"

namespace wsdaor {

/// Which data and loss terms a run uses.
///   none         source regression + target weak loss, no domain branch
///   source_only  source regression + weak loss on source bags
///   target_only  weak loss on target bags
///   joint_no_da  source regression + weak loss on source and target bags
///   adversarial  source regression + target weak loss + reversed domain loss
///   transfer     source_only for the first half of the epochs, then target_only
enum class DaMode { none, source_only, target_only, joint_no_da, adversarial, transfer };

std::string_view to_string(DaMode mode) noexcept;
DaMode parse_da_mode(std::string_view name);

struct TrainConfig {
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  int epochs = 60;
  std::size_t source_batch = 4;  // bags per step
  std::size_t target_batch = 2;
  int anneal_start = 20;  // lr *= anneal_factor at this epoch and every anneal_every after
  int anneal_every = 5;
  double anneal_factor = 0.5;
  double gamma = 10.0;  // lambda schedule steepness
  int patience = 10;
  std::size_t steps_per_epoch = 0;  // 0: ceil(target bags / target_batch)
  std::size_t window = 64;
  std::size_t stride = 8;
  PoolingMode pooling = PoolingMode::adaptive;
  LabelEncoding encoding = LabelEncoding::gaussian;
  double sigma = 0.3;
  DaMode mode = DaMode::adversarial;
  std::uint64_t seed = 0;

  void validate() const;
  double learning_rate(int epoch) const;
};

/// Which terms enter one step's objective.
struct Objective {
  bool source_regression = false;
  bool source_weak = false;
  bool target_weak = false;
  bool domain = false;
};

Objective objective_for(DaMode mode, int epoch, int total_epochs);

/// Infinite stream of bag indices, each drawn with probability proportional
/// to 1 / (number of bags sharing its weak label).
class WeightedSampler {
 public:
  WeightedSampler(std::span<const Bag> bags, std::uint64_t seed);

  std::size_t next();
  std::span<const double> probabilities() const noexcept { return probabilities_; }

 private:
  std::vector<double> probabilities_;
  std::mt19937_64 rng_;
  std::discrete_distribution<std::size_t> dist_;
};

/// SGD with momentum; weight decay adds wd * theta to each gradient:
///   v <- momentum * v + (g + wd * theta);  theta <- theta - lr * v
class SgdMomentum {
 public:
  SgdMomentum(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(std::vector<Tensor*> params, std::span<const Tensor> grads, double lr);
  const std::vector<Tensor>& velocity() const noexcept { return velocity_; }

 private:
  double momentum_;
  double weight_decay_;
  std::vector<Tensor> velocity_;
};

struct TrainState {
  NetworkConfig network;
  NetworkParams params;
  SgdMomentum optimizer{0.9, 1e-5};
  int epoch = 0;
  std::optional<double> best_score;
  int epochs_since_improvement = 0;
  std::size_t zero_level_pool_events = 0;  // adaptive pool landed on level 0 for a non-neutral bag
};

TrainState make_state(const NetworkConfig& network, const TrainConfig& train);

/// Thrown when a step produces a non-finite loss. what() carries a dump of the
/// loss terms and parameter norms at the failing step.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepResult {
  LossReport loss;
  std::vector<Tensor> gradients;  // aligned with params.tensors()
};

/// Builds the objective for one mini-batch and returns the loss report and
/// the gradients, without touching the parameters.
StepResult compute_gradients(const TrainState& state, const TrainConfig& config,
                             std::span<const Bag* const> source_batch,
                             std::span<const Bag* const> target_batch, double lambda,
                             const Objective& objective, std::size_t* zero_level_events = nullptr);

/// One SGD-with-momentum update on L = L_S + L_T - lambda * L_d.
LossReport train_step(TrainState& state, const TrainConfig& config,
                      std::span<const Bag* const> source_batch,
                      std::span<const Bag* const> target_batch, double lambda,
                      const Objective& objective, double lr);

/// argmax of the ordinal head for every frame of a sequence.
std::vector<int> predict_levels(const NetworkParams& params, const NetworkConfig& network,
                                const Sequence& seq);

/// Frame-level metrics of the ordinal head against a sequence set's labels.
MetricsReport evaluate_frames(const NetworkParams& params, const NetworkConfig& network,
                              std::span<const Sequence> sequences,
                              Aggregation aggregation = Aggregation::per_sequence);

/// Bag-level metrics: argmax of the pooled vector against each weak label.
MetricsReport evaluate_bags(const NetworkParams& params, const NetworkConfig& network,
                            std::span<const Bag> bags, PoolingMode pooling);

struct EpochRecord {
  int epoch = 0;
  double lambda = 0.0;
  double lr = 0.0;
  LossReport loss;  // mean over the epoch's steps
  std::optional<double> validation_pcc;
  std::size_t zero_level_pool_events = 0;
};

struct FitResult {
  NetworkConfig network;
  NetworkParams best_params;
  int best_epoch = -1;
  std::optional<double> best_score;
  int epochs_run = 0;
  std::string stop_reason;
  std::vector<EpochRecord> history;
};

/// Trains until the epoch budget runs out or the validation frame PCC fails to
/// improve for `patience` epochs. Returns the parameters of the best epoch.
/// Source sequences are cut into bags with the configured window and stride.
FitResult fit(const TrainConfig& config, const NetworkConfig& network,
              std::span<const Sequence> source, std::span<const Bag> target_bags,
              std::span<const Sequence> validation);

struct LosoFold {
  int test_subject = 0;
  int validation_subject = 0;
  std::vector<int> train_subjects;
  MetricsReport frame;
  std::optional<MetricsReport> sequence;  // empty when the test subject yields no bags
  int best_epoch = -1;
  int epochs_run = 0;
  std::string stop_reason;
  std::vector<EpochRecord> history;
};

struct AggregateMetrics {
  std::optional<double> pcc;
  std::optional<double> icc;
  std::optional<double> mae;
};

struct LosoResult {
  std::vector<LosoFold> folds;
  AggregateMetrics frame;
  AggregateMetrics sequence;
};

struct LosoOptions {
  int max_folds = 0;  // 0: one fold per target subject
  Aggregation aggregation = Aggregation::per_sequence;
};

/// For each target subject: train on the other target subjects (minus a
/// validation subject) plus all source data, test on the held-out subject.
/// The validation subject is the next subject in order; with two subjects
/// the lone training subject doubles as the validation subject.
LosoResult loso_evaluate(const TrainConfig& config, const NetworkConfig& network,
                         std::span<const Sequence> source, std::span<const Sequence> target,
                         const LosoOptions& options = {});

AggregateMetrics aggregate_folds(std::span<const MetricsReport> reports);

}  // namespace wsdaor
