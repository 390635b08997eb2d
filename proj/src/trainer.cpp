#include "wsdaor/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "wsdaor/synth.hpp"

namespace wsdaor {

std::string_view to_string(DaMode mode) noexcept {
  switch (mode) {
    case DaMode::none: return "none";
    case DaMode::source_only: return "source-only";
    case DaMode::target_only: return "target-only";
    case DaMode::joint_no_da: return "joint-no-DA";
    case DaMode::adversarial: return "adversarial";
    case DaMode::transfer: return "transfer";
  }
  return "unknown";
}

DaMode parse_da_mode(std::string_view name) {
  for (auto m : {DaMode::none, DaMode::source_only, DaMode::target_only, DaMode::joint_no_da,
                 DaMode::adversarial, DaMode::transfer}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown DA mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !(momentum >= 0.0 && momentum < 1.0) || !(weight_decay >= 0.0)) {
    throw std::invalid_argument("train config: need lr >= 0, 0 <= momentum < 1, weight_decay >= 0");
  }
  if (epochs < 1 || patience < 1) throw std::invalid_argument("train config: epochs and patience must be >= 1");
  if (source_batch < 1 || target_batch < 1) throw std::invalid_argument("train config: batch sizes must be >= 1");
  if (anneal_every < 1 || anneal_start < 0 || !(anneal_factor > 0.0)) {
    throw std::invalid_argument("train config: invalid anneal schedule");
  }
  if (window < 1 || stride < 1) throw std::invalid_argument("train config: window and stride must be >= 1");
  if (encoding != LabelEncoding::onehot && !(sigma > 0.0)) {
    throw std::invalid_argument("train config: sigma must be positive for gaussian encodings");
  }
}

double TrainConfig::learning_rate(int epoch) const {
  if (epoch < anneal_start) return lr;
  const int decays = (epoch - anneal_start) / anneal_every + 1;
  return lr * std::pow(anneal_factor, decays);
}

Objective objective_for(DaMode mode, int epoch, int total_epochs) {
  switch (mode) {
    case DaMode::none: return {true, false, true, false};
    case DaMode::source_only: return {true, true, false, false};
    case DaMode::target_only: return {false, false, true, false};
    case DaMode::joint_no_da: return {true, true, true, false};
    case DaMode::adversarial: return {true, false, true, true};
    case DaMode::transfer:
      return epoch < total_epochs / 2 ? Objective{true, true, false, false} : Objective{false, false, true, false};
  }
  throw std::invalid_argument("unknown DA mode");
}

// ---------------------------------------------------------------------------

WeightedSampler::WeightedSampler(std::span<const Bag> bags, std::uint64_t seed) : rng_(seed) {
  if (bags.empty()) throw std::invalid_argument("WeightedSampler: no bags");
  std::vector<std::size_t> counts;
  for (const auto& b : bags) {
    const auto level = static_cast<std::size_t>(b.weak_label.value());
    if (counts.size() <= level) counts.resize(level + 1, 0);
    ++counts[level];
  }
  // Only labels that occur get weight, so every present class is drawn equally often.
  std::size_t present = 0;
  for (auto c : counts) present += c > 0 ? 1 : 0;
  probabilities_.reserve(bags.size());
  for (const auto& b : bags) {
    const auto c = counts[static_cast<std::size_t>(b.weak_label.value())];
    probabilities_.push_back(1.0 / (static_cast<double>(c) * static_cast<double>(present)));
  }
  dist_ = std::discrete_distribution<std::size_t>(probabilities_.begin(), probabilities_.end());
}

std::size_t WeightedSampler::next() { return dist_(rng_); }

void SgdMomentum::step(std::vector<Tensor*> params, std::span<const Tensor> grads, double lr) {
  if (params.size() != grads.size()) throw std::invalid_argument("SgdMomentum: params/grads size mismatch");
  if (velocity_.empty()) {
    for (const Tensor* p : params) velocity_.push_back(Tensor::zeros_like(*p));
  }
  if (velocity_.size() != params.size()) throw std::invalid_argument("SgdMomentum: parameter count changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i];
    Tensor& v = velocity_[i];
    const Tensor& g = grads[i];
    if (!theta.same_shape(g) || !theta.same_shape(v)) {
      throw std::invalid_argument("SgdMomentum: gradient " + g.shape_string() + " does not match parameter " +
                                  theta.shape_string());
    }
    for (std::size_t j = 0; j < theta.size(); ++j) {
      v[j] = momentum_ * v[j] + (g[j] + weight_decay_ * theta[j]);
      theta[j] -= lr * v[j];
    }
  }
}

TrainState make_state(const NetworkConfig& network, const TrainConfig& train) {
  network.validate();
  TrainState state;
  state.network = network;
  state.params = init_network(network);
  state.optimizer = SgdMomentum(train.momentum, train.weight_decay);
  return state;
}

// ---------------------------------------------------------------------------

namespace {

Tensor stack_frames(std::span<const Bag* const> bags, const NetworkConfig& network) {
  std::size_t rows = 0;
  for (const Bag* b : bags) {
    if (b->dim != network.input_dim) {
      throw std::invalid_argument("bag frames have dimension " + std::to_string(b->dim) +
                                  " but the network expects " + std::to_string(network.input_dim));
    }
    rows += b->length();
  }
  std::vector<double> data;
  data.reserve(rows * network.input_dim);
  for (const Bag* b : bags) data.insert(data.end(), b->features.begin(), b->features.end());
  return Tensor({rows, network.input_dim}, std::move(data));
}

Tensor stack_targets(std::span<const Bag* const> bags) {
  std::vector<double> data;
  for (const Bag* b : bags) {
    if (b->frame_targets.size() != b->length()) {
      throw std::invalid_argument("regression needs per-frame targets; bag from subject " +
                                  std::to_string(b->origin.subject) + " has none");
    }
    data.insert(data.end(), b->frame_targets.begin(), b->frame_targets.end());
  }
  const std::size_t rows = data.size();
  return Tensor({rows, 1}, std::move(data));
}

Tensor row_block(const Tensor& m, std::size_t first, std::size_t count) {
  const std::size_t k = m.cols();
  const auto begin = m.data().begin() + static_cast<std::ptrdiff_t>(first * k);
  return Tensor({count, k}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count * k)));
}

diff::Var weak_term(const BoundNetwork& net, diff::Var feats, std::span<const Bag* const> bags,
                    const TrainConfig& config, std::size_t* zero_level_events) {
  auto probs = net.ordinal(feats);
  std::vector<std::vector<std::size_t>> groups;
  std::vector<GaussianCode> codes;
  std::size_t offset = 0;
  for (const Bag* b : bags) {
    const std::size_t len = b->length();
    auto selection = pool(row_block(probs.value(), offset, len), config.pooling);
    if (config.pooling == PoolingMode::adaptive && b->weak_label.value() > 0 &&
        argmax(probs.value().row(offset + selection.selected.front())) == 0 && zero_level_events) {
      ++*zero_level_events;
    }
    for (auto& r : selection.selected) r += offset;
    groups.push_back(std::move(selection.selected));
    codes.push_back(encode_label(b->weak_label, config.encoding, config.sigma));
    offset += len;
  }
  return diff_loss::target_weak_loss(diff::pool_rows(probs, groups), codes, bags.size());
}

std::string dump_state(const LossReport& loss, const NetworkParams& params) {
  std::ostringstream out;
  out << "L_S=" << loss.source << " L_T=" << loss.target << " L_d=" << loss.domain << " lambda=" << loss.lambda
      << " total=" << loss.total << "; parameter norms:";
  for (const auto& t : params.tensors()) {
    double sq = 0.0;
    for (double v : t.value.data()) sq += v * v;
    out << ' ' << t.name << '=' << std::sqrt(sq);
  }
  return out.str();
}

}  // namespace

StepResult compute_gradients(const TrainState& state, const TrainConfig& config,
                             std::span<const Bag* const> source_batch,
                             std::span<const Bag* const> target_batch, double lambda,
                             const Objective& objective, std::size_t* zero_level_events) {
  const bool need_source = objective.source_regression || objective.source_weak || objective.domain;
  const bool need_target = objective.target_weak || objective.domain;
  if (need_source && source_batch.empty()) throw std::invalid_argument("train_step: empty source batch");
  if (need_target && target_batch.empty()) throw std::invalid_argument("train_step: empty target batch");

  diff::Tape tape;
  const auto net = bind(tape, state.params);

  diff::Var source_feats, target_feats;
  if (need_source) source_feats = net.features(tape.constant(stack_frames(source_batch, state.network)));
  if (need_target) target_feats = net.features(tape.constant(stack_frames(target_batch, state.network)));

  std::vector<diff::Var> terms;
  double ls = 0.0, lt = 0.0, ld = 0.0;
  if (objective.source_regression) {
    auto term = diff_loss::source_loss(net.regress(source_feats), stack_targets(source_batch), source_batch.size());
    ls = term.value()[0];
    terms.push_back(term);
  }
  if (objective.source_weak) {
    auto term = weak_term(net, source_feats, source_batch, config, zero_level_events);
    lt += term.value()[0];
    terms.push_back(term);
  }
  if (objective.target_weak) {
    auto term = weak_term(net, target_feats, target_batch, config, zero_level_events);
    lt += term.value()[0];
    terms.push_back(term);
  }
  if (objective.domain) {
    auto src = diff_loss::domain_loss_sum(net.domain(source_feats, lambda), 0);
    auto tgt = diff_loss::domain_loss_sum(net.domain(target_feats, lambda), 1);
    const double sequences = static_cast<double>(source_batch.size() + target_batch.size());
    auto term = diff::scale(diff::add(src, tgt), 1.0 / sequences);
    ld = term.value()[0];
    terms.push_back(term);
  }
  if (terms.empty()) throw std::invalid_argument("train_step: objective has no terms");

  // The domain term enters with a plus sign; the reversal node hands the
  // extractor -lambda times its gradient.
  diff::Var graph_total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) graph_total = diff::add(graph_total, terms[i]);

  StepResult result;
  result.loss = make_report(ls, lt, ld, objective.domain ? lambda : 0.0);
  if (!std::isfinite(graph_total.value()[0]) || !std::isfinite(result.loss.total)) {
    throw TrainingDiverged("non-finite loss: " + dump_state(result.loss, state.params));
  }
  tape.backward(graph_total);
  result.gradients.reserve(net.params.size());
  for (const auto& p : net.params) result.gradients.push_back(p.grad());
  return result;
}

LossReport train_step(TrainState& state, const TrainConfig& config, std::span<const Bag* const> source_batch,
                      std::span<const Bag* const> target_batch, double lambda, const Objective& objective,
                      double lr) {
  auto result = compute_gradients(state, config, source_batch, target_batch, lambda, objective,
                                  &state.zero_level_pool_events);
  std::vector<Tensor*> params;
  for (auto& t : state.params.tensors()) params.push_back(&t.value);
  state.optimizer.step(std::move(params), result.gradients, lr);
  if (!state.params.all_finite()) {
    throw TrainingDiverged("non-finite parameters after update: " + dump_state(result.loss, state.params));
  }
  return result.loss;
}

// ---------------------------------------------------------------------------

std::vector<int> predict_levels(const NetworkParams& params, const NetworkConfig& network, const Sequence& seq) {
  const Tensor probs = forward_target(params, network, frames_tensor(seq.features, seq.dim, network));
  std::vector<int> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) out[r] = argmax(probs.row(r));
  return out;
}

MetricsReport evaluate_frames(const NetworkParams& params, const NetworkConfig& network,
                              std::span<const Sequence> sequences, Aggregation aggregation) {
  std::vector<SeriesPair> series;
  for (const auto& seq : sequences) {
    SeriesPair pair{seq.subject, seq.index, {}, {}};
    for (int level : seq.frame_levels(network.levels)) pair.truth.push_back(level);
    for (int level : predict_levels(params, network, seq)) pair.predicted.push_back(level);
    series.push_back(std::move(pair));
  }
  return evaluate(series, MetricLevel::frame, aggregation);
}

MetricsReport evaluate_bags(const NetworkParams& params, const NetworkConfig& network, std::span<const Bag> bags,
                            PoolingMode pooling) {
  if (bags.empty()) throw std::invalid_argument("evaluate_bags: no bags");
  SeriesPair pair{bags.front().origin.subject, -1, {}, {}};
  for (const auto& bag : bags) {
    const Tensor probs = forward_target(params, network, frames_tensor(bag.features, bag.dim, network));
    pair.truth.push_back(bag.weak_label.value());
    pair.predicted.push_back(argmax(pool(probs, pooling).pooled));
  }
  return evaluate(std::span<const SeriesPair>(&pair, 1), MetricLevel::sequence);
}

// ---------------------------------------------------------------------------

FitResult fit(const TrainConfig& config, const NetworkConfig& network, std::span<const Sequence> source,
              std::span<const Bag> target_bags, std::span<const Sequence> validation) {
  config.validate();
  network.validate();
  if (validation.empty()) throw std::invalid_argument("fit: empty validation split");

  std::vector<Bag> source_bags;
  for (const auto& seq : source) {
    auto bags = make_bags(seq, config.window, config.stride, network.levels);
    std::move(bags.begin(), bags.end(), std::back_inserter(source_bags));
  }

  TrainState state = make_state(network, config);
  std::optional<WeightedSampler> source_sampler, target_sampler;
  if (!source_bags.empty()) source_sampler.emplace(source_bags, derive_seed(config.seed, 0x5a));
  if (!target_bags.empty()) target_sampler.emplace(target_bags, derive_seed(config.seed, 0x7a));

  std::size_t steps = config.steps_per_epoch;
  if (steps == 0) {
    steps = !target_bags.empty() ? (target_bags.size() + config.target_batch - 1) / config.target_batch
                                 : (source_bags.size() + config.source_batch - 1) / config.source_batch;
  }
  if (steps == 0) throw std::invalid_argument("fit: no training bags");

  FitResult result;
  result.network = network;
  result.best_params = state.params;

  std::vector<const Bag*> source_batch(source_sampler ? config.source_batch : 0);
  std::vector<const Bag*> target_batch(target_sampler ? config.target_batch : 0);
  int stale = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const Objective objective = objective_for(config.mode, epoch, config.epochs);
    if ((objective.source_regression || objective.source_weak || objective.domain) && !source_sampler) {
      throw std::invalid_argument("fit: mode " + std::string(to_string(config.mode)) + " needs source bags");
    }
    if ((objective.target_weak || objective.domain) && !target_sampler) {
      throw std::invalid_argument("fit: mode " + std::string(to_string(config.mode)) + " needs target bags");
    }
    const double lambda =
        objective.domain ? lambda_schedule(static_cast<double>(epoch) / config.epochs, config.gamma) : 0.0;
    const double lr = config.learning_rate(epoch);

    EpochRecord record{epoch, lambda, lr, {}, std::nullopt, 0};
    const std::size_t events_before = state.zero_level_pool_events;
    LossReport mean{};
    bool diverged = false;
    for (std::size_t step = 0; step < steps; ++step) {
      // Both streams advance every step so modes that skip a domain still see
      // the same draws from the other.
      for (auto& b : source_batch) b = &source_bags[source_sampler->next()];
      for (auto& b : target_batch) b = &target_bags[target_sampler->next()];
      try {
        const auto loss = train_step(state, config, source_batch, target_batch, lambda, objective, lr);
        mean.source += loss.source;
        mean.target += loss.target;
        mean.domain += loss.domain;
      } catch (const TrainingDiverged& e) {
        result.stop_reason = "diverged at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                             ": " + e.what();
        diverged = true;
        break;
      }
    }
    if (diverged) break;

    const double n = static_cast<double>(steps);
    record.loss = make_report(mean.source / n, mean.target / n, mean.domain / n, lambda);
    record.zero_level_pool_events = state.zero_level_pool_events - events_before;
    record.validation_pcc = evaluate_frames(state.params, network, validation).pcc;
    result.history.push_back(record);
    result.epochs_run = epoch + 1;
    state.epoch = epoch + 1;

    const double score = record.validation_pcc.value_or(-2.0);
    if (!state.best_score || score > *state.best_score) {
      state.best_score = score;
      result.best_params = state.params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      result.stop_reason = "early stop after " + std::to_string(stale) + " epochs without improvement";
      break;
    }
    state.epochs_since_improvement = stale;
  }
  if (result.stop_reason.empty()) result.stop_reason = "epoch budget exhausted";
  result.best_score = state.best_score;
  return result;
}

AggregateMetrics aggregate_folds(std::span<const MetricsReport> reports) {
  std::vector<std::optional<double>> pccs, iccs, maes;
  for (const auto& r : reports) {
    pccs.push_back(r.pcc);
    iccs.push_back(r.icc);
    maes.push_back(r.mae);
  }
  return {mean_defined(pccs), mean_defined(iccs), mean_defined(maes)};
}

LosoResult loso_evaluate(const TrainConfig& config, const NetworkConfig& network, std::span<const Sequence> source,
                         std::span<const Sequence> target, const LosoOptions& options) {
  std::set<int> subject_set;
  for (const auto& seq : target) subject_set.insert(seq.subject);
  const std::vector<int> subjects(subject_set.begin(), subject_set.end());
  if (subjects.size() < 2) throw std::invalid_argument("loso_evaluate: need at least 2 target subjects");

  const std::size_t folds =
      options.max_folds > 0 ? std::min(subjects.size(), static_cast<std::size_t>(options.max_folds)) : subjects.size();
  LosoResult out;
  std::vector<MetricsReport> frame_reports, sequence_reports;
  for (std::size_t f = 0; f < folds; ++f) {
    LosoFold fold;
    fold.test_subject = subjects[f];
    fold.validation_subject = subjects[(f + 1) % subjects.size()];
    for (int s : subjects) {
      if (s == fold.test_subject) continue;
      if (subjects.size() > 2 && s == fold.validation_subject) continue;
      fold.train_subjects.push_back(s);
    }

    std::vector<Bag> train_bags, test_bags;
    std::vector<Sequence> validation, test;
    for (const auto& seq : target) {
      if (seq.subject == fold.test_subject) {
        test.push_back(seq);
        auto bags = make_bags(seq, config.window, config.stride, network.levels);
        std::move(bags.begin(), bags.end(), std::back_inserter(test_bags));
        continue;
      }
      if (seq.subject == fold.validation_subject) validation.push_back(seq);
      if (std::find(fold.train_subjects.begin(), fold.train_subjects.end(), seq.subject) !=
          fold.train_subjects.end()) {
        auto bags = make_bags(seq, config.window, config.stride, network.levels);
        std::move(bags.begin(), bags.end(), std::back_inserter(train_bags));
      }
    }
    for (const auto& b : train_bags) {
      if (b.origin.subject == fold.test_subject) throw std::logic_error("loso_evaluate: test subject leaked into training");
    }

    TrainConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, 0xf01d, f);
    NetworkConfig fold_network = network;
    fold_network.seed = derive_seed(config.seed, 0xf01d, f, 1);
    const auto fit_result = fit(fold_config, fold_network, source, train_bags, validation);
    fold.frame = evaluate_frames(fit_result.best_params, network, test, options.aggregation);
    if (!test_bags.empty()) fold.sequence = evaluate_bags(fit_result.best_params, network, test_bags, config.pooling);
    fold.best_epoch = fit_result.best_epoch;
    fold.epochs_run = fit_result.epochs_run;
    fold.stop_reason = fit_result.stop_reason;
    fold.history = fit_result.history;

    frame_reports.push_back(fold.frame);
    if (fold.sequence) sequence_reports.push_back(*fold.sequence);
    out.folds.push_back(std::move(fold));
  }
  out.frame = aggregate_folds(frame_reports);
  out.sequence = aggregate_folds(sequence_reports);
  return out;
}

}  // namespace wsdaor
