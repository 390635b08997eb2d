#include "wsdaor/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wsdaor {

namespace {

double clamped_log(double v) { return std::log(std::max(v, diff::kLogFloor)); }

void require_sequences(std::size_t count, const char* what) {
  if (count == 0) throw std::invalid_argument(std::string(what) + ": sequence count must be positive");
}

}  // namespace

LossReport make_report(double source, double target, double domain, double lambda) {
  return LossReport{source, target, domain, lambda, source + target - lambda * domain};
}

double source_loss(std::span<const double> preds, std::span<const double> labels,
                   std::size_t sequence_count) {
  if (preds.empty()) throw std::invalid_argument("source_loss: no frames");
  if (preds.size() != labels.size()) {
    throw std::invalid_argument("source_loss: " + std::to_string(preds.size()) + " predictions vs " +
                                std::to_string(labels.size()) + " labels");
  }
  require_sequences(sequence_count, "source_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double e = preds[i] - labels[i];
    total += e * e;
  }
  return total / static_cast<double>(sequence_count);
}

double target_weak_loss(std::span<const double> pooled, const std::vector<GaussianCode>& codes,
                        std::size_t sequence_count) {
  if (codes.empty()) throw std::invalid_argument("target_weak_loss: no bags");
  require_sequences(sequence_count, "target_weak_loss");
  const std::size_t k = codes.front().levels();
  if (pooled.size() != codes.size() * k) {
    throw std::invalid_argument("target_weak_loss: pooled rows have " +
                                std::to_string(pooled.size()) + " values, codes need " +
                                std::to_string(codes.size()) + " x " + std::to_string(k));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i].levels() != k) throw std::invalid_argument("target_weak_loss: mixed code lengths");
    for (std::size_t c = 0; c < k; ++c) total += codes[i].values[c] * clamped_log(pooled[i * k + c]);
  }
  return -total / static_cast<double>(sequence_count);
}

double domain_loss(std::span<const double> preds, std::span<const int> domains,
                   std::size_t sequence_count) {
  if (preds.size() != domains.size()) throw std::invalid_argument("domain_loss: length mismatch");
  require_sequences(sequence_count, "domain_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int d = domains[i];
    if (d != 0 && d != 1) {
      throw std::invalid_argument("domain_loss: domain label " + std::to_string(d) + " not in {0,1}");
    }
    total += d == 1 ? -clamped_log(preds[i]) : -clamped_log(1.0 - preds[i]);
  }
  return total / static_cast<double>(sequence_count);
}

double lambda_schedule(double progress, double gamma) {
  if (!(progress >= 0.0 && progress <= 1.0)) {
    throw std::invalid_argument("lambda_schedule: progress must be in [0, 1]");
  }
  return 2.0 / (1.0 + std::exp(-gamma * progress)) - 1.0;
}

namespace diff_loss {

diff::Var source_loss(diff::Var preds, const Tensor& labels, std::size_t sequence_count) {
  require_sequences(sequence_count, "source_loss");
  if (preds.value().size() != labels.size()) {
    throw std::invalid_argument("source_loss: predictions " + preds.value().shape_string() +
                                " vs labels " + labels.shape_string());
  }
  Tensor shaped(preds.value().shape(), std::vector<double>(labels.data().begin(), labels.data().end()));
  auto err = diff::subtract(preds, preds.tape()->constant(std::move(shaped)));
  return diff::scale(diff::sum(diff::square(err)), 1.0 / static_cast<double>(sequence_count));
}

diff::Var target_weak_loss(diff::Var pooled, const std::vector<GaussianCode>& codes,
                           std::size_t sequence_count) {
  require_sequences(sequence_count, "target_weak_loss");
  const Tensor& p = pooled.value();
  if (p.rank() != 2 || p.rows() != codes.size()) {
    throw std::invalid_argument("target_weak_loss: pooled " + p.shape_string() + " vs " +
                                std::to_string(codes.size()) + " codes");
  }
  const std::size_t k = p.cols();
  Tensor code_matrix({codes.size(), k});
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i].levels() != k) {
      throw std::invalid_argument("target_weak_loss: code has " + std::to_string(codes[i].levels()) +
                                  " levels, pooled vector has " + std::to_string(k));
    }
    for (std::size_t c = 0; c < k; ++c) code_matrix[i * k + c] = codes[i].values[c];
  }
  auto weighted = diff::multiply(diff::log(pooled), pooled.tape()->constant(std::move(code_matrix)));
  return diff::scale(diff::sum(weighted), -1.0 / static_cast<double>(sequence_count));
}

diff::Var domain_loss_sum(diff::Var preds, int domain) {
  if (domain != 0 && domain != 1) {
    throw std::invalid_argument("domain_loss: domain label " + std::to_string(domain) + " not in {0,1}");
  }
  diff::Var prob = preds;
  if (domain == 0) {
    prob = diff::subtract(preds.tape()->constant(Tensor(preds.value().shape(), 1.0)), preds);
  }
  return diff::scale(diff::sum(diff::log(prob)), -1.0);
}

}  // namespace diff_loss

}  // namespace wsdaor
