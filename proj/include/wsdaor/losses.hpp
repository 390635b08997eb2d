#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wsdaor/autodiff.hpp"
#include "wsdaor/ordinal.hpp"

namespace wsdaor {

/// Algebraic value of L = L_S + L_T - lambda * L_d. The minus sign reaches the
/// extractor only through the gradient reversal node.
struct LossReport {
  double source = 0.0;
  double target = 0.0;
  double domain = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

LossReport make_report(double source, double target, double domain, double lambda);

// Plain evaluations. These are the reference definitions; the graph builders
// below compute the same quantities on a tape.

/// (1/N_s) * sum over all frames of (pred - label)^2. Frames of every sequence
/// are summed, then the total is divided by the sequence count.
double source_loss(std::span<const double> preds, std::span<const double> labels,
                   std::size_t sequence_count);

/// -(1/N_T) * sum_i code_i . log(pooled_i), log clamped at diff::kLogFloor.
/// pooled is row-major [N x K].
double target_weak_loss(std::span<const double> pooled, const std::vector<GaussianCode>& codes,
                        std::size_t sequence_count);

/// (1/(N_s + N_T)) * sum over frames of -[d log p + (1 - d) log(1 - p)].
double domain_loss(std::span<const double> preds, std::span<const int> domains,
                   std::size_t sequence_count);

/// 2 / (1 + exp(-gamma * p)) - 1 for training progress p in [0, 1].
double lambda_schedule(double progress, double gamma = 10.0);

namespace diff_loss {

diff::Var source_loss(diff::Var preds, const Tensor& labels, std::size_t sequence_count);
diff::Var target_weak_loss(diff::Var pooled, const std::vector<GaussianCode>& codes,
                           std::size_t sequence_count);
/// Un-normalized frame sum of the logistic loss. Callers add the source and
/// target parts and divide once by N_s + N_T.
diff::Var domain_loss_sum(diff::Var preds, int domain);

}  // namespace diff_loss

}  // namespace wsdaor
