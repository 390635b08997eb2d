#include "wsdaor/milbags.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace wsdaor {

namespace {

void require_rows(const Tensor& probs) {
  if (probs.rank() != 2 || probs.rows() == 0) {
    throw std::invalid_argument("pooling needs an [n x K] matrix, got " + probs.shape_string());
  }
}

PoolResult mean_of(const Tensor& probs, std::vector<std::size_t> rows) {
  const std::size_t k = probs.cols();
  PoolResult out{std::vector<double>(k, 0.0), std::move(rows)};
  for (auto r : out.selected) {
    for (std::size_t c = 0; c < k; ++c) out.pooled[c] += probs.at(r, c);
  }
  const double inv = 1.0 / static_cast<double>(out.selected.size());
  for (double& v : out.pooled) v *= inv;
  return out;
}

}  // namespace

std::vector<int> Sequence::frame_levels(int levels) const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (double y : labels) {
    out.push_back(domain == Domain::source ? level_from_signed_intensity(y, levels).value()
                                           : OrdinalLevel(static_cast<int>(y), levels).value());
  }
  return out;
}

void Sequence::validate() const {
  if (labels.empty()) throw std::invalid_argument("sequence has no frames");
  if (dim == 0) throw std::invalid_argument("sequence feature dimension is zero");
  if (features.size() != labels.size() * dim) {
    throw std::invalid_argument("sequence has " + std::to_string(labels.size()) + " labels but " +
                                std::to_string(features.size()) + " feature values for dim " +
                                std::to_string(dim));
  }
}

std::vector<Bag> make_bags(const Sequence& seq, std::size_t window, std::size_t stride, int levels) {
  if (window < 1 || stride < 1) throw std::invalid_argument("make_bags: window and stride must be >= 1");
  seq.validate();
  std::vector<Bag> bags;
  const std::size_t n = seq.length();
  if (n < window) return bags;
  const std::vector<int> frame_levels = seq.frame_levels(levels);
  for (std::size_t offset = 0; offset + window <= n; offset += stride) {
    const auto first = frame_levels.begin() + static_cast<std::ptrdiff_t>(offset);
    const int weak = *std::max_element(first, first + static_cast<std::ptrdiff_t>(window));
    Bag bag{seq.domain,
            seq.dim,
            std::vector<double>(seq.features.begin() + static_cast<std::ptrdiff_t>(offset * seq.dim),
                                seq.features.begin() + static_cast<std::ptrdiff_t>((offset + window) * seq.dim)),
            OrdinalLevel(weak, levels),
            BagOrigin{seq.subject, seq.index, offset},
            {}};
    if (seq.domain == Domain::source) {
      bag.frame_targets.assign(seq.labels.begin() + static_cast<std::ptrdiff_t>(offset),
                               seq.labels.begin() + static_cast<std::ptrdiff_t>(offset + window));
    }
    bags.push_back(std::move(bag));
  }
  return bags;
}

std::string_view to_string(PoolingMode m) noexcept {
  switch (m) {
    case PoolingMode::max: return "max";
    case PoolingMode::mean: return "mean";
    case PoolingMode::adaptive: return "adaptive";
  }
  return "unknown";
}

PoolingMode parse_pooling_mode(std::string_view name) {
  if (name == "max") return PoolingMode::max;
  if (name == "mean") return PoolingMode::mean;
  if (name == "adaptive") return PoolingMode::adaptive;
  throw std::invalid_argument("unknown pooling mode '" + std::string(name) + "'");
}

int argmax(std::span<const double> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

PoolResult max_pool(const Tensor& probs) {
  require_rows(probs);
  std::size_t best = 0;
  int best_level = argmax(probs.row(0));
  double best_prob = probs.at(0, static_cast<std::size_t>(best_level));
  for (std::size_t r = 1; r < probs.rows(); ++r) {
    const int level = argmax(probs.row(r));
    const double p = probs.at(r, static_cast<std::size_t>(level));
    if (level > best_level || (level == best_level && p > best_prob)) {
      best = r;
      best_level = level;
      best_prob = p;
    }
  }
  return mean_of(probs, {best});
}

PoolResult adaptive_pool(const Tensor& probs) {
  require_rows(probs);
  std::vector<int> levels(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) levels[r] = argmax(probs.row(r));
  const int top = *std::max_element(levels.begin(), levels.end());
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < levels.size(); ++r) {
    if (levels[r] == top) rows.push_back(r);
  }
  return mean_of(probs, std::move(rows));
}

PoolResult mean_pool(const Tensor& probs) {
  require_rows(probs);
  std::vector<std::size_t> rows(probs.rows());
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
  return mean_of(probs, std::move(rows));
}

PoolResult pool(const Tensor& probs, PoolingMode mode) {
  switch (mode) {
    case PoolingMode::max: return max_pool(probs);
    case PoolingMode::mean: return mean_pool(probs);
    case PoolingMode::adaptive: return adaptive_pool(probs);
  }
  throw std::invalid_argument("unknown pooling mode");
}

}  // namespace wsdaor
