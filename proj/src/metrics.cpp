#include "wsdaor/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wsdaor {

namespace {

void require_pair(std::span<const double> y, std::span<const double> h, std::size_t min_len,
                  const char* what) {
  if (y.size() != h.size()) {
    throw std::invalid_argument(std::string(what) + ": series lengths differ (" +
                                std::to_string(y.size()) + " vs " + std::to_string(h.size()) + ")");
  }
  if (y.size() < min_len) {
    throw std::invalid_argument(std::string(what) + ": need at least " + std::to_string(min_len) +
                                " points");
  }
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

std::optional<double> pcc(std::span<const double> y, std::span<const double> h) {
  require_pair(y, h, 2, "pcc");
  if (is_constant(y) || is_constant(h)) return std::nullopt;
  const double n = static_cast<double>(y.size());
  double sy = 0, sh = 0, syh = 0, syy = 0, shh = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sy += y[i];
    sh += h[i];
    syh += y[i] * h[i];
    syy += y[i] * y[i];
    shh += h[i] * h[i];
  }
  const double num = n * syh - sy * sh;
  const double vy = n * syy - sy * sy;
  const double vh = n * shh - sh * sh;
  if (!(vy > 0.0) || !(vh > 0.0)) return std::nullopt;
  return std::clamp(num / std::sqrt(vy * vh), -1.0, 1.0);
}

std::optional<double> icc31(std::span<const double> y, std::span<const double> h) {
  require_pair(y, h, 2, "icc31");
  const double n = static_cast<double>(y.size());
  double sy = 0, sh = 0, syy = 0, shh = 0, sss = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double s = y[i] + h[i];
    sy += y[i];
    sh += h[i];
    syy += y[i] * y[i];
    shh += h[i] * h[i];
    sss += s * s;
  }
  const double bms = (n * sss - (sy + sh) * (sy + sh)) / (2.0 * n * (n - 1.0));
  const double ems = (2.0 * syy + 2.0 * shh - sss) / (2.0 * n);
  const double denom = bms + ems;
  if (denom == 0.0) return std::nullopt;
  return (bms - ems) / denom;
}

double mae(std::span<const double> y, std::span<const double> h) {
  require_pair(y, h, 1, "mae");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total += std::abs(y[i] - h[i]);
  return total / static_cast<double>(y.size());
}

std::string_view to_string(MetricLevel level) noexcept {
  return level == MetricLevel::frame ? "frame" : "sequence";
}

MetricLevel parse_metric_level(std::string_view name) {
  if (name == "frame") return MetricLevel::frame;
  if (name == "sequence") return MetricLevel::sequence;
  throw std::invalid_argument("unknown metric level '" + std::string(name) + "'");
}

std::string_view to_string(Aggregation agg) noexcept {
  return agg == Aggregation::per_sequence ? "per-sequence" : "pooled";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "per-sequence") return Aggregation::per_sequence;
  if (name == "pooled") return Aggregation::pooled;
  throw std::invalid_argument("unknown aggregation '" + std::string(name) + "'");
}

std::optional<double> mean_defined(std::span<const std::optional<double>> values) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& v : values) {
    if (v) {
      total += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

namespace {

SeriesMetrics score(int subject, int sequence, std::span<const double> truth,
                    std::span<const double> predicted) {
  SeriesMetrics m{subject, sequence, truth.size(), std::nullopt, std::nullopt, mae(truth, predicted)};
  if (truth.size() >= 2 && !is_constant(truth) && !is_constant(predicted)) {
    m.pcc = pcc(truth, predicted);
    m.icc = icc31(truth, predicted);
  }
  return m;
}

}  // namespace

MetricsReport evaluate(std::span<const SeriesPair> series, MetricLevel level, Aggregation aggregation) {
  if (series.empty()) throw std::invalid_argument("evaluate: empty test set");
  MetricsReport report;
  report.level = level;
  report.aggregation = level == MetricLevel::sequence ? Aggregation::pooled : aggregation;

  for (const auto& s : series) {
    if (s.truth.empty()) throw std::invalid_argument("evaluate: empty series");
    report.per_sequence.push_back(score(s.subject, s.sequence, s.truth, s.predicted));
  }

  if (report.aggregation == Aggregation::per_sequence) {
    std::vector<std::optional<double>> pccs, iccs;
    double mae_total = 0.0;
    for (const auto& m : report.per_sequence) {
      pccs.push_back(m.pcc);
      iccs.push_back(m.icc);
      report.missing_pcc += m.pcc ? 0 : 1;
      report.missing_icc += m.icc ? 0 : 1;
      mae_total += m.mae;
    }
    report.pcc = mean_defined(pccs);
    report.icc = mean_defined(iccs);
    report.mae = mae_total / static_cast<double>(report.per_sequence.size());
  } else {
    std::vector<double> truth, predicted;
    for (const auto& s : series) {
      truth.insert(truth.end(), s.truth.begin(), s.truth.end());
      predicted.insert(predicted.end(), s.predicted.begin(), s.predicted.end());
    }
    const auto pooled = score(-1, -1, truth, predicted);
    report.pcc = pooled.pcc;
    report.icc = pooled.icc;
    report.mae = pooled.mae;
    report.missing_pcc = pooled.pcc ? 0 : 1;
    report.missing_icc = pooled.icc ? 0 : 1;
  }
  return report;
}

}  // namespace wsdaor
