#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace wsdaor {

/// Pearson correlation in the raw-sums form
///   (n Σyh - Σy Σh) / sqrt((n Σy² - (Σy)²)(n Σh² - (Σh)²)).
/// Empty when either series is constant. Throws on length mismatch or n < 2.
std::optional<double> pcc(std::span<const double> y, std::span<const double> h);

/// (BMS - EMS) / (BMS + EMS) with
///   BMS = (n Σ(y+h)² - (Σy + Σh)²) / (2n(n-1))
///   EMS = (2Σy² + 2Σh² - Σ(y+h)²) / (2n).
/// Empty when BMS + EMS is zero.
std::optional<double> icc31(std::span<const double> y, std::span<const double> h);

double mae(std::span<const double> y, std::span<const double> h);

enum class MetricLevel { frame, sequence };
/// per_sequence: metric per series, then the unweighted mean over series with
/// defined values. pooled: one metric over the concatenation.
enum class Aggregation { per_sequence, pooled };

std::string_view to_string(MetricLevel level) noexcept;
MetricLevel parse_metric_level(std::string_view name);
std::string_view to_string(Aggregation agg) noexcept;
Aggregation parse_aggregation(std::string_view name);

/// Ground truth and predictions for one test sequence (frame level) or for the
/// bags of one sequence (sequence level).
struct SeriesPair {
  int subject = 0;
  int sequence = 0;
  std::vector<double> truth;
  std::vector<double> predicted;
};

struct SeriesMetrics {
  int subject = 0;
  int sequence = 0;
  std::size_t length = 0;
  std::optional<double> pcc;
  std::optional<double> icc;
  double mae = 0.0;
};

struct MetricsReport {
  MetricLevel level = MetricLevel::frame;
  Aggregation aggregation = Aggregation::per_sequence;
  std::optional<double> pcc;
  std::optional<double> icc;
  double mae = 0.0;
  std::size_t missing_pcc = 0;  // series excluded from the pcc mean
  std::size_t missing_icc = 0;
  std::vector<SeriesMetrics> per_sequence;
};

/// Frame level follows `aggregation`. Sequence level always pools all bags into
/// one series. A series whose truth or predictions are constant gets no pcc
/// and no icc.
MetricsReport evaluate(std::span<const SeriesPair> series, MetricLevel level,
                       Aggregation aggregation = Aggregation::per_sequence);

/// Unweighted mean of the defined values; empty if none are defined.
std::optional<double> mean_defined(std::span<const std::optional<double>> values);

}  // namespace wsdaor
