#include <doctest.h>

#include <stdexcept>

#include <random>

#include "oracles.hpp"
#include "wsdaor/metrics.hpp"

using namespace wsdaor;

TEST_CASE("identity predictions") {
  const std::vector<double> y{0, 1, 2, 5, 3, 0};
  CHECK(*pcc(y, y) == doctest::Approx(1.0));
  CHECK(*icc31(y, y) == doctest::Approx(1.0));
  CHECK(mae(y, y) == 0.0);
}

TEST_CASE("hand-computed example") {
  // y + h = {3, 4, 7}: sum 14, sum of squares 74.
  // BMS = (3*74 - 14^2) / 12 = 26/12; EMS = (2*14 + 2*24 - 74) / 6 = 2/6.
  const std::vector<double> y{1, 2, 3}, h{2, 2, 4};
  CHECK(*pcc(y, h) == doctest::Approx(3.0 / std::sqrt(12.0)));
  CHECK(mae(y, h) == doctest::Approx(2.0 / 3.0));
  const double bms = 26.0 / 12.0, ems = 2.0 / 6.0;
  CHECK(*icc31(y, h) == doctest::Approx((bms - ems) / (bms + ems)));
}

TEST_CASE("constant series have no pcc") {
  const std::vector<double> y{1, 2, 3}, c{2, 2, 2};
  CHECK_FALSE(pcc(y, c).has_value());
  CHECK_FALSE(pcc(c, y).has_value());
  CHECK(icc31(y, c).has_value());
  CHECK_FALSE(icc31(c, c).has_value());
}

TEST_CASE("length errors") {
  CHECK_THROWS(pcc(std::vector<double>{1, 2}, std::vector<double>{1}));
  CHECK_THROWS(pcc(std::vector<double>{1}, std::vector<double>{1}));
  CHECK_THROWS(mae(std::vector<double>{}, std::vector<double>{}));
}

TEST_CASE("metrics match the centred-form oracles") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> len(3, 200);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = len(rng);
    std::vector<double> y(n), h(n);
    std::normal_distribution<double> g(0, 2);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = g(rng);
      h[i] = 0.5 * y[i] + g(rng);
    }
    CHECK(std::abs(*pcc(y, h) - oracle::pcc(y, h)) <= 1e-10);
    CHECK(std::abs(*icc31(y, h) - oracle::icc(y, h)) <= 1e-10);
    CHECK(std::abs(mae(y, h) - oracle::mae(y, h)) <= 1e-10);
  }
}

TEST_CASE("evaluate aggregates per sequence or pooled") {
  std::vector<SeriesPair> series{{0, 0, {0, 1, 2, 3}, {0, 1, 2, 3}}, {1, 0, {0, 1, 2, 3}, {3, 2, 1, 0}}};
  const auto per = evaluate(series, MetricLevel::frame, Aggregation::per_sequence);
  CHECK(*per.pcc == doctest::Approx(0.0));
  CHECK(per.per_sequence.size() == 2);
  CHECK(per.mae == doctest::Approx(1.0));
  const auto pooled = evaluate(series, MetricLevel::frame, Aggregation::pooled);
  CHECK(*pooled.pcc == doctest::Approx(0.0));
  CHECK(pooled.mae == doctest::Approx(1.0));
}

TEST_CASE("constant series are excluded and counted") {
  std::vector<SeriesPair> series{{0, 0, {0, 0, 0}, {0, 1, 0}}, {1, 0, {0, 1, 2}, {0, 1, 2}}};
  const auto r = evaluate(series, MetricLevel::frame);
  CHECK(r.missing_pcc == 1);
  CHECK(*r.pcc == doctest::Approx(1.0));
  CHECK_THROWS(evaluate(std::vector<SeriesPair>{}, MetricLevel::frame));
}

TEST_CASE("mean_defined skips empty values") {
  std::vector<std::optional<double>> v{1.0, std::nullopt, 3.0};
  CHECK(*mean_defined(v) == 2.0);
  CHECK_FALSE(mean_defined(std::vector<std::optional<double>>{std::nullopt}).has_value());
}

TEST_CASE("metric examples") {
  CHECK(*pcc(std::vector<double>{1, 2, 3}, std::vector<double>{6, 4, 2}) == doctest::Approx(-1.0));
  const std::vector<double> y4{1, 2, 3, 4}, h4{1, 3, 2, 4};
  CHECK(std::abs(*pcc(y4, h4) - oracle::pcc(y4, h4)) <= 1e-12);
  const std::vector<double> y3{1, 2, 3}, r3{3, 2, 1};
  CHECK(std::abs(*icc31(y3, r3) - oracle::icc(y3, r3)) <= 1e-12);
  std::vector<double> shifted = y4;
  for (double& v : shifted) v += 1.5;
  CHECK(*pcc(y4, shifted) == doctest::Approx(1.0));
  CHECK(*icc31(y4, shifted) < 1.0);
  CHECK(mae(std::vector<double>{0, 1, 2}, std::vector<double>{1, 1, 1}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("perfect and constant predictors at both levels") {
  const std::vector<SeriesPair> perfect{{0, 0, {0, 1, 2}, {0, 1, 2}}};
  for (auto level : {MetricLevel::frame, MetricLevel::sequence}) {
    const auto r = evaluate(perfect, level);
    CHECK(*r.pcc == doctest::Approx(1.0));
    CHECK(*r.icc == doctest::Approx(1.0));
    CHECK(r.mae == 0.0);
  }
  const std::vector<SeriesPair> flat{{0, 0, {0, 1, 2, 5}, {1, 1, 1, 1}}};
  const auto r = evaluate(flat, MetricLevel::frame);
  CHECK_FALSE(r.pcc.has_value());
  CHECK_FALSE(r.icc.has_value());
  CHECK(r.mae == doctest::Approx((1 + 0 + 1 + 4) / 4.0));
}

TEST_CASE("three-sequence toy set aggregates by hand") {
  const std::vector<SeriesPair> s{{0, 0, {0, 1, 2}, {0, 1, 2}}, {1, 0, {0, 1, 2}, {0, 2, 1}}, {2, 0, {1, 2, 3}, {2, 3, 4}}};
  const auto r = evaluate(s, MetricLevel::frame, Aggregation::per_sequence);
  const double want_pcc = (1.0 + oracle::pcc({0, 1, 2}, {0, 2, 1}) + 1.0) / 3.0;
  const double want_icc = (1.0 + oracle::icc({0, 1, 2}, {0, 2, 1}) + oracle::icc({1, 2, 3}, {2, 3, 4})) / 3.0;
  CHECK(*r.pcc == doctest::Approx(want_pcc).epsilon(1e-14));
  CHECK(*r.icc == doctest::Approx(want_icc).epsilon(1e-14));
  CHECK(r.mae == doctest::Approx((0.0 + 2.0 / 3.0 + 1.0) / 3.0));
}
