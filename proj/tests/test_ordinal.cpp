#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "wsdaor/ordinal.hpp"

using namespace wsdaor;

TEST_CASE("levels outside [0, K) are rejected") {
  CHECK_THROWS_AS(OrdinalLevel(-1), std::out_of_range);
  CHECK_THROWS_AS(OrdinalLevel(6), std::out_of_range);
  CHECK_THROWS_AS(OrdinalLevel(3, 3), std::out_of_range);
  CHECK(OrdinalLevel(5).value() == 5);
}

TEST_CASE("raw intensity quantization into six bins") {
  const int expected[16] = {0, 1, 2, 3, 4, 4, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5};
  for (int raw = 0; raw < 16; ++raw) CHECK(quantize_intensity(raw).value() == expected[raw]);
  CHECK_THROWS(quantize_intensity(16));
  CHECK_THROWS(quantize_intensity(-1));
}

TEST_CASE("gaussian code for y=2, sigma=0.3, K=6") {
  const auto code = gaussian_encode(OrdinalLevel(2), 0.3, 6);
  REQUIRE(code.levels() == 6);
  CHECK(code.values[2] == 1.0);
  CHECK(code.values[1] == doctest::Approx(std::exp(-1.0 / 0.18)).epsilon(1e-12));
  CHECK(code.values[1] == code.values[3]);
  CHECK(code.values[0] == doctest::Approx(std::exp(-4.0 / 0.18)).epsilon(1e-12));
}

TEST_CASE("normalized code sums to one") {
  const auto code = gaussian_encode(OrdinalLevel(0), 1.0, 6, true);
  double s = 0;
  for (double v : code.values) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(code.normalized);
}

TEST_CASE("small sigma approaches one-hot") {
  const auto code = gaussian_encode(OrdinalLevel(4), 0.05, 6);
  const auto onehot = onehot_encode(OrdinalLevel(4), 6);
  for (int k = 0; k < 6; ++k) CHECK(code.values[k] == doctest::Approx(onehot.values[k]).epsilon(1e-12));
}

TEST_CASE("sigma must be positive") {
  CHECK_THROWS(gaussian_encode(OrdinalLevel(1), 0.0, 6));
  CHECK_THROWS(gaussian_encode(OrdinalLevel(1), -1.0, 6));
}

TEST_CASE("encode_label dispatch and encoding names round-trip") {
  CHECK(encode_label(OrdinalLevel(3), LabelEncoding::onehot, 0.3).values == onehot_encode(OrdinalLevel(3), 6).values);
  for (auto e : {LabelEncoding::onehot, LabelEncoding::gaussian, LabelEncoding::gaussian_normalized}) {
    CHECK(parse_label_encoding(to_string(e)) == e);
  }
  CHECK_THROWS(parse_label_encoding("softmax"));
}

TEST_CASE("intensity to level mapping") {
  CHECK(level_from_unit_intensity(0.0, 6).value() == 0);
  CHECK(level_from_unit_intensity(1.0, 6).value() == 5);
  CHECK(level_from_unit_intensity(0.5, 6).value() == 3);  // 2.5 rounds away from zero
  CHECK(level_from_unit_intensity(0.29, 6).value() == 1);
  CHECK(level_from_signed_intensity(-1.0, 6).value() == 0);
  CHECK(level_from_signed_intensity(1.0, 6).value() == 5);
}

TEST_CASE("code shape properties") {
  for (int y = 0; y < 6; ++y) {
    const auto code = gaussian_encode(OrdinalLevel(y), 0.7, 6);
    CHECK(code.values[static_cast<std::size_t>(y)] == 1.0);
    for (int d = 1; y + d < 6 || y - d >= 0; ++d) {
      if (y + d < 6) CHECK(code.values[y + d] < code.values[y + d - 1]);
      if (y - d >= 0) CHECK(code.values[y - d] < code.values[y - d + 1]);
      if (y + d < 6 && y - d >= 0) CHECK(code.values[y + d] == code.values[y - d]);
    }
  }
  const auto zero = gaussian_encode(OrdinalLevel(0), 0.3, 6);
  for (int k = 1; k < 6; ++k) CHECK(zero.values[k] < zero.values[k - 1]);
}

TEST_CASE("sigma 1e-3 is one-hot to 1e-6") {
  const auto code = gaussian_encode(OrdinalLevel(3), 1e-3, 6);
  const auto onehot = onehot_encode(OrdinalLevel(3), 6);
  for (int k = 0; k < 6; ++k) CHECK(std::abs(code.values[k] - onehot.values[k]) <= 1e-6);
}
