#include <doctest.h>

#include <stdexcept>

#include <random>

#include "oracles.hpp"
#include "wsdaor/losses.hpp"

using namespace wsdaor;
using namespace wsdaor::diff;

TEST_CASE("source loss sums frames and divides by sequence count") {
  const std::vector<double> pred{0.5, 0.0, 1.0}, label{0.0, 0.0, -1.0};
  CHECK(source_loss(pred, label, 2) == doctest::Approx((0.25 + 4.0) / 2.0));
}

TEST_CASE("target weak loss is the code-weighted cross entropy") {
  const std::vector<double> pooled{0.7, 0.2, 0.1, 0.1, 0.1, 0.8};
  const std::vector<GaussianCode> codes{onehot_encode(OrdinalLevel(0, 3), 3), gaussian_encode(OrdinalLevel(2, 3), 1.0, 3)};
  const double want = -(std::log(0.7) + (codes[1].values[0] * std::log(0.1) + codes[1].values[1] * std::log(0.1) +
                                         std::log(0.8))) / 2.0;
  CHECK(target_weak_loss(pooled, codes, 2) == doctest::Approx(want));
}

TEST_CASE("domain loss is the logistic loss over frames") {
  const std::vector<double> p{0.9, 0.2, 0.5};
  const std::vector<int> d{1, 0, 1};
  CHECK(domain_loss(p, d, 3) == doctest::Approx(-(std::log(0.9) + std::log(0.8) + std::log(0.5)) / 3.0));
}

TEST_CASE("lambda schedule") {
  CHECK(lambda_schedule(0.0) == 0.0);
  CHECK(lambda_schedule(1.0) == doctest::Approx(2.0 / (1.0 + std::exp(-10.0)) - 1.0));
  double prev = -1;
  for (double p = 0; p <= 1.0; p += 0.05) {
    CHECK(lambda_schedule(p) > prev);
    prev = lambda_schedule(p);
  }
  CHECK(prev < 1.0);
}

TEST_CASE("report total subtracts the weighted domain term") {
  const auto r = make_report(1.0, 2.0, 4.0, 0.5);
  CHECK(r.total == 1.0);
}

TEST_CASE("graph losses equal the plain definitions and pass finite differences") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor preds = oracle::random_tensor(rng, {7, 1});
    const Tensor labels = oracle::random_tensor(rng, {7, 1});
    Tape tape;
    auto v = diff_loss::source_loss(tape.constant(preds), labels, 3).value()[0];
    CHECK(v == doctest::Approx(source_loss(preds.data(), labels.data(), 3)).epsilon(1e-14));
    CHECK(oracle::gradient_check(
              [&](Tape& t, const std::vector<Var>& x) { return diff_loss::source_loss(x[0], labels, 3); }, {preds}) <=
          1e-6);

    Tensor pooled = oracle::random_tensor(rng, {2, 6}, 0.05, 1.0);
    const std::vector<GaussianCode> codes{gaussian_encode(OrdinalLevel(1), 0.3, 6), gaussian_encode(OrdinalLevel(4), 1.0, 6)};
    Tape t2;
    CHECK(diff_loss::target_weak_loss(t2.constant(pooled), codes, 2).value()[0] ==
          doctest::Approx(target_weak_loss(pooled.data(), codes, 2)).epsilon(1e-14));
    CHECK(oracle::gradient_check(
              [&](Tape& t, const std::vector<Var>& x) { return diff_loss::target_weak_loss(x[0], codes, 2); },
              {pooled}) <= 1e-6);

    const Tensor p = oracle::random_tensor(rng, {5, 1}, 0.05, 0.95);
    for (int d : {0, 1}) {
      Tape t3;
      const std::vector<int> domains(5, d);
      CHECK(diff_loss::domain_loss_sum(t3.constant(p), d).value()[0] ==
            doctest::Approx(domain_loss(p.data(), domains, 1)).epsilon(1e-14));
      CHECK(oracle::gradient_check(
                [&](Tape& t, const std::vector<Var>& x) { return diff_loss::domain_loss_sum(x[0], d); }, {p}) <= 1e-6);
    }
  }
}

TEST_CASE("source loss examples") {
  CHECK(source_loss(std::vector<double>{1, 2}, std::vector<double>{1, 2}, 1) == 0.0);
  CHECK(source_loss(std::vector<double>{1, 2}, std::vector<double>{0, 0}, 1) == 5.0);
  // Two identical sequences: twice the frame sum over twice the count.
  CHECK(source_loss(std::vector<double>{1, 2, 1, 2}, std::vector<double>{0, 0, 0, 0}, 2) == 5.0);
}

TEST_CASE("weak loss corner cases") {
  const std::vector<double> uniform(4, 0.25);
  CHECK(target_weak_loss(uniform, {onehot_encode(OrdinalLevel(2, 4), 4)}, 1) == doctest::Approx(std::log(4.0)));
  // A one-hot prediction at the mode: the mode term is zero and the other
  // terms hit the clamp.
  const std::vector<double> at_mode{0, 0, 1, 0, 0, 0};
  const auto code = gaussian_encode(OrdinalLevel(2), 0.3, 6);
  double tail = 0;
  for (int k = 0; k < 6; ++k) {
    if (k != 2) tail += code.values[k];
  }
  CHECK(target_weak_loss(at_mode, {code}, 1) == doctest::Approx(-tail * std::log(diff::kLogFloor)));
}

TEST_CASE("domain loss corner cases") {
  CHECK(domain_loss(std::vector<double>{1.0, 0.0}, std::vector<int>{1, 0}, 1) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(domain_loss(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1}, 1) ==
        doctest::Approx(3 * std::log(2.0)));
}

TEST_CASE("lambda at the end of training") {
  CHECK(lambda_schedule(1.0, 10.0) == doctest::Approx(0.99991).epsilon(1e-5));
}
