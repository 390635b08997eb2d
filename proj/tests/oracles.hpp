#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. Nothing here calls the code under test except to build
// the function being differentiated.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "wsdaor/autodiff.hpp"
#include "wsdaor/tensor.hpp"

namespace oracle {

using wsdaor::Tensor;
namespace diff = wsdaor::diff;

inline Tensor random_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

/// Keeps entries at least `gap` away from zero, so kinks are not straddled by
/// a finite-difference step.
inline void avoid_zero(Tensor& t, double gap = 1e-3) {
  for (double& v : t.data()) {
    if (std::abs(v) < gap) v = v < 0 ? -gap - std::abs(v) : gap + std::abs(v);
  }
}

/// Builds a scalar from leaves on a fresh tape.
using ScalarFn = std::function<diff::Var(diff::Tape&, const std::vector<diff::Var>&)>;

inline double evaluate(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  diff::Tape tape;
  std::vector<diff::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.constant(t));
  return f(tape, leaves).value()[0];
}

inline std::vector<Tensor> analytic_gradients(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  diff::Tape tape;
  std::vector<diff::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.parameter(t));
  tape.backward(f(tape, leaves));
  std::vector<Tensor> out;
  for (auto v : leaves) out.push_back(v.grad());
  return out;
}

/// Central differences, (f(x + h e_i) - f(x - h e_i)) / 2h, per input entry.
inline std::vector<Tensor> numeric_gradients(const std::function<double(const std::vector<Tensor>&)>& f,
                                             std::vector<Tensor> inputs, double h = 1e-6) {
  std::vector<Tensor> out;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor g = Tensor::zeros_like(inputs[k]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = inputs[k][i];
      inputs[k][i] = x + h;
      const double up = f(inputs);
      inputs[k][i] = x - h;
      const double down = f(inputs);
      inputs[k][i] = x;
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// ||a - b|| / max(||a||, ||b||, floor) over all entries of all tensors.
inline double relative_error(const std::vector<Tensor>& a, const std::vector<Tensor>& b, double floor = 1e-6) {
  double diff2 = 0.0, a2 = 0.0, b2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].size(); ++i) {
      diff2 += (a[k][i] - b[k][i]) * (a[k][i] - b[k][i]);
      a2 += a[k][i] * a[k][i];
      b2 += b[k][i] * b[k][i];
    }
  }
  return std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(b2), floor});
}

inline double gradient_check(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  const auto analytic = analytic_gradients(f, inputs);
  const auto numeric = numeric_gradients([&](const std::vector<Tensor>& x) { return evaluate(f, x); }, inputs);
  return relative_error(analytic, numeric);
}

// ---------------------------------------------------------------------------
// Pooling by enumeration: every frame's level is computed with a plain loop,
// the maximum level found, and the qualifying set listed explicitly.

struct PoolOracle {
  std::vector<std::size_t> adaptive_set;
  std::vector<double> adaptive_mean;
  std::size_t max_frame = 0;
};

inline PoolOracle brute_force_pool(const Tensor& probs) {
  const std::size_t n = probs.rows(), k = probs.cols();
  std::vector<int> level(n);
  for (std::size_t j = 0; j < n; ++j) {
    int best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (probs.at(j, c) > probs.at(j, static_cast<std::size_t>(best))) best = static_cast<int>(c);
    }
    level[j] = best;
  }
  int top = -1;
  for (int l : level) top = std::max(top, l);

  PoolOracle out;
  out.adaptive_mean.assign(k, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (level[j] == top) out.adaptive_set.push_back(j);
  }
  for (auto j : out.adaptive_set) {
    for (std::size_t c = 0; c < k; ++c) out.adaptive_mean[c] += probs.at(j, c);
  }
  for (double& v : out.adaptive_mean) v /= static_cast<double>(out.adaptive_set.size());

  // Among the frames at the top level, the largest probability at that
  // level; the first such frame on ties.
  out.max_frame = out.adaptive_set.front();
  for (auto j : out.adaptive_set) {
    if (probs.at(j, top) > probs.at(out.max_frame, top)) out.max_frame = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics in their centred forms, which equal the raw-sums definitions
// algebraically but share no code with them.

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double pcc(const std::vector<double>& y, const std::vector<double>& h) {
  const double my = mean_of(y), mh = mean_of(h);
  double syh = 0, syy = 0, shh = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    syh += (y[i] - my) * (h[i] - mh);
    syy += (y[i] - my) * (y[i] - my);
    shh += (h[i] - mh) * (h[i] - mh);
  }
  return syh / std::sqrt(syy * shh);
}

/// BMS is half the sample variance of y + h; EMS is sum (y - h)^2 / 2n.
inline double icc(const std::vector<double>& y, const std::vector<double>& h) {
  const std::size_t n = y.size();
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = y[i] + h[i];
  const double ms = mean_of(s);
  double var = 0, err = 0;
  for (std::size_t i = 0; i < n; ++i) {
    var += (s[i] - ms) * (s[i] - ms);
    err += (y[i] - h[i]) * (y[i] - h[i]);
  }
  const double bms = var / static_cast<double>(n - 1) / 2.0;
  const double ems = err / (2.0 * static_cast<double>(n));
  return (bms - ems) / (bms + ems);
}

inline double mae(const std::vector<double>& y, const std::vector<double>& h) {
  double total = 0;
  for (std::size_t i = 0; i < y.size(); ++i) total += std::abs(y[i] - h[i]);
  return total / static_cast<double>(y.size());
}

/// Average ranks (1-based), ties sharing the mean rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = (static_cast<double>(i + j) / 2.0) + 1.0;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pcc(ranks(x), ranks(y));
}

}  // namespace oracle
