#include "wsdaor/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wsdaor::diff {

namespace {

void require_same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    throw std::invalid_argument("operands belong to different tapes");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_string() +
                                " vs " + b.shape_string());
  }
}

void require_matrix(const Tensor& t, std::string_view op, std::string_view what) {
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(op) + ": " + std::string(what) +
                                " must be a matrix, got " + t.shape_string());
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Elementwise unary op: out = f(x), dx += g(x, out) * dout.
template <typename Forward, typename Derivative>
Var unary(OpKind kind, Var x, Forward f, Derivative df) {
  const Tensor& in = x.value();
  Tensor out = Tensor::zeros_like(in);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  const std::size_t xi = x.id();
  return x.tape()->record(kind, {x}, std::move(out), [xi, df](Tape& tape, std::size_t self) {
    Tensor* gx = tape.grad_buffer(xi);
    if (!gx) return;
    const Tensor& xv = tape.value(xi);
    const Tensor& yv = tape.value(self);
    const Tensor& gy = tape.grad(self);
    for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += df(xv[i], yv[i]) * gy[i];
  });
}

}  // namespace

std::string_view op_name(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::parameter: return "parameter";
    case OpKind::constant: return "constant";
    case OpKind::affine: return "affine";
    case OpKind::softmax_rows: return "softmax_rows";
    case OpKind::grl: return "grl";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::log: return "log";
    case OpKind::square: return "square";
    case OpKind::add: return "add";
    case OpKind::subtract: return "subtract";
    case OpKind::multiply: return "multiply";
    case OpKind::scale: return "scale";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::pool_rows: return "pool_rows";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

Var Tape::parameter(Tensor value) {
  nodes_.push_back(Node{OpKind::parameter, {}, std::move(value), {}, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{OpKind::constant, {}, std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, std::vector<Var> inputs, Tensor value, Backprop backprop) {
  Node node{kind, {}, std::move(value), {}, false, std::move(backprop)};
  node.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (in.tape() != this) throw std::invalid_argument("input belongs to a different tape");
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.size() != n.value.size()) {
    throw std::logic_error("gradient requested before backward()");
  }
  return n.grad;
}

Tensor* Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  return n.requires_grad ? &n.grad : nullptr;
}

void Tape::ensure_grads() {
  for (auto& n : nodes_) {
    if (n.grad.size() != n.value.size() || !n.grad.same_shape(n.value)) {
      n.grad = Tensor::zeros_like(n.value);
    }
  }
}

void Tape::zero_gradients() {
  ensure_grads();
  for (auto& n : nodes_) n.grad.fill(0.0);
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw std::invalid_argument("root belongs to a different tape");
  const Tensor& rv = nodes_[root.id()].value;
  if (rv.size() != 1) {
    throw std::invalid_argument("backward() needs a scalar root, got shape " +
                                rv.shape_string());
  }
  ensure_grads();
  nodes_[root.id()].grad[0] += 1.0;
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.requires_grad && n.backprop) n.backprop(*this, id);
  }
}

Var affine(Var input, Var weights, Var bias) {
  require_same_tape(input, weights);
  require_same_tape(input, bias);
  const Tensor& x = input.value();
  const Tensor& w = weights.value();
  const Tensor& b = bias.value();
  require_matrix(x, "affine", "input");
  require_matrix(w, "affine", "weights");
  const std::size_t batch = x.shape()[0], in = x.shape()[1], out = w.shape()[1];
  if (w.shape()[0] != in) {
    throw std::invalid_argument("affine: input " + x.shape_string() +
                                " does not conform to weights " + w.shape_string());
  }
  if (b.rank() != 1 || b.size() != out) {
    throw std::invalid_argument("affine: bias " + b.shape_string() +
                                " does not conform to weights " + w.shape_string());
  }

  Tensor y({batch, out});
  const double* wd = w.data().data();
  for (std::size_t r = 0; r < batch; ++r) {
    double* yr = &y[r * out];
    for (std::size_t o = 0; o < out; ++o) yr[o] = b[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = x[r * in + i];
      if (xv == 0.0) continue;
      const double* wr = wd + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xv * wr[o];
    }
  }

  const std::size_t xi = input.id(), wi = weights.id(), bi = bias.id();
  return input.tape()->record(
      OpKind::affine, {input, weights, bias}, std::move(y),
      [xi, wi, bi, batch, in, out](Tape& tape, std::size_t self) {
        const double* gy = tape.grad(self).data().data();
        const Tensor& xv = tape.value(xi);
        const double* wv = tape.value(wi).data().data();
        if (Tensor* gx = tape.grad_buffer(xi)) {
          for (std::size_t r = 0; r < batch; ++r) {
            const double* gyr = gy + r * out;
            for (std::size_t i = 0; i < in; ++i) {
              const double* wr = wv + i * out;
              double acc = 0.0;
              for (std::size_t o = 0; o < out; ++o) acc += gyr[o] * wr[o];
              (*gx)[r * in + i] += acc;
            }
          }
        }
        if (Tensor* gw = tape.grad_buffer(wi)) {
          for (std::size_t r = 0; r < batch; ++r) {
            const double* gyr = gy + r * out;
            for (std::size_t i = 0; i < in; ++i) {
              const double xv_ri = xv[r * in + i];
              if (xv_ri == 0.0) continue;
              double* gwr = &(*gw)[i * out];
              for (std::size_t o = 0; o < out; ++o) gwr[o] += xv_ri * gyr[o];
            }
          }
        }
        if (Tensor* gb = tape.grad_buffer(bi)) {
          for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t o = 0; o < out; ++o) (*gb)[o] += gy[r * out + o];
          }
        }
      });
}

Var softmax_rows(Var logits) {
  const Tensor& z = logits.value();
  require_matrix(z, "softmax_rows", "logits");
  const std::size_t rows = z.shape()[0], k = z.shape()[1];
  if (k < 2) throw std::invalid_argument("softmax_rows: need at least 2 columns, got " + z.shape_string());

  Tensor y = Tensor::zeros_like(z);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = z.data().data() + r * k;
    double* yr = &y[r * k];
    const double mx = *std::max_element(zr, zr + k);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      yr[c] = std::exp(zr[c] - mx);
      total += yr[c];
    }
    for (std::size_t c = 0; c < k; ++c) yr[c] /= total;
  }

  const std::size_t zi = logits.id();
  return logits.tape()->record(
      OpKind::softmax_rows, {logits}, std::move(y), [zi, rows, k](Tape& tape, std::size_t self) {
        Tensor* gz = tape.grad_buffer(zi);
        if (!gz) return;
        const Tensor& yv = tape.value(self);
        const Tensor& gy = tape.grad(self);
        for (std::size_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < k; ++c) dot += gy[r * k + c] * yv[r * k + c];
          for (std::size_t c = 0; c < k; ++c) {
            (*gz)[r * k + c] += yv[r * k + c] * (gy[r * k + c] - dot);
          }
        }
      });
}

Var grl(Var input, double lambda) {
  if (!std::isfinite(lambda)) throw std::invalid_argument("grl: lambda must be finite");
  const std::size_t xi = input.id();
  return input.tape()->record(OpKind::grl, {input}, input.value(),
                              [xi, lambda](Tape& tape, std::size_t self) {
                                Tensor* gx = tape.grad_buffer(xi);
                                if (!gx) return;
                                const Tensor& gy = tape.grad(self);
                                for (std::size_t i = 0; i < gy.size(); ++i) {
                                  (*gx)[i] += -lambda * gy[i];
                                }
                              });
}

Var relu(Var x) {
  return unary(
      OpKind::relu, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return unary(OpKind::sigmoid, x, stable_sigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Var log(Var x) {
  return unary(
      OpKind::log, x, [](double v) { return std::log(std::max(v, kLogFloor)); },
      [](double v, double) { return v >= kLogFloor ? 1.0 / v : 0.0; });
}

Var square(Var x) {
  return unary(
      OpKind::square, x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Var scale(Var x, double factor) {
  return unary(
      OpKind::scale, x, [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

namespace {

template <typename Forward, typename Backward>
Var binary(OpKind kind, Var a, Var b, Forward f, Backward bw) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, op_name(kind));
  Tensor out = Tensor::zeros_like(av);
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i], bv[i]);
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(kind, {a, b}, std::move(out), [ai, bi, bw](Tape& tape, std::size_t self) {
    const Tensor& gy = tape.grad(self);
    const Tensor& x = tape.value(ai);
    const Tensor& y = tape.value(bi);
    Tensor* ga = tape.grad_buffer(ai);
    Tensor* gb = tape.grad_buffer(bi);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      const auto [da, db] = bw(x[i], y[i]);
      if (ga) (*ga)[i] += da * gy[i];
      if (gb) (*gb)[i] += db * gy[i];
    }
  });
}

struct Partials {
  double da;
  double db;
};

}  // namespace

Var add(Var a, Var b) {
  return binary(
      OpKind::add, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return Partials{1.0, 1.0}; });
}

Var subtract(Var a, Var b) {
  return binary(
      OpKind::subtract, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return Partials{1.0, -1.0}; });
}

Var multiply(Var a, Var b) {
  return binary(
      OpKind::multiply, a, b, [](double x, double y) { return x * y; },
      [](double x, double y) { return Partials{y, x}; });
}

Var sum(Var x) {
  const Tensor& v = x.value();
  double total = 0.0;
  for (double e : v.data()) total += e;
  const std::size_t xi = x.id();
  return x.tape()->record(OpKind::sum, {x}, Tensor({1}, std::vector<double>{total}),
                          [xi](Tape& tape, std::size_t self) {
                            Tensor* gx = tape.grad_buffer(xi);
                            if (!gx) return;
                            const double g = tape.grad(self)[0];
                            for (double& e : gx->data()) e += g;
                          });
}

Var mean(Var x) {
  const Tensor& v = x.value();
  const double n = static_cast<double>(v.size());
  double total = 0.0;
  for (double e : v.data()) total += e;
  const std::size_t xi = x.id();
  return x.tape()->record(OpKind::mean, {x}, Tensor({1}, std::vector<double>{total / n}),
                          [xi, n](Tape& tape, std::size_t self) {
                            Tensor* gx = tape.grad_buffer(xi);
                            if (!gx) return;
                            const double g = tape.grad(self)[0] / n;
                            for (double& e : gx->data()) e += g;
                          });
}

Var pool_rows(Var x, const std::vector<std::vector<std::size_t>>& groups) {
  const Tensor& v = x.value();
  require_matrix(v, "pool_rows", "input");
  if (groups.empty()) throw std::invalid_argument("pool_rows: no groups");
  const std::size_t rows = v.shape()[0], k = v.shape()[1];
  Tensor out({groups.size(), k});
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g];
    if (members.empty()) throw std::invalid_argument("pool_rows: empty group");
    for (auto r : members) {
      if (r >= rows) {
        throw std::invalid_argument("pool_rows: row " + std::to_string(r) +
                                    " out of range for " + v.shape_string());
      }
      for (std::size_t c = 0; c < k; ++c) out[g * k + c] += v[r * k + c];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (std::size_t c = 0; c < k; ++c) out[g * k + c] *= inv;
  }
  const std::size_t xi = x.id();
  return x.tape()->record(OpKind::pool_rows, {x}, std::move(out),
                          [xi, groups, k](Tape& tape, std::size_t self) {
                            Tensor* gx = tape.grad_buffer(xi);
                            if (!gx) return;
                            const Tensor& gy = tape.grad(self);
                            for (std::size_t g = 0; g < groups.size(); ++g) {
                              const double inv = 1.0 / static_cast<double>(groups[g].size());
                              for (auto r : groups[g]) {
                                for (std::size_t c = 0; c < k; ++c) {
                                  (*gx)[r * k + c] += inv * gy[g * k + c];
                                }
                              }
                            }
                          });
}

}  // namespace wsdaor::diff
