#include "wsdaor/network.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace wsdaor {

void NetworkConfig::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || feature_dim < 1 || domain_hidden < 1) {
    throw std::invalid_argument("network dimensions must all be >= 1");
  }
  if (levels < 2) throw std::invalid_argument("network needs at least 2 ordinal levels");
}

const Tensor& NetworkParams::get(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t.value;
  }
  throw std::out_of_range("no parameter named '" + name + "'");
}

Tensor& NetworkParams::get(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

bool NetworkParams::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.value.all_finite()) return false;
  }
  return true;
}

double NetworkParams::squared_norm() const {
  double total = 0.0;
  for (const auto& t : tensors_) {
    for (double v : t.value.data()) total += v * v;
  }
  return total;
}

bool operator==(const NetworkParams& a, const NetworkParams& b) {
  if (a.tensors_.size() != b.tensors_.size()) return false;
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    if (a.tensors_[i].name != b.tensors_[i].name || !(a.tensors_[i].value == b.tensors_[i].value)) {
      return false;
    }
  }
  return true;
}

namespace {

struct LayerShape {
  const char* weight;
  const char* bias;
  ParamGroup group;
  std::size_t fan_in;
  std::size_t fan_out;
};

std::vector<LayerShape> layer_shapes(const NetworkConfig& cfg) {
  const auto k = static_cast<std::size_t>(cfg.levels);
  return {
      {"f.w0", "f.b0", ParamGroup::extractor, cfg.input_dim, cfg.hidden_dim},
      {"f.w1", "f.b1", ParamGroup::extractor, cfg.hidden_dim, cfg.feature_dim},
      {"l.w", "l.b", ParamGroup::regressor, cfg.feature_dim, 1},
      {"wl.w", "wl.b", ParamGroup::ordinal, cfg.feature_dim, k},
      {"d.w0", "d.b0", ParamGroup::discriminator, cfg.feature_dim, cfg.domain_hidden},
      {"d.w1", "d.b1", ParamGroup::discriminator, cfg.domain_hidden, 1},
  };
}

enum : std::size_t { kFw0, kFb0, kFw1, kFb1, kLw, kLb, kWlw, kWlb, kDw0, kDb0, kDw1, kDb1, kParamCount };

}  // namespace

NetworkParams zero_network(const NetworkConfig& cfg) {
  cfg.validate();
  std::vector<NamedTensor> out;
  for (const auto& layer : layer_shapes(cfg)) {
    out.push_back({layer.weight, layer.group, Tensor({layer.fan_in, layer.fan_out})});
    out.push_back({layer.bias, layer.group, Tensor({layer.fan_out})});
  }
  return NetworkParams(std::move(out));
}

NetworkParams init_network(const NetworkConfig& cfg) {
  NetworkParams params = zero_network(cfg);
  std::mt19937_64 rng(cfg.seed);
  auto& tensors = params.tensors();
  const auto shapes = layer_shapes(cfg);
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const double a = std::sqrt(6.0 / static_cast<double>(shapes[l].fan_in + shapes[l].fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (double& w : tensors[2 * l].value.data()) w = dist(rng);
  }
  return params;
}

diff::Var BoundNetwork::features(diff::Var frames) const {
  auto h = diff::relu(diff::affine(frames, params[kFw0], params[kFb0]));
  return diff::relu(diff::affine(h, params[kFw1], params[kFb1]));
}

diff::Var BoundNetwork::regress(diff::Var feats) const {
  return diff::affine(feats, params[kLw], params[kLb]);
}

diff::Var BoundNetwork::ordinal(diff::Var feats) const {
  return diff::softmax_rows(diff::affine(feats, params[kWlw], params[kWlb]));
}

diff::Var BoundNetwork::domain(diff::Var feats, double lambda) const {
  auto reversed = diff::grl(feats, lambda);
  auto h = diff::relu(diff::affine(reversed, params[kDw0], params[kDb0]));
  return diff::sigmoid(diff::affine(h, params[kDw1], params[kDb1]));
}

BoundNetwork bind(diff::Tape& tape, const NetworkParams& params) {
  if (params.size() != kParamCount) {
    throw std::invalid_argument("network has " + std::to_string(params.size()) +
                                " parameter tensors, expected " + std::to_string(kParamCount));
  }
  BoundNetwork net;
  net.params.reserve(params.size());
  for (const auto& t : params.tensors()) net.params.push_back(tape.parameter(t.value));
  return net;
}

Tensor frames_tensor(std::span<const double> features, std::size_t dim, const NetworkConfig& cfg) {
  if (dim != cfg.input_dim) {
    throw std::invalid_argument("frames have dimension " + std::to_string(dim) +
                                " but the network expects " + std::to_string(cfg.input_dim));
  }
  if (dim == 0 || features.size() % dim != 0 || features.empty()) {
    throw std::invalid_argument("frame buffer is not a whole number of frames");
  }
  return Tensor({features.size() / dim, dim}, std::vector<double>(features.begin(), features.end()));
}

namespace {

void check_frames(const Tensor& frames, const NetworkConfig& cfg) {
  if (frames.rank() != 2 || frames.shape()[1] != cfg.input_dim) {
    throw std::invalid_argument("frames " + frames.shape_string() + " do not match input_dim " +
                                std::to_string(cfg.input_dim));
  }
}

}  // namespace

Tensor forward_source(const NetworkParams& params, const NetworkConfig& cfg, const Tensor& frames) {
  check_frames(frames, cfg);
  diff::Tape tape;
  const auto net = bind(tape, params);
  return net.regress(net.features(tape.constant(frames))).value();
}

Tensor forward_target(const NetworkParams& params, const NetworkConfig& cfg, const Tensor& frames) {
  check_frames(frames, cfg);
  diff::Tape tape;
  const auto net = bind(tape, params);
  return net.ordinal(net.features(tape.constant(frames))).value();
}

Tensor forward_domain(const NetworkParams& params, const NetworkConfig& cfg, const Tensor& frames,
                      double lambda) {
  check_frames(frames, cfg);
  diff::Tape tape;
  const auto net = bind(tape, params);
  return net.domain(net.features(tape.constant(frames)), lambda).value();
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kMagic = "wsdaor-checkpoint";
constexpr int kVersion = 1;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw std::runtime_error("checkpoint: bad number '" + token + "'");
  }
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t v = 0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw std::runtime_error("checkpoint: bad value for " + key + ": '" + value + "'");
  }
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const NetworkConfig& cfg, const NetworkParams& params) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "config input_dim=" << cfg.input_dim << " hidden_dim=" << cfg.hidden_dim
      << " feature_dim=" << cfg.feature_dim << " domain_hidden=" << cfg.domain_hidden
      << " levels=" << cfg.levels << " seed=" << cfg.seed << '\n';
  for (const auto& t : params.tensors()) {
    out << "tensor " << t.name << ' ' << t.value.rank();
    for (auto d : t.value.shape()) out << ' ' << d;
    out << '\n';
    const auto data = t.value.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      out << format_double(data[i]) << (i + 1 == data.size() ? '\n' : ' ');
    }
  }
}

void save_checkpoint(const std::filesystem::path& path, const NetworkConfig& cfg,
                     const NetworkParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  save_checkpoint(out, cfg, params);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) {
    throw std::runtime_error("checkpoint: missing header");
  }
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  std::string word;
  in >> word;
  if (word != "config") throw std::runtime_error("checkpoint: missing config line");
  std::string line;
  std::getline(in, line);
  Checkpoint ck;
  std::istringstream fields(line);
  std::string field;
  while (fields >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw std::runtime_error("checkpoint: bad config field '" + field + "'");
    const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
    if (key == "input_dim") ck.config.input_dim = parse_size(key, value);
    else if (key == "hidden_dim") ck.config.hidden_dim = parse_size(key, value);
    else if (key == "feature_dim") ck.config.feature_dim = parse_size(key, value);
    else if (key == "domain_hidden") ck.config.domain_hidden = parse_size(key, value);
    else if (key == "levels") ck.config.levels = static_cast<int>(parse_size(key, value));
    else if (key == "seed") ck.config.seed = parse_size(key, value);
    else throw std::runtime_error("checkpoint: unknown config field '" + key + "'");
  }
  ck.config.validate();
  ck.params = zero_network(ck.config);

  for (auto& expected : ck.params.tensors()) {
    std::string name;
    std::size_t rank = 0;
    if (!(in >> word >> name >> rank) || word != "tensor") {
      throw std::runtime_error("checkpoint: expected tensor " + expected.name);
    }
    if (name != expected.name) {
      throw std::runtime_error("checkpoint: expected tensor " + expected.name + ", found " + name);
    }
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) in >> d;
    if (!in || shape != expected.value.shape()) {
      throw std::runtime_error("checkpoint: tensor " + name + " has shape " + shape_string(shape) +
                               ", config implies " + expected.value.shape_string());
    }
    for (double& v : expected.value.data()) {
      std::string token;
      if (!(in >> token)) throw std::runtime_error("checkpoint: truncated tensor " + name);
      v = parse_double(token);
    }
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace wsdaor
