#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wsdaor/autodiff.hpp"
#include "wsdaor/tensor.hpp"

namespace wsdaor {

struct NetworkConfig {
  std::size_t input_dim = 12;
  std::size_t hidden_dim = 32;    // first extractor layer
  std::size_t feature_dim = 16;   // shared feature width F
  std::size_t domain_hidden = 8;  // discriminator hidden layer
  int levels = 6;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// The four parameter groups. Each parameter is a named tensor.
enum class ParamGroup { extractor, regressor, ordinal, discriminator };

struct NamedTensor {
  std::string name;
  ParamGroup group;
  Tensor value;
};

/// Parameters of the extractor G_f, regression head G_l, ordinal head G_wl and
/// discriminator G_d, held in a fixed order.
class NetworkParams {
 public:
  NetworkParams() = default;
  explicit NetworkParams(std::vector<NamedTensor> tensors) : tensors_(std::move(tensors)) {}

  std::vector<NamedTensor>& tensors() noexcept { return tensors_; }
  const std::vector<NamedTensor>& tensors() const noexcept { return tensors_; }
  std::size_t size() const noexcept { return tensors_.size(); }

  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  bool all_finite() const;
  double squared_norm() const;

  friend bool operator==(const NetworkParams& a, const NetworkParams& b);

 private:
  std::vector<NamedTensor> tensors_;
};

/// Glorot-uniform weights in [-a, a], a = sqrt(6 / (fan_in + fan_out)); zero biases.
NetworkParams init_network(const NetworkConfig& cfg);

/// All-zero parameters with the right shapes.
NetworkParams zero_network(const NetworkConfig& cfg);

/// Parameters bound as leaves of one tape. params[i] corresponds to
/// NetworkParams::tensors()[i].
struct BoundNetwork {
  std::vector<diff::Var> params;

  diff::Var features(diff::Var frames) const;
  /// G_l on top of features: [batch x 1].
  diff::Var regress(diff::Var features) const;
  /// G_wl with softmax: [batch x K].
  diff::Var ordinal(diff::Var features) const;
  /// GRL then G_d with sigmoid: [batch x 1].
  diff::Var domain(diff::Var features, double lambda) const;
};

BoundNetwork bind(diff::Tape& tape, const NetworkParams& params);

/// Stacks frames into an [n x dim] tensor, checking the dimension.
Tensor frames_tensor(std::span<const double> features, std::size_t dim, const NetworkConfig& cfg);

Tensor forward_source(const NetworkParams& params, const NetworkConfig& cfg, const Tensor& frames);
Tensor forward_target(const NetworkParams& params, const NetworkConfig& cfg, const Tensor& frames);
Tensor forward_domain(const NetworkParams& params, const NetworkConfig& cfg, const Tensor& frames,
                      double lambda);

// Checkpoint files: text, one header line, one config line, then one block
// per tensor:
//
//   wsdaor-checkpoint 1
//   config input_dim=12 hidden_dim=32 feature_dim=16 domain_hidden=8 levels=6 seed=0
//   tensor <name> <rank> <dim>...
//   <values, shortest round-trip decimal, whitespace separated>
//
// Values round-trip bit-exactly.
void save_checkpoint(std::ostream& out, const NetworkConfig& cfg, const NetworkParams& params);
void save_checkpoint(const std::filesystem::path& path, const NetworkConfig& cfg,
                     const NetworkParams& params);

struct Checkpoint {
  NetworkConfig config;
  NetworkParams params;
};

Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace wsdaor
