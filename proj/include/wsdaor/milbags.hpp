#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "wsdaor/ordinal.hpp"
#include "wsdaor/tensor.hpp"

namespace wsdaor {

enum class Domain : int { source = 0, target = 1 };

/// One recorded sequence. Source labels are continuous intensities in
/// [-1, 1]; target labels are ordinal levels stored as doubles.
struct Sequence {
  int subject = 0;
  int index = 0;  // sequence number within the subject
  Domain domain = Domain::source;
  std::size_t dim = 0;
  std::vector<double> features;  // length() x dim, row-major
  std::vector<double> labels;

  std::size_t length() const noexcept { return labels.size(); }
  std::span<const double> frame(std::size_t t) const {
    return std::span<const double>(features).subspan(t * dim, dim);
  }
  /// Per-frame ordinal levels (source intensities are quantized).
  std::vector<int> frame_levels(int levels) const;
  /// Throws if the frame/label counts or dimensions disagree.
  void validate() const;
};

struct BagOrigin {
  int subject = 0;
  int sequence = 0;
  std::size_t offset = 0;
};

/// Fixed-length window of a sequence carrying one weak label. frame_targets is
/// filled only for source bags; target bags expose nothing below the bag label.
struct Bag {
  Domain domain = Domain::source;
  std::size_t dim = 0;
  std::vector<double> features;  // length() x dim
  OrdinalLevel weak_label{0};
  BagOrigin origin;
  std::vector<double> frame_targets;

  std::size_t length() const noexcept { return dim ? features.size() / dim : 0; }
};

/// Windows of `window` frames starting every `stride` frames. The weak label is
/// the maximum frame level inside the window. Short sequences yield no bags.
std::vector<Bag> make_bags(const Sequence& seq, std::size_t window, std::size_t stride,
                           int levels = kDefaultLevels);

enum class PoolingMode { max, mean, adaptive };

std::string_view to_string(PoolingMode m) noexcept;
PoolingMode parse_pooling_mode(std::string_view name);

struct PoolResult {
  std::vector<double> pooled;
  std::vector<std::size_t> selected;  // frames that contributed, ascending

  std::size_t count() const noexcept { return selected.size(); }
};

/// Row with the highest argmax level; ties go to the larger probability at
/// that level, then to the earlier frame.
PoolResult max_pool(const Tensor& probs);

/// Mean over every frame whose argmax equals the highest argmax in the bag.
PoolResult adaptive_pool(const Tensor& probs);

PoolResult mean_pool(const Tensor& probs);

PoolResult pool(const Tensor& probs, PoolingMode mode);

/// Argmax of a row; ties resolve to the lowest level.
int argmax(std::span<const double> row);

}  // namespace wsdaor
