#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace wsdaor {

inline constexpr int kDefaultLevels = 6;

/// An ordinal intensity level in [0, levels).
class OrdinalLevel {
 public:
  OrdinalLevel(int value, int levels = kDefaultLevels);

  int value() const noexcept { return value_; }
  int levels() const noexcept { return levels_; }

  friend bool operator==(const OrdinalLevel&, const OrdinalLevel&) = default;

 private:
  int value_;
  int levels_;
};

/// Soft label vector over the K ordinal levels.
struct GaussianCode {
  std::vector<double> values;
  double sigma = 0.0;  // 0 for one-hot codes
  OrdinalLevel center{0};
  bool normalized = false;

  std::size_t levels() const noexcept { return values.size(); }
};

enum class LabelEncoding { onehot, gaussian, gaussian_normalized };

std::string_view to_string(LabelEncoding e) noexcept;
LabelEncoding parse_label_encoding(std::string_view name);

/// Maps a 0..15 PSPI-style raw score onto six levels:
/// 0, 1, 2, 3 map to themselves, 4-5 map to 4, 6-15 map to 5.
/// (The source protocol calls this "5 ordinal levels" but lists six bins.)
OrdinalLevel quantize_intensity(int raw);

/// exp(-(k - label)^2 / (2 sigma^2)) for k in [0, levels). With normalize the
/// vector is divided by its sum.
GaussianCode gaussian_encode(OrdinalLevel label, double sigma, int levels, bool normalize = false);

GaussianCode onehot_encode(OrdinalLevel label, int levels);

/// Dispatches on the configured encoding. sigma is ignored for one-hot.
GaussianCode encode_label(OrdinalLevel label, LabelEncoding encoding, double sigma);

/// Nearest level for an intensity in [0, 1]: round(z * (levels - 1)).
OrdinalLevel level_from_unit_intensity(double z, int levels);

/// Same, for an intensity in [-1, 1] mapped affinely onto [0, 1].
OrdinalLevel level_from_signed_intensity(double y, int levels);

}  // namespace wsdaor
