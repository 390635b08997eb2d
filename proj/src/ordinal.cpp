#include "wsdaor/ordinal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wsdaor {

OrdinalLevel::OrdinalLevel(int value, int levels) : value_(value), levels_(levels) {
  if (levels < 2) throw std::invalid_argument("need at least 2 ordinal levels, got " + std::to_string(levels));
  if (value < 0 || value >= levels) {
    throw std::out_of_range("ordinal level " + std::to_string(value) + " outside [0, " +
                            std::to_string(levels - 1) + "]");
  }
}

std::string_view to_string(LabelEncoding e) noexcept {
  switch (e) {
    case LabelEncoding::onehot: return "onehot";
    case LabelEncoding::gaussian: return "gaussian";
    case LabelEncoding::gaussian_normalized: return "gaussian-normalized";
  }
  return "unknown";
}

LabelEncoding parse_label_encoding(std::string_view name) {
  if (name == "onehot") return LabelEncoding::onehot;
  if (name == "gaussian") return LabelEncoding::gaussian;
  if (name == "gaussian-normalized") return LabelEncoding::gaussian_normalized;
  throw std::invalid_argument("unknown label encoding '" + std::string(name) + "'");
}

OrdinalLevel quantize_intensity(int raw) {
  if (raw < 0 || raw > 15) {
    throw std::out_of_range("raw intensity " + std::to_string(raw) + " outside [0, 15]");
  }
  if (raw <= 3) return OrdinalLevel(raw, 6);
  if (raw <= 5) return OrdinalLevel(4, 6);
  return OrdinalLevel(5, 6);
}

GaussianCode gaussian_encode(OrdinalLevel label, double sigma, int levels, bool normalize) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("gaussian_encode: sigma must be positive, got " + std::to_string(sigma));
  }
  const OrdinalLevel center(label.value(), levels);
  GaussianCode code{std::vector<double>(static_cast<std::size_t>(levels)), sigma, center, normalize};
  const double denom = 2.0 * sigma * sigma;
  for (int k = 0; k < levels; ++k) {
    const double d = static_cast<double>(k - center.value());
    code.values[static_cast<std::size_t>(k)] = std::exp(-(d * d) / denom);
  }
  if (normalize) {
    double total = 0.0;
    for (double v : code.values) total += v;
    for (double& v : code.values) v /= total;
  }
  return code;
}

GaussianCode onehot_encode(OrdinalLevel label, int levels) {
  const OrdinalLevel center(label.value(), levels);
  GaussianCode code{std::vector<double>(static_cast<std::size_t>(levels), 0.0), 0.0, center, false};
  code.values[static_cast<std::size_t>(center.value())] = 1.0;
  return code;
}

GaussianCode encode_label(OrdinalLevel label, LabelEncoding encoding, double sigma) {
  switch (encoding) {
    case LabelEncoding::onehot: return onehot_encode(label, label.levels());
    case LabelEncoding::gaussian: return gaussian_encode(label, sigma, label.levels(), false);
    case LabelEncoding::gaussian_normalized: return gaussian_encode(label, sigma, label.levels(), true);
  }
  throw std::invalid_argument("unknown label encoding");
}

OrdinalLevel level_from_unit_intensity(double z, int levels) {
  if (!std::isfinite(z)) throw std::invalid_argument("intensity must be finite");
  const double clamped = std::clamp(z, 0.0, 1.0);
  return OrdinalLevel(static_cast<int>(std::lround(clamped * (levels - 1))), levels);
}

OrdinalLevel level_from_signed_intensity(double y, int levels) {
  return level_from_unit_intensity((y + 1.0) / 2.0, levels);
}

}  // namespace wsdaor
