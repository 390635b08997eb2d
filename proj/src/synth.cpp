#include "wsdaor/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>

namespace wsdaor {

namespace {

enum StreamTag : std::uint64_t {
  kCenters = 1,
  kRotation = 2,
  kOffsetDir = 3,
  kSubject = 4,
  kSequence = 5,
};

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& e : v) {
      e = normal(rng);
      norm += e * e;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (double& e : v) e /= norm;
  return v;
}

// Piecewise-linear latent intensity with exactly round(rate * n) nonzero frames.
std::vector<double> latent_intensity(const DomainSpec& spec, std::mt19937_64& rng) {
  const std::size_t n = spec.frames_per_sequence;
  std::vector<double> z(n, 0.0);
  const auto events = static_cast<std::size_t>(std::llround(spec.event_rate * static_cast<double>(n)));
  if (events == 0) return z;

  std::uniform_int_distribution<std::size_t> len_dist(spec.episode_min, spec.episode_max);
  std::vector<std::size_t> lengths;
  std::size_t covered = 0;
  while (covered < events) {
    const std::size_t len = std::min(len_dist(rng), events - covered);
    lengths.push_back(len);
    covered += len;
  }
  if (lengths.size() > 1 && lengths.back() < spec.episode_min / 2) {
    lengths[lengths.size() - 2] += lengths.back();
    lengths.pop_back();
  }

  // Spread the neutral frames over the gaps around the episodes.
  const std::size_t neutral = n - events;
  std::uniform_int_distribution<std::size_t> cut_dist(0, neutral);
  std::vector<std::size_t> cuts(lengths.size());
  for (auto& c : cuts) c = cut_dist(rng);
  std::sort(cuts.begin(), cuts.end());

  std::uniform_real_distribution<double> peak_dist(spec.peak_min, 1.0);
  std::size_t pos = 0, prev_cut = 0;
  for (std::size_t e = 0; e < lengths.size(); ++e) {
    pos += cuts[e] - prev_cut;
    prev_cut = cuts[e];
    const std::size_t len = lengths[e];
    const double peak = peak_dist(rng);
    const auto plateau = std::min<std::size_t>(
        len, static_cast<std::size_t>(std::llround(spec.plateau_fraction * static_cast<double>(len))));
    const std::size_t onset = (len - plateau) / 2;
    const std::size_t offset = len - plateau - onset;
    for (std::size_t j = 0; j < len; ++j) {
      double v = peak;
      if (j < onset) {
        v = peak * static_cast<double>(j + 1) / static_cast<double>(onset + 1);
      } else if (j >= onset + plateau) {
        v = peak * static_cast<double>(len - j) / static_cast<double>(offset + 1);
      }
      z[pos + j] = v;
    }
    pos += len;
  }
  return z;
}

std::vector<Sequence> generate(const DomainSpec& spec, Domain domain) {
  spec.validate();
  const Tensor centers = level_centers(spec);
  const AffineShift shift = make_shift(spec);
  const std::size_t dim = spec.feature_dim;
  const int subjects = domain == Domain::source ? spec.source_subjects : spec.target_subjects;
  const auto dtag = static_cast<std::uint64_t>(domain);

  std::vector<Sequence> out;
  for (int s = 0; s < subjects; ++s) {
    std::mt19937_64 subject_rng(derive_seed(spec.seed, kSubject, dtag, static_cast<std::uint64_t>(s)));
    std::normal_distribution<double> spread(0.0, spec.subject_spread);
    std::vector<double> subject_offset(dim);
    for (double& v : subject_offset) v = spread(subject_rng);

    for (int q = 0; q < spec.sequences_per_subject; ++q) {
      std::mt19937_64 rng(derive_seed(spec.seed, kSequence, dtag,
                                      (static_cast<std::uint64_t>(s) << 20) | static_cast<std::uint64_t>(q)));
      std::normal_distribution<double> noise(0.0, spec.noise);
      const std::vector<double> z = latent_intensity(spec, rng);

      Sequence seq;
      seq.subject = s;
      seq.index = q;
      seq.domain = domain;
      seq.dim = dim;
      seq.features.reserve(z.size() * dim);
      seq.labels.reserve(z.size());
      std::vector<double> x(dim);
      for (double zt : z) {
        const double u = zt * static_cast<double>(spec.levels - 1);
        const auto lo = static_cast<std::size_t>(std::min(std::floor(u), static_cast<double>(spec.levels - 2)));
        const double frac = u - static_cast<double>(lo);
        for (std::size_t d = 0; d < dim; ++d) {
          x[d] = (1.0 - frac) * centers.at(lo, d) + frac * centers.at(lo + 1, d) + subject_offset[d] +
                 noise(rng);
        }
        if (domain == Domain::target) {
          const auto shifted = shift.apply(x);
          seq.features.insert(seq.features.end(), shifted.begin(), shifted.end());
          seq.labels.push_back(static_cast<double>(level_from_unit_intensity(zt, spec.levels).value()));
        } else {
          seq.features.insert(seq.features.end(), x.begin(), x.end());
          seq.labels.push_back(2.0 * zt - 1.0);
        }
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return mix(mix(mix(mix(seed) ^ a) ^ b) ^ c);
}

void DomainSpec::validate() const {
  if (source_subjects < 0 || target_subjects < 0 || sequences_per_subject < 1) {
    throw std::invalid_argument("domain spec: subject and sequence counts must be positive");
  }
  if (frames_per_sequence < 1 || feature_dim < 1) {
    throw std::invalid_argument("domain spec: frames_per_sequence and feature_dim must be >= 1");
  }
  if (levels < 2) throw std::invalid_argument("domain spec: levels must be >= 2");
  if (!(event_rate >= 0.0 && event_rate <= 1.0)) {
    throw std::invalid_argument("domain spec: event_rate must be in [0, 1]");
  }
  if (episode_min < 1 || episode_max < episode_min) {
    throw std::invalid_argument("domain spec: need 1 <= episode_min <= episode_max");
  }
  if (!(peak_min > 0.0 && peak_min <= 1.0)) throw std::invalid_argument("domain spec: peak_min must be in (0, 1]");
  if (!(plateau_fraction >= 0.0 && plateau_fraction <= 1.0)) {
    throw std::invalid_argument("domain spec: plateau_fraction must be in [0, 1]");
  }
  if (noise < 0.0 || subject_spread < 0.0 || cluster_separation < 0.0) {
    throw std::invalid_argument("domain spec: noise, subject_spread and cluster_separation must be >= 0");
  }
  if (shift_scale == 0.0 || !std::isfinite(shift_scale)) {
    throw std::invalid_argument("domain spec: shift_scale must be nonzero so the shift is invertible");
  }
}

std::vector<double> AffineShift::apply(std::span<const double> x) const {
  const std::size_t d = offset.size();
  std::vector<double> y(offset);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) y[r] += matrix.at(r, c) * x[c];
  }
  return y;
}

AffineShift make_shift(const DomainSpec& spec) {
  const std::size_t d = spec.feature_dim;
  AffineShift shift{Tensor({d, d}), std::vector<double>(d, 0.0)};
  if (spec.shift_rotate) {
    // Gram-Schmidt on a seeded Gaussian matrix.
    std::mt19937_64 rng(derive_seed(spec.seed, kRotation));
    std::vector<std::vector<double>> basis;
    while (basis.size() < d) {
      auto v = random_unit(rng, d);
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += v[i] * b[i];
        for (std::size_t i = 0; i < d; ++i) v[i] -= dot * b[i];
      }
      double norm = 0.0;
      for (double e : v) norm += e * e;
      if (norm < 1e-6) continue;
      norm = std::sqrt(norm);
      for (double& e : v) e /= norm;
      basis.push_back(std::move(v));
    }
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) shift.matrix.at(r, c) = spec.shift_scale * basis[r][c];
    }
  } else {
    for (std::size_t i = 0; i < d; ++i) shift.matrix.at(i, i) = spec.shift_scale;
  }
  if (spec.shift_offset != 0.0) {
    std::mt19937_64 rng(derive_seed(spec.seed, kOffsetDir));
    const auto dir = random_unit(rng, d);
    for (std::size_t i = 0; i < d; ++i) shift.offset[i] = spec.shift_offset * dir[i];
  }
  return shift;
}

Tensor level_centers(const DomainSpec& spec) {
  // Random walk with unit steps scaled by the separation, so neighbouring
  // levels sit closer than distant ones.
  const auto k = static_cast<std::size_t>(spec.levels);
  const std::size_t d = spec.feature_dim;
  std::mt19937_64 rng(derive_seed(spec.seed, kCenters));
  Tensor centers({k, d});
  for (std::size_t level = 1; level < k; ++level) {
    const auto step = random_unit(rng, d);
    for (std::size_t i = 0; i < d; ++i) {
      centers.at(level, i) = centers.at(level - 1, i) + spec.cluster_separation * step[i];
    }
  }
  return centers;
}

std::vector<Sequence> generate_source(const DomainSpec& spec) { return generate(spec, Domain::source); }
std::vector<Sequence> generate_target(const DomainSpec& spec) { return generate(spec, Domain::target); }

// ---------------------------------------------------------------------------
// CSV

namespace {

void put_double(std::ostream& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, res.ptr - buf);
}

template <typename T>
T parse_field(const std::string& text, std::size_t line, const char* what) {
  T v{};
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::runtime_error("dataset line " + std::to_string(line) + ": bad " + what + " '" + text + "'");
  }
  return v;
}

}  // namespace

void write_dataset_csv(std::ostream& out, const std::vector<Sequence>& sequences) {
  const std::size_t dim = sequences.empty() ? 0 : sequences.front().dim;
  out << "subject,sequence,frame";
  for (std::size_t d = 0; d < dim; ++d) out << ",f" << d;
  out << ",label,domain\n";
  for (const auto& seq : sequences) {
    seq.validate();
    if (seq.dim != dim) throw std::invalid_argument("write_dataset_csv: mixed feature dimensions");
    for (std::size_t t = 0; t < seq.length(); ++t) {
      out << seq.subject << ',' << seq.index << ',' << t;
      for (double v : seq.frame(t)) {
        out << ',';
        put_double(out, v);
      }
      out << ',';
      put_double(out, seq.labels[t]);
      out << ',' << static_cast<int>(seq.domain) << '\n';
    }
  }
}

void write_dataset_csv(const std::filesystem::path& path, const std::vector<Sequence>& sequences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  write_dataset_csv(out, sequences);
  if (!out) throw std::runtime_error("failed writing dataset " + path.string());
}

std::vector<Sequence> read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset: missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 6 || header[0] != "subject" || header[1] != "sequence" || header[2] != "frame" ||
      header[header.size() - 2] != "label" || header.back() != "domain") {
    throw std::runtime_error("dataset: unexpected header '" + line + "'");
  }
  const std::size_t dim = header.size() - 5;

  std::vector<Sequence> out;
  std::map<std::tuple<int, int, int>, std::size_t> index;
  std::size_t line_no = 1;
  std::vector<std::string> cells;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    cells.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    const int subject = parse_field<int>(cells[0], line_no, "subject");
    const int sequence = parse_field<int>(cells[1], line_no, "sequence");
    const auto frame = parse_field<std::size_t>(cells[2], line_no, "frame");
    const int domain = parse_field<int>(cells.back(), line_no, "domain");
    if (domain != 0 && domain != 1) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": domain must be 0 or 1");
    }
    const auto key = std::make_tuple(domain, subject, sequence);
    auto it = index.find(key);
    if (it == index.end()) {
      Sequence seq;
      seq.subject = subject;
      seq.index = sequence;
      seq.domain = static_cast<Domain>(domain);
      seq.dim = dim;
      out.push_back(std::move(seq));
      it = index.emplace(key, out.size() - 1).first;
    }
    Sequence& seq = out[it->second];
    if (frame != seq.length()) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": frame " + std::to_string(frame) +
                               " out of order (expected " + std::to_string(seq.length()) + ")");
    }
    for (std::size_t d = 0; d < dim; ++d) seq.features.push_back(parse_field<double>(cells[3 + d], line_no, "feature"));
    seq.labels.push_back(parse_field<double>(cells[3 + dim], line_no, "label"));
  }
  return out;
}

std::vector<Sequence> read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return read_dataset_csv(in);
}

}  // namespace wsdaor
