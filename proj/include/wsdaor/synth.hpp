#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "wsdaor/milbags.hpp"
#include "wsdaor/tensor.hpp"

namespace wsdaor {

/// Two-domain synthetic generator settings.
///
/// Every sequence carries a latent intensity z(t) in [0, 1]: zero except in
/// onset/plateau/offset episodes that cover `event_rate` of the frames. Frame
/// features interpolate between per-level cluster centres at z * (levels - 1),
/// plus a per-subject offset and isotropic noise. Source labels are 2z - 1;
/// target labels are round(z * (levels - 1)) and target features go through
/// x -> A x + b.
struct DomainSpec {
  int source_subjects = 20;
  int target_subjects = 10;
  int sequences_per_subject = 1;
  std::size_t frames_per_sequence = 300;
  std::size_t feature_dim = 12;
  int levels = 6;

  double event_rate = 0.3;
  std::size_t episode_min = 24;
  std::size_t episode_max = 64;
  double peak_min = 0.4;
  double plateau_fraction = 0.4;

  double cluster_separation = 1.5;
  double noise = 0.5;
  double subject_spread = 0.3;

  // A = shift_scale * Q, with Q a seeded random rotation when shift_rotate is
  // set and the identity otherwise; b = shift_offset * (seeded unit vector).
  double shift_scale = 1.0;
  bool shift_rotate = false;
  double shift_offset = 0.0;

  std::uint64_t seed = 1;

  void validate() const;
};

struct AffineShift {
  Tensor matrix;               // [D x D]
  std::vector<double> offset;  // [D]

  std::vector<double> apply(std::span<const double> x) const;
};

AffineShift make_shift(const DomainSpec& spec);

/// Cluster centre of each level, [levels x D].
Tensor level_centers(const DomainSpec& spec);

std::vector<Sequence> generate_source(const DomainSpec& spec);
std::vector<Sequence> generate_target(const DomainSpec& spec);

/// splitmix64-based seed derivation; distinct tags give independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0) noexcept;

// Dataset CSV: header then one row per frame,
//   subject,sequence,frame,f0,...,f{D-1},label,domain
// domain is 0 for source and 1 for target. Numbers use the shortest decimal
// form that round-trips, so regenerating with the same seed is byte-identical.
void write_dataset_csv(std::ostream& out, const std::vector<Sequence>& sequences);
void write_dataset_csv(const std::filesystem::path& path, const std::vector<Sequence>& sequences);
std::vector<Sequence> read_dataset_csv(std::istream& in);
std::vector<Sequence> read_dataset_csv(const std::filesystem::path& path);

}  // namespace wsdaor
