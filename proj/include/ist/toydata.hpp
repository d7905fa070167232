#pragma once

#include "ist/rng.hpp"
#include "ist/tensor.hpp"

#include <cstdint>
#include <vector>

namespace ist {

inline constexpr int kBands = 32;
inline constexpr int kFrames = 64;
inline constexpr int kContentIds = 8;

// Ground-truth generative factors behind a toy mel.
struct StyleFactors {
  double energy = 1.0;          // E in [0.5, 1.5]
  double pitch_level = 16.0;    // P in [8, 24], band index
  double pitch_variation = 0.0; // V in [0, 6], bands
  int content = 0;              // c in 0..7

  static constexpr double kEnergyMin = 0.5, kEnergyMax = 1.5;
  static constexpr double kPitchMin = 8.0, kPitchMax = 24.0;
  static constexpr double kVariationMin = 0.0, kVariationMax = 6.0;

  void validate() const;
};

// A bands x frames matrix standing in for a mel-spectrogram.
using ToyMel = Mat;

// Content-dependent frame envelope: 0.7 + 0.3 cos(2 pi (1 + c mod 3) l / L).
double content_envelope(int content, int frame);
// Ridge phase offset 2 pi c / 8.
double content_phase(int content);

// M[f, l] = E exp(-(f - mu(l))^2 / (2 w^2)) env_c(l), mu(l) = P + V sin(2 pi l / L + phi_c).
ToyMel gen_toy_mel(const StyleFactors& factors);

struct FactorEstimate {
  double energy = 0.0;
  double pitch_level = 0.0;
  double pitch_variation = 0.0;
};

// Per-frame peak band refined by a parabola through the log of the three
// bands around the maximum (exact for Gaussian profiles). Throws
// EstimationError when the matrix has no positive entry.
FactorEstimate estimate_factors(const ToyMel& mel);

struct ToySample {
  ToyMel mel;
  StyleFactors factors;
  std::vector<int> content_sequence;  // length kFrames, one id per frame
};

enum class Split { train, val, test };

struct ToyDataset {
  std::vector<ToySample> samples;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.size(); }
  // 80/10/10 by index.
  Split split_of(std::size_t i) const;
  std::vector<std::size_t> indices(Split split) const;
};

// n >= 10 samples with factors uniform over their ranges.
ToyDataset make_dataset(std::size_t n, std::uint64_t seed);

}  // namespace ist
