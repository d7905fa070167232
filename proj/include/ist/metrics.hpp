#pragma once

#include "ist/tensor.hpp"
#include "ist/toydata.hpp"

#include <functional>
#include <span>
#include <vector>

namespace ist {

struct GaussianStats {
  Vec mean;
  Mat cov;
};

// Sample mean and unbiased covariance of the rows of `features`.
GaussianStats fit_gaussian(const Mat& features);

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

// Orthonormal DCT-II of log(max(mel, 0) + 1e-5) along the band axis, one
// cepstrum per column (frame).
Mat mel_cepstra(const ToyMel& mel);

// Frame-averaged (10 / ln 10) sqrt(2 sum_{k=1..13} (c_k - c'_k)^2). No time
// alignment: shapes must match.
double mcd(const ToyMel& a, const ToyMel& b);
inline constexpr int kCepstralOrder = 13;

// Per-band frame means followed by (E, P, V) estimates; zeros when the
// estimator rejects the matrix.
RowVec mel_features(const ToyMel& mel);
Mat mel_feature_matrix(std::span<const ToyMel> mels);
double toy_fd(std::span<const ToyMel> generated, std::span<const ToyMel> target);

double pearson(std::span<const double> x, std::span<const double> y, bool* defined = nullptr);

// Decodes one output per traversal value along latent dim `dim`.
using TraversalFn = std::function<std::vector<ToyMel>(int dim, const std::vector<double>& values)>;

struct DimExclusivity {
  int dim = 0;
  double r_energy = 0.0;
  double r_pitch = 0.0;
  double r_variation = 0.0;
  double exclusivity = 0.0;
  bool degenerate = false;
};

struct ExclusivityReport {
  std::vector<DimExclusivity> dims;
  int best_energy_dim = -1;
  int best_pitch_dim = -1;
  int best_variation_dim = -1;

  // Largest number of factors that can be matched to distinct dims with
  // |r| >= min_r and exclusivity >= min_exclusivity.
  int matched_factors(double min_r, double min_exclusivity) const;
};

// Traverses each dim over centre +- 2 spread (`points` values), estimates the
// factors of every output and correlates them with the traversal value.
ExclusivityReport exclusivity_score(const TraversalFn& traverse, std::span<const double> centre,
                                    std::span<const double> spread, int points = 9);

}  // namespace ist
