#pragma once

#include "ist/gradcheck.hpp"
#include "ist/metrics.hpp"
#include "ist/pipeline.hpp"

#include <cstdint>
#include <vector>

namespace ist {

// Parallel reconstruction of the test split through the reference path.
struct ReconstructionEval {
  std::size_t count = 0;
  double fd_coarse = 0.0;
  double fd_refined = 0.0;
  double mse_coarse = 0.0;   // mean squared error per mel entry
  double mse_refined = 0.0;
  double mcd_coarse = 0.0;
  double mcd_refined = 0.0;
  std::vector<ToyMel> targets, coarse, refined;
};
ReconstructionEval evaluate_reconstruction(const StyleModel& model, const ModelConfig& cfg,
                                           const ToyDataset& data, std::uint64_t seed);

// Non-parallel transfer: the style of one test item onto the content of
// another. A pair is a hit when the estimated factors of the output match
// the reference's ground truth within the tolerances.
struct TransferPair {
  std::size_t reference = 0;
  std::size_t content_source = 0;
  StyleFactors truth;
  FactorEstimate estimate;
  bool hit = false;
  ToyMel output;
};
struct TransferTolerance {
  double energy_rel = 0.15;
  double pitch_bands = 1.0;
  double variation_bands = 1.0;
};
struct TransferEval {
  std::vector<TransferPair> pairs;
  double hit_rate = 0.0;
};
TransferEval evaluate_transfer(const StyleModel& model, const ModelConfig& cfg, const ToyDataset& data,
                               std::size_t pairs, std::uint64_t seed, TransferTolerance tol = {});

// Total variation between code-index histograms of bridge samples and of
// posterior samples over the training split.
struct CodeHistogramEval {
  std::vector<double> bridge;
  std::vector<double> posterior;
  double tv = 0.0;
};
CodeHistogramEval evaluate_code_histograms(const StyleModel& model, const ModelConfig& cfg,
                                           const ToyDataset& data, std::size_t bridge_samples,
                                           std::size_t draws_per_item, std::uint64_t seed);

// Latent traversal of every dim with a fixed content id.
ExclusivityReport traversal_report(const StyleModel& model, const ModelConfig& cfg, int content,
                                   std::uint64_t seed, int points = 9);

// The full configuration and its three Table-1 ablations, in that order.
struct AblationVariant {
  std::string name;
  ModelConfig config;
};
std::vector<AblationVariant> ablation_variants(const ModelConfig& base);

// Finite-difference checks of every differentiable training loss on a small
// randomly initialized model. Quantization is bypassed wherever the encoder is
// checked, since the straight-through gradient is not the derivative of the
// piecewise-constant forward pass. Checks that include the refiner widen the
// step to at least 1e-3: its loss reaches O(100) at small diffusion steps and
// roundoff would otherwise dominate. 64 random entries of each parameter are
// checked.
struct NamedGradCheck {
  std::string name;
  GradCheckReport report;
};
std::vector<NamedGradCheck> gradient_suite(std::uint64_t seed,
                                           const GradCheckOptions& options = {.max_entries_per_param = 64});

}  // namespace ist
