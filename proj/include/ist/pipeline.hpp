#pragma once

#include "ist/adam.hpp"
#include "ist/config.hpp"
#include "ist/diffusion.hpp"
#include "ist/quantizer.hpp"
#include "ist/toydata.hpp"
#include "ist/vae.hpp"

#include <functional>
#include <span>
#include <vector>

namespace ist {

// What a single train_step optimizes. two_stage_s1 trains the same parameters
// as vaefs; two_stage_s2 trains only the refiner on the frozen stage-1 output.
enum class Phase { vaefs, one_stage, two_stage_s1, two_stage_s2 };
std::string_view to_string(Phase phase);

// Sinusoidal frame position features fed to the decoder next to the content
// embedding and the style code.
inline constexpr int kPositionDims = 6;
RowVec position_encoding(int frame);

// Reference encoder -> posterior -> codebook -> acoustic decoder, plus the
// refiner over the coarse-to-target residual and the bridge over latent vectors.
class StyleModel {
 public:
  StyleModel() = default;
  StyleModel(const ModelConfig& cfg, RngStream& init_rng);

  Linear encoder;  // per-frame bands -> encoder_dim, tanh, mean-pooled
  PosteriorHead posterior;
  Codebook codebook;
  Parameter content_embed;  // kContentIds x content_dim
  FeedForwardNet decoder;   // [content, q, position] -> bands, per frame
  Denoiser refiner;         // conditional, over whole flattened mels
  Denoiser bridge;          // unconditional, over latent vectors
  DiffusionSchedule refiner_schedule;
  DiffusionSchedule bridge_schedule;
  // Mean and spread of posterior means over the training split.
  RowVec latent_centre;
  RowVec latent_spread;
  bool trained = false;

  ParamRefs encoder_params();
  ParamRefs decoder_params();
  ParamRefs refiner_params();
  ParamRefs bridge_params();
  ParamRefs all_params();
};

struct Batch {
  Mat frames;  // (B * frames) x bands, sample-major
  std::vector<std::vector<int>> content;
  Eigen::Index size() const { return static_cast<Eigen::Index>(content.size()); }
};

Batch make_batch(const ToyDataset& data, std::span<const std::size_t> indices);
Batch make_batch(std::span<const ToyMel> mels, std::span<const std::vector<int>> content);

// Noise consumed by one train_step, drawn up front so the loss is a pure
// function of the parameters.
struct StepNoise {
  Mat latent;                  // B x D
  std::vector<int> refiner_t;  // one diffusion step per sample
  Mat refiner;                 // B x (frames * bands)
};
StepNoise draw_step_noise(const ModelConfig& cfg, Eigen::Index batch, RngStream& rng);

struct LossRecord {
  std::int64_t step = 0;
  double rec = 0.0;      // L_rec, weighted mean squared error per mel entry
  double kl = 0.0;
  double beta = 0.0;     // KL weight used this step
  double vq = 0.0;       // L_Q
  double refiner = 0.0;  // L_R
  double bridge = 0.0;   // L_B, from the alternating bridge step
  double total = 0.0;    // L_All = rec + beta kl + vq + refiner + bridge
};

// Latent values produced by a forward pass.
struct LatentState {
  GaussianPosterior posterior;
  Mat z;
  Mat q;
  std::vector<int> codes;  // empty when quantization is off
};

// Full forward pass and, when backprop is set, gradient accumulation into the
// parameters the phase trains. Does not touch optimizer or controller state.
LossRecord forward_backward(StyleModel& model, const ModelConfig& cfg, Phase phase,
                            const Batch& batch, const StepNoise& noise, double beta, bool backprop,
                            LatentState* latent = nullptr);

struct TrainState {
  ModelConfig config;
  StyleModel model;
  AdamState adam;
  AdamState bridge_adam;
  ControllerState controller;
  KlSmoother kl_smoother;
  AnnealSchedule anneal;
  std::int64_t step = 0;
  RngStream rng;
  std::vector<LossRecord> history;

  static TrainState create(const ModelConfig& cfg);
  // KL weight for the next step.
  double current_beta() const;
  ParamRefs trainable(Phase phase);
  // Rounds every persistent quantity to 32-bit storage.
  void round_to_storage();
};

// One optimizer step of L_C + L_Q (+ L_R), then EMA codebook and controller
// updates. Throws ContractViolation if gradient reaches a frozen parameter.
LossRecord train_step(TrainState& state, const Batch& batch, Phase phase);

// Posterior samples, detached from the encoder.
Mat posterior_samples(const StyleModel& model, const Batch& batch, RngStream& rng);

// One diffusion step of the bridge on latent vectors; only bridge parameters
// change. Returns L_B.
double bridge_train_step(TrainState& state, const Mat& z_batch);

Phase phase_for_step(const ModelConfig& cfg, std::int64_t step);
std::int64_t total_steps(const ModelConfig& cfg);

// train_step on a random training batch, followed by a bridge step when the
// bridge is enabled. Appends to the history.
LossRecord train_iteration(TrainState& state, const ToyDataset& data);

// Runs iterations until state.step == until_step, then refreshes latent
// statistics.
void run_training(TrainState& state, const ToyDataset& data, std::int64_t until_step,
                  const std::function<void(const LossRecord&)>& on_step = {});

void calibrate_latent(StyleModel& model, const ToyDataset& data);

// Bridge-only iterations on fresh posterior samples from the train split;
// returns L_B per iteration.
std::vector<double> run_bridge_training(TrainState& state, const ToyDataset& data, int iterations);

// Mean-pooled tanh projection of the frames; 1 x encoder_dim.
Mat reference_encode(const StyleModel& model, const ToyMel& mel);
GaussianPosterior encode_posterior(const StyleModel& model, const ToyMel& mel);

// Decoder output for a content sequence and a 1 x D style code.
ToyMel acoustic_decode(const StyleModel& model, std::span<const int> content, const Mat& q);

// Nearest code when quantization is on, else the vector itself.
Quantized quantize(const StyleModel& model, const ModelConfig& cfg, const Mat& z);

struct Synthesis {
  ToyMel coarse;
  ToyMel refined;
  Mat z;
  Mat q;
  int code = -1;
};

// Conditional ancestral sampling of the refiner; identity in vaefs mode.
ToyMel refine(const StyleModel& model, const ModelConfig& cfg, const ToyMel& coarse, RngStream& rng);

Synthesis decode_and_refine(const StyleModel& model, const ModelConfig& cfg, const Mat& z,
                            std::span<const int> content, RngStream& rng);
Synthesis synthesize_from_reference(const StyleModel& model, const ModelConfig& cfg,
                                    const ToyMel& reference, std::span<const int> content,
                                    RngStream& rng);
Synthesis synthesize_from_bridge(const StyleModel& model, const ModelConfig& cfg,
                                 std::span<const int> content, RngStream& rng);
// z drawn by the bridge; 1 x D.
Mat sample_bridge_latent(const StyleModel& model, RngStream& rng);

// Overwrites latent coordinate `dim` of the calibrated centre with each
// value. Every value uses a stream seeded with `seed`.
std::vector<ToyMel> traverse_latent(const StyleModel& model, const ModelConfig& cfg, int dim,
                                    const std::vector<double>& values, std::span<const int> content,
                                    std::uint64_t seed);

}  // namespace ist
