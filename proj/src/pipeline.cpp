#include "ist/pipeline.hpp"

#include "ist/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ist {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::vaefs: return "vaefs";
    case Phase::one_stage: return "one_stage";
    case Phase::two_stage_s1: return "two_stage_s1";
    case Phase::two_stage_s2: return "two_stage_s2";
  }
  return "?";
}

RowVec position_encoding(int frame) {
  RowVec p(kPositionDims);
  for (int k = 0; k < kPositionDims / 2; ++k) {
    const double angle = 2.0 * std::numbers::pi * (k + 1) * frame / kFrames;
    p(2 * k) = std::sin(angle);
    p(2 * k + 1) = std::cos(angle);
  }
  return p;
}

namespace {

std::vector<int> hidden_widths(int width, int layers) { return std::vector<int>(layers, width); }

void append(ParamRefs& out, Parameter& p) { out.push_back(&p); }

// Pre-pooling activations and the pooled embedding for a batch of frames.
struct EncoderCache {
  Mat act;
  Mat pooled;
};

Mat encode_frames(const Linear& enc, const Mat& frames, Eigen::Index batch, EncoderCache* cache) {
  if (frames.rows() != batch * kFrames || frames.cols() != kBands) {
    throw DimensionError("reference encoder: expected " + std::to_string(kBands) + " x " +
                         std::to_string(kFrames) + " mels");
  }
  Mat act = tanh_activation(enc.forward(frames));
  Mat pooled(batch, act.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    pooled.row(b) = act.middleRows(b * kFrames, kFrames).colwise().mean();
  }
  if (cache != nullptr) {
    cache->act = std::move(act);
    cache->pooled = pooled;
  }
  return pooled;
}

void encode_frames_backward(Linear& enc, const Mat& frames, const EncoderCache& cache,
                            const Mat& d_pooled) {
  Mat d_pre(cache.act.rows(), cache.act.cols());
  for (Eigen::Index b = 0; b < d_pooled.rows(); ++b) {
    for (Eigen::Index l = 0; l < kFrames; ++l) {
      d_pre.row(b * kFrames + l) = d_pooled.row(b) / static_cast<double>(kFrames);
    }
  }
  d_pre.array() *= 1.0 - cache.act.array().square();
  enc.backward(frames, d_pre);
}

Mat decoder_input(const StyleModel& m, const std::vector<std::vector<int>>& content, const Mat& q) {
  static const Mat positions = [] {
    Mat t(kFrames, kPositionDims);
    for (int l = 0; l < kFrames; ++l) t.row(l) = position_encoding(l);
    return t;
  }();
  const Eigen::Index batch = static_cast<Eigen::Index>(content.size());
  const Eigen::Index cdim = m.content_embed.value.cols();
  const Eigen::Index qdim = q.cols();
  Mat in(batch * kFrames, cdim + qdim + kPositionDims);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto& seq = content[static_cast<std::size_t>(b)];
    if (static_cast<int>(seq.size()) != kFrames) {
      throw ValidationError("content sequence must have " + std::to_string(kFrames) + " frames");
    }
    for (int l = 0; l < kFrames; ++l) {
      const int c = seq[static_cast<std::size_t>(l)];
      if (c < 0 || c >= kContentIds) {
        throw ValidationError("unknown content id " + std::to_string(c));
      }
      const Eigen::Index r = b * kFrames + l;
      in.block(r, 0, 1, cdim) = m.content_embed.value.row(c);
      in.block(r, cdim, 1, qdim) = q.row(b);
      in.block(r, cdim + qdim, 1, kPositionDims) = positions.row(l);
    }
  }
  return in;
}

// frames x bands rows -> bands x frames matrix
ToyMel rows_to_mel(const Mat& rows, Eigen::Index sample) {
  return rows.middleRows(sample * kFrames, kFrames).transpose();
}

// (B * frames) x bands  <->  B x (frames * bands), frame-major within a row,
// which is also the column-major layout of a ToyMel.
Mat flatten_items(const Mat& frames) {
  const Eigen::Index items = frames.rows() / kFrames;
  Mat flat(items, kFrames * kBands);
  for (Eigen::Index b = 0; b < items; ++b) {
    for (int l = 0; l < kFrames; ++l) flat.block(b, l * kBands, 1, kBands) = frames.row(b * kFrames + l);
  }
  return flat;
}

Mat unflatten_items(const Mat& flat) {
  Mat frames(flat.rows() * kFrames, kBands);
  for (Eigen::Index b = 0; b < flat.rows(); ++b) {
    for (int l = 0; l < kFrames; ++l) frames.row(b * kFrames + l) = flat.block(b, l * kBands, 1, kBands);
  }
  return frames;
}

bool any_gradient(const ParamRefs& params) {
  for (const Parameter* p : params) {
    if (!p->grad.isZero(0.0)) return true;
  }
  return false;
}

}  // namespace

StyleModel::StyleModel(const ModelConfig& cfg, RngStream& init_rng) {
  cfg.validate();
  encoder = Linear("encoder", kBands, cfg.encoder_dim);
  encoder.init(init_rng);
  posterior = PosteriorHead("posterior", cfg.encoder_dim, cfg.latent_dim);
  posterior.init(init_rng);
  codebook = Codebook("codebook", cfg.codebook_size, cfg.latent_dim, init_rng);
  Mat embed = gaussian_sample(init_rng, kContentIds, cfg.content_dim);
  round_to_storage(embed);
  content_embed = Parameter("content_embed", embed);

  std::vector<int> widths{cfg.content_dim + cfg.latent_dim + kPositionDims};
  for (int i = 0; i < cfg.decoder_layers; ++i) widths.push_back(cfg.decoder_hidden);
  widths.push_back(kBands);
  decoder = FeedForwardNet("decoder", widths);
  decoder.init(init_rng);

  refiner = Denoiser("refiner", kBands * kFrames, hidden_widths(cfg.refiner_hidden, cfg.refiner_layers),
                     kBands * kFrames, cfg.cond_proj_dim);
  refiner.init(init_rng);
  bridge = Denoiser("bridge", cfg.latent_dim, hidden_widths(cfg.bridge_hidden, cfg.bridge_layers));
  bridge.init(init_rng);

  refiner_schedule = DiffusionSchedule::scaled_default(cfg.T_refiner);
  refiner.predict_clean(refiner_schedule, cfg.refiner_data_scale);
  bridge_schedule = DiffusionSchedule::scaled_default(cfg.T_bridge);
  latent_centre = RowVec::Zero(cfg.latent_dim);
  latent_spread = RowVec::Zero(cfg.latent_dim);
}

ParamRefs StyleModel::encoder_params() {
  ParamRefs out;
  encoder.collect(out);
  posterior.collect(out);
  return out;
}

ParamRefs StyleModel::decoder_params() {
  ParamRefs out;
  append(out, content_embed);
  decoder.collect(out);
  return out;
}

ParamRefs StyleModel::refiner_params() {
  ParamRefs out;
  refiner.collect(out);
  return out;
}

ParamRefs StyleModel::bridge_params() {
  ParamRefs out;
  bridge.collect(out);
  return out;
}

ParamRefs StyleModel::all_params() {
  ParamRefs out = encoder_params();
  append(out, codebook.entries);
  for (Parameter* p : decoder_params()) out.push_back(p);
  for (Parameter* p : refiner_params()) out.push_back(p);
  for (Parameter* p : bridge_params()) out.push_back(p);
  return out;
}

Batch make_batch(const ToyDataset& data, std::span<const std::size_t> indices) {
  Batch batch;
  batch.frames.resize(static_cast<Eigen::Index>(indices.size()) * kFrames, kBands);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const ToySample& s = data.samples.at(indices[i]);
    batch.frames.middleRows(static_cast<Eigen::Index>(i) * kFrames, kFrames) = s.mel.transpose();
    batch.content.push_back(s.content_sequence);
  }
  return batch;
}

Batch make_batch(std::span<const ToyMel> mels, std::span<const std::vector<int>> content) {
  if (mels.size() != content.size()) throw DimensionError("make_batch: mel/content count mismatch");
  Batch batch;
  batch.frames.resize(static_cast<Eigen::Index>(mels.size()) * kFrames, kBands);
  for (std::size_t i = 0; i < mels.size(); ++i) {
    if (mels[i].rows() != kBands || mels[i].cols() != kFrames) {
      throw DimensionError("make_batch: mel shape mismatch");
    }
    batch.frames.middleRows(static_cast<Eigen::Index>(i) * kFrames, kFrames) = mels[i].transpose();
    batch.content.push_back(content[i]);
  }
  return batch;
}

StepNoise draw_step_noise(const ModelConfig& cfg, Eigen::Index batch, RngStream& rng) {
  StepNoise n;
  n.latent = gaussian_sample(rng, batch, cfg.latent_dim);
  n.refiner_t.resize(static_cast<std::size_t>(batch));
  for (auto& t : n.refiner_t) t = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(cfg.T_refiner)));
  n.refiner = gaussian_sample(rng, batch, kBands * kFrames);
  return n;
}

LossRecord forward_backward(StyleModel& m, const ModelConfig& cfg, Phase phase, const Batch& batch,
                            const StepNoise& noise, double beta, bool backprop, LatentState* latent) {
  const Eigen::Index bsz = batch.size();
  if (bsz == 0) throw ValidationError("empty batch");

  EncoderCache enc_cache;
  const Mat h = encode_frames(m.encoder, batch.frames, bsz, &enc_cache);
  const GaussianPosterior post = m.posterior.encode(h);
  const Mat sigma = post.sigma();
  const Mat z = reparameterize(post, noise.latent);

  Quantized quant;
  if (cfg.use_vq) {
    quant = nearest_code(z, m.codebook);
  } else {
    quant.q = z;
  }
  const Mat q = StraightThrough::forward(z, quant.q).value;

  const Mat din = decoder_input(m, batch.content, q);
  FeedForwardNet::Cache dec_cache;
  const Mat coarse = m.decoder.forward(din, dec_cache);
  require_finite(coarse, "decoder output");
  const Mat diff = coarse - batch.frames;

  LossRecord rec;
  rec.beta = beta;
  const double rec_scale = cfg.rec_weight / static_cast<double>(diff.size());
  rec.rec = diff.squaredNorm() * rec_scale;
  rec.kl = kl_to_standard_normal(post);
  VqLoss vq;
  if (cfg.use_vq) {
    vq = vq_loss(z, quant.q, cfg.gamma, cfg.ema_codebook);
    rec.vq = vq.value;
  }

  const bool refine = phase == Phase::one_stage || phase == Phase::two_stage_s2;
  Mat d_coarse;
  if (backprop && phase != Phase::two_stage_s2) d_coarse = (2.0 * rec_scale) * diff;
  if (refine) {
    // The refiner diffuses the residual left by the decoder, one whole mel per row.
    const Mat residual = flatten_items(-diff);
    const Mat cond = flatten_items(coarse);
    DdpmLoss lr = ddpm_loss(m.refiner, m.refiner_schedule, residual, noise.refiner_t, noise.refiner,
                            &cond, backprop);
    rec.refiner = lr.value;
    // One-stage: the diffusion loss also reaches the decoder, through both the
    // condition and the residual.
    if (backprop && phase == Phase::one_stage) d_coarse += unflatten_items(lr.d_cond - lr.d_x0);
  }
  rec.total = rec.rec + beta * rec.kl + rec.vq + rec.refiner;

  if (latent != nullptr) {
    latent->posterior = post;
    latent->z = z;
    latent->q = quant.q;
    latent->codes = quant.index;
  }
  if (!backprop || phase == Phase::two_stage_s2) return rec;

  const Mat d_din = m.decoder.backward(dec_cache, d_coarse);
  const Eigen::Index cdim = m.content_embed.value.cols();
  Mat d_q = Mat::Zero(bsz, z.cols());
  for (Eigen::Index b = 0; b < bsz; ++b) {
    for (int l = 0; l < kFrames; ++l) {
      const Eigen::Index r = b * kFrames + l;
      const int c = batch.content[static_cast<std::size_t>(b)][static_cast<std::size_t>(l)];
      m.content_embed.grad.row(c) += d_din.block(r, 0, 1, cdim);
      d_q.row(b) += d_din.block(r, cdim, 1, z.cols());
    }
  }

  Mat d_z = StraightThrough::backward(d_q);
  if (cfg.use_vq) {
    d_z += vq.d_z;
    if (!cfg.ema_codebook) {
      for (Eigen::Index b = 0; b < bsz; ++b) {
        m.codebook.entries.grad.row(quant.index[static_cast<std::size_t>(b)]) += vq.d_q.row(b);
      }
    }
  }

  Mat d_mu, d_log_sigma;
  kl_gradient(post, d_mu, d_log_sigma);
  d_mu *= beta;
  d_log_sigma *= beta;
  d_mu += d_z;
  d_log_sigma += d_z.cwiseProduct(sigma).cwiseProduct(noise.latent);
  const Mat d_h = m.posterior.backward(h, d_mu, d_log_sigma);
  encode_frames_backward(m.encoder, batch.frames, enc_cache, d_h);
  return rec;
}

TrainState TrainState::create(const ModelConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.config = cfg;
  RngStream init_rng(cfg.seed);
  s.model = StyleModel(cfg, init_rng);
  s.adam.lr = cfg.lr;
  s.bridge_adam.lr = cfg.lr;
  s.controller.kp = cfg.kp;
  s.controller.ki = cfg.ki;
  s.controller.beta_min = cfg.beta_min;
  s.controller.beta_max = cfg.beta_max;
  s.controller.setpoint = cfg.kl_target;
  s.controller.reset();
  s.kl_smoother.decay = cfg.kl_ema_decay;
  s.anneal.ramp = cfg.ramp;
  s.rng = RngStream(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  s.round_to_storage();
  return s;
}

double TrainState::current_beta() const {
  if (config.use_controlvae) return controller.beta;
  return anneal_weight(step, anneal);
}

ParamRefs TrainState::trainable(Phase phase) {
  ParamRefs out;
  if (phase != Phase::two_stage_s2) {
    out = model.encoder_params();
    for (Parameter* p : model.decoder_params()) out.push_back(p);
    if (config.use_vq && !config.ema_codebook) out.push_back(&model.codebook.entries);
  }
  if (phase == Phase::one_stage || phase == Phase::two_stage_s2) {
    for (Parameter* p : model.refiner_params()) out.push_back(p);
  }
  return out;
}

void TrainState::round_to_storage() {
  for (Parameter* p : model.all_params()) ist::round_to_storage(p->value);
  ist::round_to_storage(model.codebook.cluster_size);
  ist::round_to_storage(model.codebook.embed_sum);
  adam.round_to_storage();
  bridge_adam.round_to_storage();
  controller.error_sum = ist::round_to_storage(controller.error_sum);
  controller.beta = ist::round_to_storage(controller.beta);
  kl_smoother.value = ist::round_to_storage(kl_smoother.value);
}

LossRecord train_step(TrainState& state, const Batch& batch, Phase phase) {
  StyleModel& m = state.model;
  const ModelConfig& cfg = state.config;
  const StepNoise noise = draw_step_noise(cfg, batch.size(), state.rng);
  const ParamRefs all = m.all_params();
  zero_grads(all);

  const double beta = state.current_beta();
  LatentState latent;
  LossRecord rec = forward_backward(m, cfg, phase, batch, noise, beta, true, &latent);

  const ParamRefs trainable = state.trainable(phase);
  ParamRefs frozen;
  for (Parameter* p : all) {
    if (std::find(trainable.begin(), trainable.end(), p) == trainable.end()) frozen.push_back(p);
  }
  if (any_gradient(frozen)) {
    throw ContractViolation(std::string("gradient reached a frozen parameter in phase ") +
                            std::string(to_string(phase)));
  }
  adam_step(state.adam, trainable);

  if (cfg.use_vq && cfg.ema_codebook && phase != Phase::two_stage_s2) {
    ema_update(m.codebook, latent.z, latent.codes);
  }
  const double smoothed = state.kl_smoother.update(rec.kl);
  if (cfg.use_controlvae) pi_beta_update(state.controller, smoothed);

  ++state.step;
  rec.step = state.step;
  m.trained = true;
  state.round_to_storage();
  return rec;
}

Mat posterior_samples(const StyleModel& model, const Batch& batch, RngStream& rng) {
  const Mat h = encode_frames(model.encoder, batch.frames, batch.size(), nullptr);
  const GaussianPosterior post = model.posterior.encode(h);
  return reparameterize(post, gaussian_sample(rng, batch.size(), post.dim()));
}

double bridge_train_step(TrainState& state, const Mat& z_batch) {
  StyleModel& m = state.model;
  if (z_batch.cols() != m.bridge.data_dim()) throw DimensionError("bridge: latent width mismatch");
  std::vector<int> steps(static_cast<std::size_t>(z_batch.rows()));
  for (auto& t : steps) {
    t = 1 + static_cast<int>(state.rng.index(static_cast<std::size_t>(state.config.T_bridge)));
  }
  const Mat eps = gaussian_sample(state.rng, z_batch.rows(), z_batch.cols());
  const ParamRefs all = m.all_params();
  zero_grads(all);
  const DdpmLoss loss = ddpm_loss(m.bridge, m.bridge_schedule, z_batch, steps, eps, nullptr, true);
  ParamRefs others = m.encoder_params();
  for (Parameter* p : m.decoder_params()) others.push_back(p);
  for (Parameter* p : m.refiner_params()) others.push_back(p);
  others.push_back(&m.codebook.entries);
  if (any_gradient(others)) throw ContractViolation("bridge step leaked gradient outside the bridge");
  adam_step(state.bridge_adam, m.bridge_params());
  state.round_to_storage();
  return loss.value;
}

Phase phase_for_step(const ModelConfig& cfg, std::int64_t step) {
  switch (cfg.mode) {
    case Mode::vaefs: return Phase::vaefs;
    case Mode::one_stage: return Phase::one_stage;
    case Mode::two_stage: return step < cfg.steps ? Phase::two_stage_s1 : Phase::two_stage_s2;
  }
  return Phase::one_stage;
}

std::int64_t total_steps(const ModelConfig& cfg) {
  return cfg.mode == Mode::two_stage ? 2 * static_cast<std::int64_t>(cfg.steps) : cfg.steps;
}

LossRecord train_iteration(TrainState& state, const ToyDataset& data) {
  const std::vector<std::size_t> pool = data.indices(Split::train);
  if (pool.empty()) throw ValidationError("training split is empty");
  std::vector<std::size_t> picks(static_cast<std::size_t>(state.config.batch));
  for (auto& i : picks) i = pool[state.rng.index(pool.size())];
  const Batch batch = make_batch(data, picks);
  const Phase phase = phase_for_step(state.config, state.step);
  LossRecord rec = train_step(state, batch, phase);
  if (state.config.use_bridge && phase != Phase::two_stage_s2) {
    const Mat z = posterior_samples(state.model, batch, state.rng);
    rec.bridge = bridge_train_step(state, z);
    rec.total += rec.bridge;
  }
  state.history.push_back(rec);
  return rec;
}

void run_training(TrainState& state, const ToyDataset& data, std::int64_t until_step,
                  const std::function<void(const LossRecord&)>& on_step) {
  while (state.step < until_step) {
    const LossRecord rec = train_iteration(state, data);
    if (on_step) on_step(rec);
  }
  calibrate_latent(state.model, data);
}

void calibrate_latent(StyleModel& model, const ToyDataset& data) {
  const std::vector<std::size_t> idx = data.indices(Split::train);
  if (idx.empty()) return;
  Mat mus(static_cast<Eigen::Index>(idx.size()), model.posterior.latent_dim());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    mus.row(static_cast<Eigen::Index>(i)) = encode_posterior(model, data.samples[idx[i]].mel).mu;
  }
  model.latent_centre = mus.colwise().mean();
  const Mat centred = mus.rowwise() - model.latent_centre;
  model.latent_spread =
      (centred.array().square().colwise().sum() / static_cast<double>(mus.rows())).sqrt().matrix();
  round_to_storage(model.latent_centre);
  round_to_storage(model.latent_spread);
}

std::vector<double> run_bridge_training(TrainState& state, const ToyDataset& data, int iterations) {
  if (!state.config.use_bridge) throw StateError("bridge is disabled in this configuration");
  const std::vector<std::size_t> pool = data.indices(Split::train);
  if (pool.empty()) throw ValidationError("bridge training needs a non-empty train split");
  std::vector<double> losses;
  std::vector<std::size_t> picks(static_cast<std::size_t>(state.config.batch));
  for (int i = 0; i < iterations; ++i) {
    for (auto& p : picks) p = pool[state.rng.index(pool.size())];
    const Mat z = posterior_samples(state.model, make_batch(data, picks), state.rng);
    losses.push_back(bridge_train_step(state, z));
  }
  return losses;
}

Mat reference_encode(const StyleModel& model, const ToyMel& mel) {
  if (mel.rows() != kBands || mel.cols() != kFrames) {
    throw DimensionError("reference_encode: expected a 32 x 64 mel");
  }
  return encode_frames(model.encoder, mel.transpose(), 1, nullptr);
}

GaussianPosterior encode_posterior(const StyleModel& model, const ToyMel& mel) {
  return model.posterior.encode(reference_encode(model, mel));
}

ToyMel acoustic_decode(const StyleModel& model, std::span<const int> content, const Mat& q) {
  if (q.rows() != 1) throw DimensionError("acoustic_decode: expected one style vector");
  std::vector<std::vector<int>> seq{std::vector<int>(content.begin(), content.end())};
  return rows_to_mel(model.decoder.forward(decoder_input(model, seq, q)), 0);
}

Quantized quantize(const StyleModel& model, const ModelConfig& cfg, const Mat& z) {
  if (cfg.use_vq) return nearest_code(z, model.codebook);
  Quantized out;
  out.q = z;
  out.index.assign(static_cast<std::size_t>(z.rows()), -1);
  return out;
}

ToyMel refine(const StyleModel& model, const ModelConfig& cfg, const ToyMel& coarse, RngStream& rng) {
  if (cfg.mode == Mode::vaefs) return coarse;
  const Mat cond = Eigen::Map<const Mat>(coarse.data(), 1, coarse.size());
  const Mat residual = sample(model.refiner, 1, &cond, model.refiner_schedule, rng);
  return coarse + Eigen::Map<const Mat>(residual.data(), kBands, kFrames);
}

Synthesis decode_and_refine(const StyleModel& model, const ModelConfig& cfg, const Mat& z,
                            std::span<const int> content, RngStream& rng) {
  if (!model.trained) throw StateError("model has not been trained");
  Synthesis out;
  out.z = z;
  const Quantized qz = quantize(model, cfg, z);
  out.q = qz.q;
  out.code = qz.index.front();
  out.coarse = acoustic_decode(model, content, out.q);
  out.refined = refine(model, cfg, out.coarse, rng);
  return out;
}

Synthesis synthesize_from_reference(const StyleModel& model, const ModelConfig& cfg,
                                    const ToyMel& reference, std::span<const int> content,
                                    RngStream& rng) {
  if (!model.trained) throw StateError("model has not been trained");
  const GaussianPosterior post = encode_posterior(model, reference);
  const Mat z = cfg.sample_style ? reparameterize(post, gaussian_sample(rng, 1, post.dim())) : post.mu;
  return decode_and_refine(model, cfg, z, content, rng);
}

Mat sample_bridge_latent(const StyleModel& model, RngStream& rng) {
  return sample(model.bridge, 1, nullptr, model.bridge_schedule, rng);
}

Synthesis synthesize_from_bridge(const StyleModel& model, const ModelConfig& cfg,
                                 std::span<const int> content, RngStream& rng) {
  if (!model.trained) throw StateError("model has not been trained");
  if (!cfg.use_bridge) throw StateError("bridge is disabled in this configuration");
  return decode_and_refine(model, cfg, sample_bridge_latent(model, rng), content, rng);
}

std::vector<ToyMel> traverse_latent(const StyleModel& model, const ModelConfig& cfg, int dim,
                                    const std::vector<double>& values, std::span<const int> content,
                                    std::uint64_t seed) {
  if (dim < 0 || dim >= model.posterior.latent_dim()) {
    throw IndexError("latent dim " + std::to_string(dim) + " out of range");
  }
  std::vector<ToyMel> out;
  out.reserve(values.size());
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("traverse_latent: non-finite value");
    Mat z = model.latent_centre;
    z(0, dim) = v;
    RngStream rng(seed);
    out.push_back(decode_and_refine(model, cfg, z, content, rng).refined);
  }
  return out;
}

}  // namespace ist
