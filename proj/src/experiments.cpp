#include "ist/experiments.hpp"

#include "ist/errors.hpp"

#include <cmath>

namespace ist {

namespace {

double mean_squared(const ToyMel& a, const ToyMel& b) {
  return (a - b).array().square().mean();
}

}  // namespace

ReconstructionEval evaluate_reconstruction(const StyleModel& model, const ModelConfig& cfg,
                                           const ToyDataset& data, std::uint64_t seed) {
  ReconstructionEval out;
  RngStream rng(seed);
  for (std::size_t i : data.indices(Split::test)) {
    const ToySample& s = data.samples[i];
    const Synthesis syn = synthesize_from_reference(model, cfg, s.mel, s.content_sequence, rng);
    out.targets.push_back(s.mel);
    out.coarse.push_back(syn.coarse);
    out.refined.push_back(syn.refined);
  }
  out.count = out.targets.size();
  if (out.count < 2) throw ValidationError("test split needs at least two samples");
  for (std::size_t i = 0; i < out.count; ++i) {
    out.mse_coarse += mean_squared(out.coarse[i], out.targets[i]);
    out.mse_refined += mean_squared(out.refined[i], out.targets[i]);
    out.mcd_coarse += mcd(out.coarse[i], out.targets[i]);
    out.mcd_refined += mcd(out.refined[i], out.targets[i]);
  }
  const double n = static_cast<double>(out.count);
  out.mse_coarse /= n;
  out.mse_refined /= n;
  out.mcd_coarse /= n;
  out.mcd_refined /= n;
  out.fd_coarse = toy_fd(out.coarse, out.targets);
  out.fd_refined = toy_fd(out.refined, out.targets);
  return out;
}

TransferEval evaluate_transfer(const StyleModel& model, const ModelConfig& cfg, const ToyDataset& data,
                               std::size_t pairs, std::uint64_t seed, TransferTolerance tol) {
  const std::vector<std::size_t> test = data.indices(Split::test);
  if (test.size() < 2) throw ValidationError("test split needs at least two samples");
  TransferEval out;
  RngStream rng(seed);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < pairs; ++k) {
    TransferPair p;
    p.reference = test[k % test.size()];
    // Nearest following test item with a different content id.
    std::size_t j = test[(k + 1) % test.size()];
    for (std::size_t step = 1; step < test.size(); ++step) {
      const std::size_t cand = test[(k + step) % test.size()];
      if (data.samples[cand].factors.content != data.samples[p.reference].factors.content) {
        j = cand;
        break;
      }
    }
    p.content_source = j;
    p.truth = data.samples[p.reference].factors;
    const Synthesis syn = synthesize_from_reference(model, cfg, data.samples[p.reference].mel,
                                                    data.samples[j].content_sequence, rng);
    p.output = syn.refined;
    try {
      p.estimate = estimate_factors(syn.refined);
      p.hit = std::abs(p.estimate.energy - p.truth.energy) <= tol.energy_rel * p.truth.energy &&
              std::abs(p.estimate.pitch_level - p.truth.pitch_level) <= tol.pitch_bands &&
              std::abs(p.estimate.pitch_variation - p.truth.pitch_variation) <= tol.variation_bands;
    } catch (const EstimationError&) {
      p.hit = false;
    }
    hits += p.hit ? 1 : 0;
    out.pairs.push_back(std::move(p));
  }
  out.hit_rate = pairs ? static_cast<double>(hits) / static_cast<double>(pairs) : 0.0;
  return out;
}

CodeHistogramEval evaluate_code_histograms(const StyleModel& model, const ModelConfig& cfg,
                                           const ToyDataset& data, std::size_t bridge_samples,
                                           std::size_t draws_per_item, std::uint64_t seed) {
  if (!cfg.use_vq) throw ConfigError("code histograms need quantization enabled");
  if (!cfg.use_bridge) throw StateError("bridge is disabled in this configuration");
  const auto k = static_cast<std::size_t>(model.codebook.size());
  CodeHistogramEval out;
  out.bridge.assign(k, 0.0);
  out.posterior.assign(k, 0.0);
  RngStream rng(seed);

  const Mat zb = sample(model.bridge, static_cast<Eigen::Index>(bridge_samples), nullptr,
                        model.bridge_schedule, rng);
  for (int idx : nearest_code(zb, model.codebook).index) out.bridge[static_cast<std::size_t>(idx)] += 1.0;

  const std::vector<std::size_t> train = data.indices(Split::train);
  std::size_t total = 0;
  for (std::size_t i : train) {
    const GaussianPosterior post = encode_posterior(model, data.samples[i].mel);
    Mat mu(static_cast<Eigen::Index>(draws_per_item), post.dim());
    Mat ls(mu.rows(), post.dim());
    mu.rowwise() = post.mu.row(0);
    ls.rowwise() = post.log_sigma.row(0);
    const GaussianPosterior many{mu, ls};
    const Mat z = reparameterize(many, gaussian_sample(rng, mu.rows(), mu.cols()));
    for (int idx : nearest_code(z, model.codebook).index) out.posterior[static_cast<std::size_t>(idx)] += 1.0;
    total += draws_per_item;
  }
  for (double& v : out.bridge) v /= static_cast<double>(bridge_samples);
  for (double& v : out.posterior) v /= static_cast<double>(total);
  for (std::size_t i = 0; i < k; ++i) out.tv += 0.5 * std::abs(out.bridge[i] - out.posterior[i]);
  return out;
}

ExclusivityReport traversal_report(const StyleModel& model, const ModelConfig& cfg, int content,
                                   std::uint64_t seed, int points) {
  const std::vector<int> seq(kFrames, content);
  TraversalFn fn = [&](int dim, const std::vector<double>& values) {
    return traverse_latent(model, cfg, dim, values, seq, seed);
  };
  const std::vector<double> centre(model.latent_centre.data(),
                                   model.latent_centre.data() + model.latent_centre.size());
  const std::vector<double> spread(model.latent_spread.data(),
                                   model.latent_spread.data() + model.latent_spread.size());
  return exclusivity_score(fn, centre, spread, points);
}

std::vector<AblationVariant> ablation_variants(const ModelConfig& base) {
  std::vector<AblationVariant> out;
  ModelConfig full = base;
  full.use_controlvae = full.use_vq = full.use_bridge = true;
  out.push_back({"full", full});
  ModelConfig a = full;
  a.use_controlvae = false;
  out.push_back({"w/o ControlVAE", a});
  ModelConfig b = full;
  b.use_vq = false;
  out.push_back({"w/o VQ", b});
  ModelConfig c = full;
  c.use_bridge = false;
  out.push_back({"w/o Diffusion Bridge", c});
  return out;
}

namespace {

ModelConfig small_config(std::uint64_t seed) {
  ModelConfig c;
  c.seed = seed;
  c.latent_dim = 4;
  c.codebook_size = 8;
  c.encoder_dim = 6;
  c.content_dim = 3;
  c.decoder_hidden = 8;
  c.decoder_layers = 2;
  c.refiner_hidden = 8;
  c.refiner_layers = 1;
  c.cond_proj_dim = 4;
  c.bridge_hidden = 8;
  c.bridge_layers = 2;
  c.T_refiner = 10;
  c.T_bridge = 10;
  c.batch = 2;
  // Keeps totals O(1) so central differences resolve small encoder
  // gradients; L_All restores the default weight.
  c.rec_weight = 1.0;
  return c;
}

// Randomizes biases too, so no gradient is structurally zero.
void perturb(StyleModel& m, RngStream& rng) {
  for (Parameter* p : m.all_params()) {
    if (p->name.find(".bias") != std::string::npos) p->value = 0.2 * gaussian_sample(rng, p->value.rows(), p->value.cols());
  }
}

struct Fixture {
  ModelConfig cfg;
  StyleModel model;
  Batch batch;
  StepNoise noise;
};

Fixture make_fixture(std::uint64_t seed, bool use_vq) {
  Fixture f;
  f.cfg = small_config(seed);
  f.cfg.use_vq = use_vq;
  RngStream rng(seed);
  f.model = StyleModel(f.cfg, rng);
  perturb(f.model, rng);
  const ToyDataset data = make_dataset(10, seed);
  const std::vector<std::size_t> idx{0, 3};
  f.batch = make_batch(data, idx);
  f.noise = draw_step_noise(f.cfg, f.batch.size(), rng);
  return f;
}

ParamRefs concat(std::initializer_list<ParamRefs> groups) {
  ParamRefs out;
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

// Analytic gradient of loss(a) - loss(b) where a and b differ in one weight.
GradCheckReport difference_check(Fixture& f, Phase phase, const ParamRefs& params, const ModelConfig& cfg_a,
                                 double beta_a, const ModelConfig& cfg_b, double beta_b,
                                 const GradCheckOptions& options) {
  StyleModel& m = f.model;
  zero_grads(m.all_params());
  forward_backward(m, cfg_b, phase, f.batch, f.noise, beta_b, true);
  std::vector<Mat> base;
  for (Parameter* p : params) base.push_back(p->grad);
  zero_grads(m.all_params());
  forward_backward(m, cfg_a, phase, f.batch, f.noise, beta_a, true);
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->grad -= base[i];
  auto loss = [&] {
    return forward_backward(m, cfg_a, phase, f.batch, f.noise, beta_a, false).total -
           forward_backward(m, cfg_b, phase, f.batch, f.noise, beta_b, false).total;
  };
  return finite_diff_check(loss, params, options);
}

GradCheckReport total_check(Fixture& f, Phase phase, const ParamRefs& params, double beta,
                            const GradCheckOptions& options) {
  zero_grads(f.model.all_params());
  forward_backward(f.model, f.cfg, phase, f.batch, f.noise, beta, true);
  auto loss = [&] { return forward_backward(f.model, f.cfg, phase, f.batch, f.noise, beta, false).total; };
  return finite_diff_check(loss, params, options);
}

}  // namespace

std::vector<NamedGradCheck> gradient_suite(std::uint64_t seed, const GradCheckOptions& requested) {
  GradCheckOptions options = requested;
  options.seed = seed;
  GradCheckOptions wide = options;
  wide.step = std::max(options.step, 1e-3);
  std::vector<NamedGradCheck> out;
  {
    // Plain VAE with beta = 0: the total is L_rec alone.
    Fixture f = make_fixture(seed, false);
    const ParamRefs ps = concat({f.model.encoder_params(), f.model.decoder_params()});
    out.push_back({"L_rec", total_check(f, Phase::vaefs, ps, 0.0, options)});
  }
  {
    Fixture f = make_fixture(seed + 1, false);
    const ParamRefs ps = f.model.encoder_params();
    out.push_back({"KL path", difference_check(f, Phase::vaefs, ps, f.cfg, 0.7, f.cfg, 0.0, options)});
  }
  {
    Fixture f = make_fixture(seed + 2, true);
    ModelConfig no_commit = f.cfg;
    no_commit.gamma = 0.0;
    const ParamRefs ps = f.model.encoder_params();
    out.push_back({"L_Q commitment", difference_check(f, Phase::vaefs, ps, f.cfg, 0.2, no_commit, 0.2, options)});
  }
  {
    Fixture f = make_fixture(seed + 3, false);
    out.push_back({"L_R", total_check(f, Phase::two_stage_s2, f.model.refiner_params(), 0.2, wide)});
  }
  {
    Fixture f = make_fixture(seed + 4, false);
    RngStream rng(seed + 4);
    const Mat z = gaussian_sample(rng, 5, f.cfg.latent_dim);
    std::vector<int> t(5);
    for (auto& s : t) s = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(f.cfg.T_bridge)));
    const Mat eps = gaussian_sample(rng, 5, f.cfg.latent_dim);
    const ParamRefs ps = f.model.bridge_params();
    zero_grads(ps);
    ddpm_loss(f.model.bridge, f.model.bridge_schedule, z, t, eps, nullptr, true);
    auto loss = [&] { return ddpm_loss(f.model.bridge, f.model.bridge_schedule, z, t, eps, nullptr, false).value; };
    out.push_back({"L_B", finite_diff_check(loss, ps, options)});
  }
  {
    Fixture f = make_fixture(seed + 5, false);
    f.cfg.rec_weight = ModelConfig{}.rec_weight;
    const ParamRefs ps = concat({f.model.encoder_params(), f.model.decoder_params(), f.model.refiner_params()});
    out.push_back({"L_All", total_check(f, Phase::one_stage, ps, 0.3, wide)});
  }
  {
    Fixture f = make_fixture(seed + 6, true);
    const ParamRefs ps = concat({f.model.decoder_params(), f.model.refiner_params()});
    out.push_back({"L_All quantized", total_check(f, Phase::one_stage, ps, 0.3, wide)});
  }
  return out;
}

}  // namespace ist
