#include "ist/vae.hpp"

#include "ist/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ist {

PosteriorHead::PosteriorHead(const std::string& name, int in_dim, int latent_dim)
    : mu_head_(name + ".mu", in_dim, latent_dim),
      log_sigma_head_(name + ".log_sigma", in_dim, latent_dim) {}

GaussianPosterior PosteriorHead::encode(const Mat& h) const {
  GaussianPosterior post{mu_head_.forward(h), log_sigma_head_.forward(h)};
  require_finite(post.mu, "posterior mean");
  require_finite(post.log_sigma, "posterior log sigma");
  return post;
}

Mat PosteriorHead::backward(const Mat& h, const Mat& d_mu, const Mat& d_log_sigma) {
  Mat dh = mu_head_.backward(h, d_mu);
  dh += log_sigma_head_.backward(h, d_log_sigma);
  return dh;
}

void PosteriorHead::init(RngStream& rng) {
  mu_head_.init(rng);
  log_sigma_head_.init(rng);
}

void PosteriorHead::collect(ParamRefs& out) {
  mu_head_.collect(out);
  log_sigma_head_.collect(out);
}

GaussianPosterior encode_gaussian(const PosteriorHead& head, const Mat& h) { return head.encode(h); }

Mat reparameterize(const GaussianPosterior& post, const Mat& eps) {
  if (eps.rows() != post.mu.rows() || eps.cols() != post.mu.cols()) {
    throw DimensionError("reparameterize: noise shape differs from the posterior");
  }
  return post.mu + post.sigma().cwiseProduct(eps);
}

double kl_to_standard_normal(const GaussianPosterior& post) {
  const auto s2 = (2.0 * post.log_sigma.array()).exp();
  if (post.mu.rows() == 0) return 0.0;
  const double total =
      0.5 * (post.mu.array().square() + s2 - 1.0 - 2.0 * post.log_sigma.array()).sum();
  return total / static_cast<double>(post.mu.rows());
}

void kl_gradient(const GaussianPosterior& post, Mat& d_mu, Mat& d_log_sigma) {
  const double inv_batch = 1.0 / static_cast<double>(post.mu.rows());
  d_mu = post.mu * inv_batch;
  d_log_sigma = (((2.0 * post.log_sigma.array()).exp() - 1.0) * inv_batch).matrix();
}

void ControllerState::reset() {
  error_sum = 0.0;
  updates = 0;
  beta = std::clamp(kp / 2.0 + beta_min, beta_min, beta_max);
}

double pi_beta_update(ControllerState& state, double kl_observed) {
  if (!std::isfinite(kl_observed)) throw NumericError("pi_beta_update: non-finite KL");
  const double error = state.setpoint - kl_observed;
  state.error_sum += error;
  ++state.updates;
  // kp / (1 + exp(e)) written to stay finite for large |e|
  const double p_term =
      error > 0.0 ? state.kp * std::exp(-error) / (1.0 + std::exp(-error))
                  : state.kp / (1.0 + std::exp(error));
  const double raw = p_term - state.ki * state.error_sum + state.beta_min;
  state.beta = std::clamp(raw, state.beta_min, state.beta_max);
  return state.beta;
}

double KlSmoother::update(double kl) {
  if (!seeded) {
    value = kl;
    seeded = true;
  } else {
    value = decay * value + (1.0 - decay) * kl;
  }
  return value;
}

double anneal_weight(std::int64_t step, const AnnealSchedule& sched) {
  if (sched.ramp <= 0) return 1.0;
  if (step <= 0) return 0.0;
  return std::min(1.0, static_cast<double>(step) / static_cast<double>(sched.ramp));
}

}  // namespace ist
