#pragma once

#include "ist/nn.hpp"

namespace ist {

// Diagonal Gaussian q(z|x), one sample per row. sigma is stored as log sigma.
struct GaussianPosterior {
  Mat mu;
  Mat log_sigma;

  Mat sigma() const { return log_sigma.array().exp().matrix(); }
  Eigen::Index dim() const { return mu.cols(); }
};

// Two linear heads producing mu and log sigma from the reference embedding.
class PosteriorHead {
 public:
  PosteriorHead() = default;
  PosteriorHead(const std::string& name, int in_dim, int latent_dim);

  GaussianPosterior encode(const Mat& h) const;
  // Accumulates head gradients and returns dL/dh.
  Mat backward(const Mat& h, const Mat& d_mu, const Mat& d_log_sigma);

  void init(RngStream& rng);
  void collect(ParamRefs& out);
  int latent_dim() const { return mu_head_.out_dim(); }
  Linear& mu_head() { return mu_head_; }
  Linear& log_sigma_head() { return log_sigma_head_; }

 private:
  Linear mu_head_;
  Linear log_sigma_head_;
};

GaussianPosterior encode_gaussian(const PosteriorHead& head, const Mat& h);

// z = mu + sigma * eps.
Mat reparameterize(const GaussianPosterior& post, const Mat& eps);

// Sum over latent dims of 0.5 (mu^2 + sigma^2 - 1 - ln sigma^2), mean over rows.
double kl_to_standard_normal(const GaussianPosterior& post);
// Gradient of the above w.r.t. mu and log sigma.
void kl_gradient(const GaussianPosterior& post, Mat& d_mu, Mat& d_log_sigma);

// PI controller state for the KL weight.
struct ControllerState {
  double kp = 0.01;
  double ki = 0.0001;
  double beta_min = 0.0;
  double beta_max = 1.0;
  double setpoint = 3.0;
  double error_sum = 0.0;
  double beta = 0.0;
  std::int64_t updates = 0;

  // beta before any observation: the controller's output at zero error.
  void reset();
};

// e = setpoint - kl; accumulates e, then
// beta = kp / (1 + exp(e)) - ki * sum(e) + beta_min, clamped to [beta_min, beta_max].
double pi_beta_update(ControllerState& state, double kl_observed);

// Exponential moving average of the observed KL; seeded by the first value.
struct KlSmoother {
  double decay = 0.99;
  double value = 0.0;
  bool seeded = false;

  double update(double kl);
};

// Linear KL warm-up used by the plain VAE: w = min(1, step / ramp).
struct AnnealSchedule {
  std::int64_t ramp = 5000;
};
double anneal_weight(std::int64_t step, const AnnealSchedule& sched);

}  // namespace ist
