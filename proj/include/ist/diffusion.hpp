#pragma once

#include "ist/nn.hpp"
#include "ist/rng.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace ist {

// Noise tables for t = 1..T. Accessors take the 1-based diffusion step.
class DiffusionSchedule {
 public:
  // Linear beta from beta_start (t=1) to beta_end (t=T).
  static DiffusionSchedule linear(int steps, double beta_start, double beta_end);
  // Linear 1e-4..0.02 at T=1000, endpoints scaled by 1000/T for shorter
  // chains (beta_end capped at 0.999).
  static DiffusionSchedule scaled_default(int steps);

  int steps() const { return static_cast<int>(beta_.size()); }
  double beta(int t) const { return beta_[checked(t)]; }
  double alpha(int t) const { return 1.0 - beta_[checked(t)]; }
  // alpha_bar(0) == 1.
  double alpha_bar(int t) const;
  double sigma(int t) const { return sigma_[checked(t)]; }

 private:
  std::size_t checked(int t) const;

  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
  std::vector<double> sigma_;
};

// 16-dimensional sinusoidal embedding of the diffusion step.
inline constexpr int kTimeEmbedDim = 16;
RowVec timestep_embedding(int t);

// sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Mat q_sample(const Mat& x0, int t, const Mat& eps, const DiffusionSchedule& sched);
// Per-row diffusion step.
Mat q_sample(const Mat& x0, std::span<const int> t, const Mat& eps, const DiffusionSchedule& sched);

// (x_t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t) + sigma_t z.
Mat reverse_step(const Mat& xt, int t, const Mat& eps_hat, const Mat& z,
                 const DiffusionSchedule& sched);

// Noise predictor eps_theta(x_t, t[, c]). Rows are independent samples; the
// network input is [x_t, embed(t), Linear(c)].
class Denoiser {
 public:
  struct Cache {
    FeedForwardNet::Cache net;
    Mat cond;  // raw condition rows, kept for the projection's backward
    std::vector<int> t;
  };

  Denoiser() = default;
  // cond_dim == 0 builds an unconditional denoiser.
  Denoiser(const std::string& name, int data_dim, std::vector<int> hidden, int cond_dim = 0,
           int cond_proj_dim = 0);

  // Switches the network output F to a clean-data estimate; the predictor
  // still returns noise, (x_t - sqrt(abar_t) x0_hat) / sqrt(1 - abar_t). With
  // data_scale = 0, x0_hat = F. Otherwise x0_hat = c_skip x_t / sqrt(abar_t)
  // + c_out F with the skip and output weights of a data distribution of
  // that scale, so the network need not pass x_t through at low noise.
  void predict_clean(const DiffusionSchedule& sched, double data_scale = 0.0);
  bool predicts_clean() const { return !out_scale_.empty(); }
  // Per-step weight on the squared noise error in ddpm_loss. With a data
  // scale it is 1 + sigma_t^2 / scale^2, which makes the loss the plain
  // squared error of F at every step; 1 otherwise.
  double loss_weight(int t) const;

  int data_dim() const { return data_dim_; }
  int cond_dim() const { return cond_dim_; }
  bool conditional() const { return cond_dim_ > 0; }

  Mat predict(const Mat& xt, std::span<const int> t, const Mat* cond = nullptr) const;
  Mat predict(const Mat& xt, int t, const Mat* cond = nullptr) const;
  Mat forward(const Mat& xt, std::span<const int> t, const Mat* cond, Cache& cache) const;
  // Accumulates parameter gradients. Returns dL/dc (empty when unconditional);
  // dL/dx_t goes to d_xt when given.
  Mat backward(const Cache& cache, const Mat& d_eps_hat, Mat* d_xt = nullptr);

  void init(RngStream& rng);
  void collect(ParamRefs& out);

  FeedForwardNet& net() { return net_; }
  const FeedForwardNet& net() const { return net_; }

 private:
  Mat assemble_input(const Mat& xt, std::span<const int> t, const Mat* cond) const;
  Mat to_noise(const Mat& xt, std::span<const int> t, const Mat& out) const;
  std::size_t table_index(int t) const;

  int data_dim_ = 0;
  int cond_dim_ = 0;
  int cond_proj_dim_ = 0;
  Linear cond_proj_;
  FeedForwardNet net_;
  // eps_hat = direct_scale x_t + out_scale F
  std::vector<double> direct_scale_;
  std::vector<double> out_scale_;
  std::vector<double> loss_weight_;
};

struct DdpmLoss {
  double value = 0.0;
  Mat d_cond;  // gradient w.r.t. the condition, when requested
  Mat d_x0;    // gradient w.r.t. the clean data, when requested
};

// Mean over all elements of (eps - eps_hat)^2 and its gradient w.r.t. eps_hat.
double ddpm_objective(const Mat& eps, const Mat& eps_hat, Mat* d_eps_hat = nullptr);

// Diffusion training loss at the given steps and noise, each row weighted by
// den.loss_weight(t). With backprop set, parameter gradients are accumulated
// into the denoiser. Throws ConfigError when `cond` presence disagrees with
// the denoiser.
DdpmLoss ddpm_loss(Denoiser& den, const DiffusionSchedule& sched, const Mat& x0,
                   std::span<const int> t, const Mat& eps, const Mat* cond, bool backprop);

// Predicts eps_hat for a whole batch at one diffusion step.
using NoisePredictor = std::function<Mat(const Mat& xt, int t)>;

// Ancestral sampling from x_T ~ N(0, I) down to x_0. No noise is drawn at t=1.
Mat sample(const NoisePredictor& predict, Eigen::Index rows, Eigen::Index cols,
           const DiffusionSchedule& sched, RngStream& rng);
Mat sample(const Denoiser& den, Eigen::Index rows, const Mat* cond, const DiffusionSchedule& sched,
           RngStream& rng);

}  // namespace ist
