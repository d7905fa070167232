#include "ist/diffusion.hpp"

#include "ist/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ist {

DiffusionSchedule DiffusionSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("diffusion schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError("diffusion schedule: need 0 < beta_start <= beta_end < 1");
  }
  DiffusionSchedule s;
  s.beta_.resize(static_cast<std::size_t>(steps));
  s.alpha_bar_.resize(static_cast<std::size_t>(steps));
  s.sigma_.resize(static_cast<std::size_t>(steps));
  double abar = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    const double beta = beta_start + (beta_end - beta_start) * frac;
    const double abar_prev = abar;
    abar *= 1.0 - beta;
    s.beta_[i] = beta;
    s.alpha_bar_[i] = abar;
    s.sigma_[i] = std::sqrt((1.0 - abar_prev) / (1.0 - abar) * beta);
  }
  return s;
}

DiffusionSchedule DiffusionSchedule::scaled_default(int steps) {
  if (steps < 1) throw ConfigError("diffusion schedule: T must be >= 1");
  const double scale = 1000.0 / steps;
  const double beta_end = std::min(0.02 * scale, 0.999);
  const double beta_start = std::min(1e-4 * scale, beta_end);
  return linear(steps, beta_start, beta_end);
}

std::size_t DiffusionSchedule::checked(int t) const {
  if (t < 1 || t > steps()) {
    throw IndexError("diffusion step " + std::to_string(t) + " outside 1.." +
                     std::to_string(steps()));
  }
  return static_cast<std::size_t>(t - 1);
}

double DiffusionSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  return alpha_bar_[checked(t)];
}

RowVec timestep_embedding(int t) {
  RowVec e(kTimeEmbedDim);
  const int half = kTimeEmbedDim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    e(i) = std::sin(t * freq);
    e(half + i) = std::cos(t * freq);
  }
  return e;
}

Mat q_sample(const Mat& x0, int t, const Mat& eps, const DiffusionSchedule& sched) {
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) {
    throw DimensionError("q_sample: noise shape differs from x0");
  }
  if (t < 1) throw IndexError("q_sample: diffusion step must be >= 1");
  const double abar = sched.alpha_bar(t);
  return std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * eps;
}

Mat q_sample(const Mat& x0, std::span<const int> t, const Mat& eps, const DiffusionSchedule& sched) {
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) {
    throw DimensionError("q_sample: noise shape differs from x0");
  }
  if (static_cast<Eigen::Index>(t.size()) != x0.rows()) {
    throw DimensionError("q_sample: need one diffusion step per row");
  }
  Mat out(x0.rows(), x0.cols());
  for (Eigen::Index r = 0; r < x0.rows(); ++r) {
    const int step = t[static_cast<std::size_t>(r)];
    if (step < 1) throw IndexError("q_sample: diffusion step must be >= 1");
    const double abar = sched.alpha_bar(step);
    out.row(r) = std::sqrt(abar) * x0.row(r) + std::sqrt(1.0 - abar) * eps.row(r);
  }
  return out;
}

Mat reverse_step(const Mat& xt, int t, const Mat& eps_hat, const Mat& z,
                 const DiffusionSchedule& sched) {
  if (xt.rows() != eps_hat.rows() || xt.cols() != eps_hat.cols()) {
    throw DimensionError("reverse_step: eps_hat shape differs from x_t");
  }
  const double beta = sched.beta(t);
  const double alpha = 1.0 - beta;
  const double abar = sched.alpha_bar(t);
  Mat mean = (xt - (beta / std::sqrt(1.0 - abar)) * eps_hat) / std::sqrt(alpha);
  const double sigma = sched.sigma(t);
  if (sigma > 0.0) {
    if (z.rows() != xt.rows() || z.cols() != xt.cols()) {
      throw DimensionError("reverse_step: noise shape differs from x_t");
    }
    mean += sigma * z;
  }
  return mean;
}

Denoiser::Denoiser(const std::string& name, int data_dim, std::vector<int> hidden, int cond_dim,
                   int cond_proj_dim)
    : data_dim_(data_dim), cond_dim_(cond_dim), cond_proj_dim_(cond_dim > 0 ? cond_proj_dim : 0) {
  if (data_dim <= 0) throw DimensionError(name + ": data dim must be positive");
  if (cond_dim > 0) {
    if (cond_proj_dim <= 0) throw DimensionError(name + ": condition projection must be positive");
    cond_proj_ = Linear(name + ".cond", cond_dim, cond_proj_dim);
  }
  std::vector<int> widths;
  widths.push_back(data_dim + kTimeEmbedDim + cond_proj_dim_);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(data_dim);
  net_ = FeedForwardNet(name + ".net", std::move(widths));
}

void Denoiser::predict_clean(const DiffusionSchedule& sched, double data_scale) {
  if (data_scale < 0.0) throw ConfigError("denoiser: data scale must be >= 0");
  direct_scale_.clear();
  out_scale_.clear();
  loss_weight_.clear();
  for (int t = 1; t <= sched.steps(); ++t) {
    const double a = std::sqrt(sched.alpha_bar(t));
    const double s = std::sqrt(1.0 - sched.alpha_bar(t));
    // x0_hat = c_skip x_t / a + c_out F, with sigma = s / a the noise level of x_t / a.
    double c_skip = 0.0, c_out = 1.0, weight = 1.0;
    if (data_scale > 0.0) {
      const double sigma = s / a, d2 = data_scale * data_scale;
      c_skip = d2 / (sigma * sigma + d2);
      c_out = sigma * data_scale / std::sqrt(sigma * sigma + d2);
      // (s / (a c_out))^2: unit weight on the error of F itself.
      weight = 1.0 + sigma * sigma / d2;
    }
    loss_weight_.push_back(weight);
    direct_scale_.push_back((1.0 - c_skip) / s);
    out_scale_.push_back(-a * c_out / s);
  }
}

double Denoiser::loss_weight(int t) const {
  return predicts_clean() ? loss_weight_[table_index(t)] : 1.0;
}

std::size_t Denoiser::table_index(int t) const {
  if (t < 1 || t > static_cast<int>(out_scale_.size())) {
    throw IndexError("denoiser: diffusion step " + std::to_string(t) + " outside its schedule");
  }
  return static_cast<std::size_t>(t - 1);
}

Mat Denoiser::to_noise(const Mat& xt, std::span<const int> t, const Mat& out) const {
  if (!predicts_clean()) return out;
  Mat eps(out.rows(), out.cols());
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const std::size_t i = table_index(t[static_cast<std::size_t>(r)]);
    eps.row(r) = direct_scale_[i] * xt.row(r) + out_scale_[i] * out.row(r);
  }
  return eps;
}

Mat Denoiser::assemble_input(const Mat& xt, std::span<const int> t, const Mat* cond) const {
  if (xt.cols() != data_dim_) throw DimensionError("denoiser: x_t width mismatch");
  if (static_cast<Eigen::Index>(t.size()) != xt.rows()) {
    throw DimensionError("denoiser: need one diffusion step per row");
  }
  if (conditional() != (cond != nullptr)) {
    throw ConfigError(conditional() ? "denoiser is conditional but no condition was given"
                                    : "denoiser is unconditional but a condition was given");
  }
  Mat in(xt.rows(), net_.in_dim());
  in.leftCols(data_dim_) = xt;
  RowVec emb;
  int last = -1;
  for (Eigen::Index r = 0; r < xt.rows(); ++r) {
    const int step = t[static_cast<std::size_t>(r)];
    if (step != last) {
      emb = timestep_embedding(step);
      last = step;
    }
    in.block(r, data_dim_, 1, kTimeEmbedDim) = emb;
  }
  if (cond != nullptr) {
    if (cond->rows() != xt.rows()) throw DimensionError("denoiser: condition row count mismatch");
    in.rightCols(cond_proj_dim_) = cond_proj_.forward(*cond);
  }
  return in;
}

Mat Denoiser::predict(const Mat& xt, std::span<const int> t, const Mat* cond) const {
  return to_noise(xt, t, net_.forward(assemble_input(xt, t, cond)));
}

Mat Denoiser::predict(const Mat& xt, int t, const Mat* cond) const {
  std::vector<int> steps(static_cast<std::size_t>(xt.rows()), t);
  return predict(xt, steps, cond);
}

Mat Denoiser::forward(const Mat& xt, std::span<const int> t, const Mat* cond, Cache& cache) const {
  Mat in = assemble_input(xt, t, cond);
  if (cond != nullptr) cache.cond = *cond;
  cache.t.assign(t.begin(), t.end());
  return to_noise(xt, t, net_.forward(in, cache.net));
}

Mat Denoiser::backward(const Cache& cache, const Mat& d_eps_hat, Mat* d_xt) {
  Mat d_out = d_eps_hat;
  Mat d_direct;
  if (predicts_clean()) {
    d_direct.resize(d_eps_hat.rows(), d_eps_hat.cols());
    for (Eigen::Index r = 0; r < d_eps_hat.rows(); ++r) {
      const std::size_t i = table_index(cache.t[static_cast<std::size_t>(r)]);
      d_out.row(r) *= out_scale_[i];
      d_direct.row(r) = direct_scale_[i] * d_eps_hat.row(r);
    }
  }
  Mat d_in = net_.backward(cache.net, d_out);
  if (d_xt != nullptr) {
    *d_xt = d_in.leftCols(data_dim_);
    if (predicts_clean()) *d_xt += d_direct;
  }
  if (!conditional()) return Mat();
  return cond_proj_.backward(cache.cond, d_in.rightCols(cond_proj_dim_));
}

void Denoiser::init(RngStream& rng) {
  if (conditional()) cond_proj_.init(rng);
  net_.init(rng);
}

void Denoiser::collect(ParamRefs& out) {
  if (conditional()) cond_proj_.collect(out);
  net_.collect(out);
}

double ddpm_objective(const Mat& eps, const Mat& eps_hat, Mat* d_eps_hat) {
  if (eps.rows() != eps_hat.rows() || eps.cols() != eps_hat.cols()) {
    throw DimensionError("ddpm_objective: shape mismatch");
  }
  const double n = static_cast<double>(eps.size());
  const Mat diff = eps_hat - eps;
  if (d_eps_hat != nullptr) *d_eps_hat = (2.0 / n) * diff;
  return diff.squaredNorm() / n;
}

DdpmLoss ddpm_loss(Denoiser& den, const DiffusionSchedule& sched, const Mat& x0,
                   std::span<const int> t, const Mat& eps, const Mat* cond, bool backprop) {
  if (den.conditional() != (cond != nullptr)) {
    throw ConfigError("ddpm_loss: condition presence does not match the denoiser");
  }
  const Mat xt = q_sample(x0, t, eps, sched);
  Denoiser::Cache cache;
  const Mat eps_hat = den.forward(xt, t, cond, cache);
  DdpmLoss out;
  Mat d_eps_hat;
  out.value = ddpm_objective(eps, eps_hat, backprop ? &d_eps_hat : nullptr);
  if (den.predicts_clean()) {
    const Mat sq = (eps_hat - eps).rowwise().squaredNorm();
    out.value = 0.0;
    for (Eigen::Index r = 0; r < sq.rows(); ++r) {
      const double w = den.loss_weight(t[static_cast<std::size_t>(r)]);
      out.value += w * sq(r);
      if (backprop) d_eps_hat.row(r) *= w;
    }
    out.value /= static_cast<double>(eps.size());
  }
  if (backprop) {
    Mat d_xt;
    out.d_cond = den.backward(cache, d_eps_hat, &d_xt);
    for (Eigen::Index r = 0; r < d_xt.rows(); ++r) {
      d_xt.row(r) *= std::sqrt(sched.alpha_bar(t[static_cast<std::size_t>(r)]));
    }
    out.d_x0 = std::move(d_xt);
  }
  return out;
}

Mat sample(const NoisePredictor& predict, Eigen::Index rows, Eigen::Index cols,
           const DiffusionSchedule& sched, RngStream& rng) {
  Mat x = gaussian_sample(rng, rows, cols);
  for (int t = sched.steps(); t >= 1; --t) {
    const Mat eps_hat = predict(x, t);
    require_finite(eps_hat, "predicted noise");
    const Mat z = t > 1 ? gaussian_sample(rng, rows, cols) : Mat();
    x = reverse_step(x, t, eps_hat, z, sched);
  }
  return x;
}

Mat sample(const Denoiser& den, Eigen::Index rows, const Mat* cond, const DiffusionSchedule& sched,
           RngStream& rng) {
  return sample([&](const Mat& xt, int t) { return den.predict(xt, t, cond); }, rows,
                den.data_dim(), sched, rng);
}

}  // namespace ist
