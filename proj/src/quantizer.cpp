#include "ist/quantizer.hpp"

#include "ist/errors.hpp"

#include <cmath>
#include <limits>

namespace ist {

Codebook::Codebook(const std::string& name, int size, int dim, RngStream& rng) {
  if (size <= 0 || dim <= 0) throw ConfigError("codebook size and dim must be positive");
  Mat e = gaussian_sample(rng, size, dim) / std::sqrt(static_cast<double>(dim));
  round_to_storage(e);
  entries = Parameter(name + ".entries", e);
  cluster_size = Mat::Ones(size, 1);
  embed_sum = e;
}

Quantized nearest_code(const Mat& z, const Codebook& book) {
  if (book.size() == 0) throw ConfigError("nearest_code: empty codebook");
  if (z.cols() != book.dim()) throw DimensionError("nearest_code: latent width differs from codebook");
  const Mat& e = book.entries.value;
  Quantized out;
  out.q.resize(z.rows(), z.cols());
  out.index.resize(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    double best = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (int k = 0; k < book.size(); ++k) {
      const double d = (z.row(r) - e.row(k)).squaredNorm();
      if (d < best) {
        best = d;
        best_k = k;
      }
    }
    out.index[static_cast<std::size_t>(r)] = best_k;
    out.q.row(r) = e.row(best_k);
  }
  return out;
}

VqLoss vq_loss(const Mat& z, const Mat& q, double gamma, bool ema) {
  if (z.rows() != q.rows() || z.cols() != q.cols()) throw DimensionError("vq_loss: shape mismatch");
  VqLoss out;
  if (z.rows() == 0) return out;
  const double inv_batch = 1.0 / static_cast<double>(z.rows());
  const Mat diff = z - q;
  const double sq = diff.squaredNorm() * inv_batch;
  out.value = gamma * sq;
  out.d_z = (2.0 * gamma * inv_batch) * diff;
  if (ema) {
    out.d_q = Mat::Zero(q.rows(), q.cols());
  } else {
    out.value += sq;
    out.d_q = (-2.0 * inv_batch) * diff;
  }
  return out;
}

StraightThrough StraightThrough::forward(const Mat& z, const Mat& q) {
  if (z.rows() != q.rows() || z.cols() != q.cols()) {
    throw DimensionError("straight_through: shape mismatch");
  }
  return StraightThrough{q};
}

void ema_update(Codebook& book, const Mat& z, std::span<const int> index) {
  if (static_cast<Eigen::Index>(index.size()) != z.rows()) {
    throw DimensionError("ema_update: one assignment per row required");
  }
  if (z.cols() != book.dim()) throw DimensionError("ema_update: latent width differs from codebook");
  const int k_count = book.size();
  Mat counts = Mat::Zero(k_count, 1);
  Mat sums = Mat::Zero(k_count, book.dim());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int k = index[static_cast<std::size_t>(r)];
    if (k < 0 || k >= k_count) throw IndexError("ema_update: code index out of range");
    counts(k, 0) += 1.0;
    sums.row(k) += z.row(r);
  }
  const double lambda = book.decay;
  book.cluster_size = lambda * book.cluster_size + (1.0 - lambda) * counts;
  book.embed_sum = lambda * book.embed_sum + (1.0 - lambda) * sums;
  const double total = book.cluster_size.sum();
  for (int k = 0; k < k_count; ++k) {
    // Laplace smoothing keeps rarely used entries finite.
    const double smoothed =
        (book.cluster_size(k, 0) + book.epsilon) / (total + k_count * book.epsilon) * total;
    book.entries.value.row(k) = book.embed_sum.row(k) / smoothed;
  }
}

}  // namespace ist
