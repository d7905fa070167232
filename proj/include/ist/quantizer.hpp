#pragma once

#include "ist/nn.hpp"
#include "ist/rng.hpp"

#include <span>
#include <vector>

namespace ist {

// K x D codebook with exponential-moving-average statistics. `entries` is a
// Parameter so the two-term loss mode can train it with the optimizer.
struct Codebook {
  Parameter entries;  // K x D
  Mat cluster_size;   // K x 1, EMA of assignment counts
  Mat embed_sum;      // K x D, EMA of assigned vector sums
  double decay = 0.99;
  double epsilon = 1e-5;

  Codebook() = default;
  // Entries from N(0, 1/D); EMA statistics start at N_k = 1, m_k = e_k.
  Codebook(const std::string& name, int size, int dim, RngStream& rng);

  int size() const { return static_cast<int>(entries.value.rows()); }
  int dim() const { return static_cast<int>(entries.value.cols()); }
};

struct Quantized {
  Mat q;                   // one code per row
  std::vector<int> index;  // chosen entry per row
};

// argmin_k ||z - e_k||^2 per row; ties go to the smaller index.
Quantized nearest_code(const Mat& z, const Codebook& book);

struct VqLoss {
  double value = 0.0;
  Mat d_z;  // commitment gradient
  Mat d_q;  // codebook-loss gradient (zero in EMA mode)
};

// gamma ||z - sg[q]||^2, plus ||sg[z] - q||^2 when ema is false. Squared norms
// are summed over dims and averaged over rows.
VqLoss vq_loss(const Mat& z, const Mat& q, double gamma, bool ema);

// Forward value is q; the gradient w.r.t. z is the downstream gradient copied.
struct StraightThrough {
  Mat value;
  static StraightThrough forward(const Mat& z, const Mat& q);
  static Mat backward(const Mat& d_out) { return d_out; }
};

// One EMA step from a batch of vectors and their assignments.
void ema_update(Codebook& book, const Mat& z, std::span<const int> index);

}  // namespace ist
