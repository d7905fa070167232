#include "ist/metrics.hpp"

#include "ist/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace ist {

GaussianStats fit_gaussian(const Mat& features) {
  if (features.rows() < 2) throw ValidationError("fit_gaussian: need at least two vectors");
  GaussianStats s;
  s.mean = features.colwise().mean().transpose();
  const Mat centred = features.rowwise() - s.mean.transpose();
  s.cov = centred.transpose() * centred / static_cast<double>(features.rows() - 1);
  return s;
}

namespace {

Mat psd_sqrt(const Mat& m) {
  const Mat sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
  const Vec root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows() ||
      a.cov.rows() != a.mean.size() || b.cov.rows() != b.mean.size()) {
    throw DimensionError("frechet_distance: dimension mismatch");
  }
  const double mean_term = (a.mean - b.mean).squaredNorm();
  // Tr((S_a S_b)^{1/2}) = Tr((S_a^{1/2} S_b S_a^{1/2})^{1/2}), symmetric route.
  const Mat root_a = psd_sqrt(a.cov);
  const Mat inner = root_a * b.cov * root_a;
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double fd = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * cross;
  return std::max(fd, 0.0);
}

Mat mel_cepstra(const ToyMel& mel) {
  const Eigen::Index n = mel.rows();
  Mat basis(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (Eigen::Index i = 0; i < n; ++i) {
      basis(k, i) = scale * std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * n));
    }
  }
  const Mat logmel = (mel.array().max(0.0) + 1e-5).log().matrix();
  return basis * logmel;
}

double mcd(const ToyMel& a, const ToyMel& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("mcd: shape mismatch");
  if (a.rows() <= kCepstralOrder) throw DimensionError("mcd: need more than 13 bands");
  const Mat diff = mel_cepstra(a) - mel_cepstra(b);
  const double k = 10.0 / std::log(10.0);
  double total = 0.0;
  for (Eigen::Index l = 0; l < diff.cols(); ++l) {
    total += k * std::sqrt(2.0 * diff.col(l).segment(1, kCepstralOrder).squaredNorm());
  }
  return total / static_cast<double>(diff.cols());
}

RowVec mel_features(const ToyMel& mel) {
  RowVec out(mel.rows() + 3);
  out.head(mel.rows()) = mel.rowwise().mean().transpose();
  try {
    const FactorEstimate est = estimate_factors(mel);
    out(mel.rows()) = est.energy;
    out(mel.rows() + 1) = est.pitch_level;
    out(mel.rows() + 2) = est.pitch_variation;
  } catch (const EstimationError&) {
    out.tail(3).setZero();
  }
  return out;
}

Mat mel_feature_matrix(std::span<const ToyMel> mels) {
  if (mels.empty()) return Mat();
  Mat out(static_cast<Eigen::Index>(mels.size()), mels.front().rows() + 3);
  for (std::size_t i = 0; i < mels.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = mel_features(mels[i]);
  return out;
}

double toy_fd(std::span<const ToyMel> generated, std::span<const ToyMel> target) {
  return frechet_distance(fit_gaussian(mel_feature_matrix(generated)),
                          fit_gaussian(mel_feature_matrix(target)));
}

double pearson(std::span<const double> x, std::span<const double> y, bool* defined) {
  if (x.size() != y.size()) throw DimensionError("pearson: length mismatch");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  // Relative variance floor: outputs that only differ by round-off count as constant.
  const bool ok = x.size() >= 2 && sxx > 1e-24 * (1.0 + mx * mx) * n &&
                  syy > 1e-24 * (1.0 + my * my) * n;
  if (defined != nullptr) *defined = ok;
  if (!ok) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

int ExclusivityReport::matched_factors(double min_r, double min_exclusivity) const {
  // eligible[f] = dims usable for factor f
  std::array<std::vector<int>, 3> eligible;
  for (const auto& d : dims) {
    if (d.degenerate || d.exclusivity < min_exclusivity) continue;
    const std::array<double, 3> r{d.r_energy, d.r_pitch, d.r_variation};
    for (int f = 0; f < 3; ++f) {
      if (std::abs(r[f]) >= min_r) eligible[f].push_back(d.dim);
    }
  }
  int best = 0;
  // Three factors: try every subset/assignment.
  for (int mask = 1; mask < 8; ++mask) {
    std::vector<int> factors;
    for (int f = 0; f < 3; ++f) {
      if (mask & (1 << f)) factors.push_back(f);
    }
    const int want = static_cast<int>(factors.size());
    if (want <= best) continue;
    std::function<bool(std::size_t, std::vector<int>&)> assign = [&](std::size_t i,
                                                                    std::vector<int>& used) {
      if (i == factors.size()) return true;
      for (int dim : eligible[factors[i]]) {
        if (std::find(used.begin(), used.end(), dim) != used.end()) continue;
        used.push_back(dim);
        if (assign(i + 1, used)) return true;
        used.pop_back();
      }
      return false;
    };
    std::vector<int> used;
    if (assign(0, used)) best = want;
  }
  return best;
}

ExclusivityReport exclusivity_score(const TraversalFn& traverse, std::span<const double> centre,
                                    std::span<const double> spread, int points) {
  if (centre.size() != spread.size()) throw DimensionError("exclusivity_score: centre/spread mismatch");
  if (points < 2) throw ConfigError("exclusivity_score: need at least two traversal points");
  ExclusivityReport report;
  double best_e = -1.0, best_p = -1.0, best_v = -1.0;
  for (std::size_t d = 0; d < centre.size(); ++d) {
    DimExclusivity row;
    row.dim = static_cast<int>(d);
    std::vector<double> values(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
      values[static_cast<std::size_t>(i)] =
          centre[d] + spread[d] * (-2.0 + 4.0 * i / static_cast<double>(points - 1));
    }
    if (!(spread[d] > 0.0)) {
      row.degenerate = true;
      report.dims.push_back(row);
      continue;
    }
    const std::vector<ToyMel> outputs = traverse(row.dim, values);
    std::vector<double> e, p, v;
    bool estimable = outputs.size() == values.size();
    for (const auto& mel : outputs) {
      try {
        const FactorEstimate est = estimate_factors(mel);
        e.push_back(est.energy);
        p.push_back(est.pitch_level);
        v.push_back(est.pitch_variation);
      } catch (const EstimationError&) {
        estimable = false;
        break;
      }
    }
    if (!estimable) {
      row.degenerate = true;
      report.dims.push_back(row);
      continue;
    }
    bool de = false, dp = false, dv = false;
    row.r_energy = pearson(values, e, &de);
    row.r_pitch = pearson(values, p, &dp);
    row.r_variation = pearson(values, v, &dv);
    const double total = std::abs(row.r_energy) + std::abs(row.r_pitch) + std::abs(row.r_variation);
    if (!(de || dp || dv) || total <= 0.0) {
      row.degenerate = true;
    } else {
      row.exclusivity =
          std::max({std::abs(row.r_energy), std::abs(row.r_pitch), std::abs(row.r_variation)}) / total;
      if (std::abs(row.r_energy) > best_e) {
        best_e = std::abs(row.r_energy);
        report.best_energy_dim = row.dim;
      }
      if (std::abs(row.r_pitch) > best_p) {
        best_p = std::abs(row.r_pitch);
        report.best_pitch_dim = row.dim;
      }
      if (std::abs(row.r_variation) > best_v) {
        best_v = std::abs(row.r_variation);
        report.best_variation_dim = row.dim;
      }
    }
    report.dims.push_back(row);
  }
  return report;
}

}  // namespace ist
