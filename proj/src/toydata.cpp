#include "ist/toydata.hpp"

#include "ist/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace ist {

namespace {

constexpr double kRidgeWidth = 1.5;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }

}  // namespace

void StyleFactors::validate() const {
  if (!within(energy, kEnergyMin, kEnergyMax)) {
    throw ValidationError("energy " + std::to_string(energy) + " outside [0.5, 1.5]");
  }
  if (!within(pitch_level, kPitchMin, kPitchMax)) {
    throw ValidationError("pitch level " + std::to_string(pitch_level) + " outside [8, 24]");
  }
  if (!within(pitch_variation, kVariationMin, kVariationMax)) {
    throw ValidationError("pitch variation " + std::to_string(pitch_variation) + " outside [0, 6]");
  }
  if (content < 0 || content >= kContentIds) {
    throw ValidationError("content id " + std::to_string(content) + " outside 0..7");
  }
}

double content_envelope(int content, int frame) {
  const int harmonic = 1 + content % 3;
  return 0.7 + 0.3 * std::cos(kTwoPi * harmonic * frame / kFrames);
}

double content_phase(int content) { return kTwoPi * content / 8.0; }

ToyMel gen_toy_mel(const StyleFactors& factors) {
  factors.validate();
  ToyMel mel(kBands, kFrames);
  const double phase = content_phase(factors.content);
  for (int l = 0; l < kFrames; ++l) {
    const double centre =
        factors.pitch_level + factors.pitch_variation * std::sin(kTwoPi * l / kFrames + phase);
    const double env = content_envelope(factors.content, l);
    for (int f = 0; f < kBands; ++f) {
      const double d = f - centre;
      mel(f, l) = factors.energy * std::exp(-d * d / (2.0 * kRidgeWidth * kRidgeWidth)) * env;
    }
  }
  return mel;
}

FactorEstimate estimate_factors(const ToyMel& mel) {
  if (mel.rows() < 3 || mel.cols() < 1) throw DimensionError("estimate_factors: matrix too small");
  if (!mel.allFinite()) throw EstimationError("estimate_factors: non-finite matrix");
  if (mel.maxCoeff() <= 0.0) throw EstimationError("estimate_factors: no positive entry");

  std::vector<double> ridge(static_cast<std::size_t>(mel.cols()));
  double peak = 0.0;
  for (Eigen::Index l = 0; l < mel.cols(); ++l) {
    Eigen::Index f = 0;
    const double top = mel.col(l).maxCoeff(&f);
    double pos = static_cast<double>(f);
    double height = top;
    if (f > 0 && f + 1 < mel.rows()) {
      const double a = mel(f - 1, l), c = mel(f + 1, l);
      const bool use_log = a > 1e-12 && top > 1e-12 && c > 1e-12;
      const double ya = use_log ? std::log(a) : a;
      const double yb = use_log ? std::log(top) : top;
      const double yc = use_log ? std::log(c) : c;
      const double curvature = ya - 2.0 * yb + yc;
      if (curvature < 0.0) {
        const double offset = 0.5 * (ya - yc) / curvature;
        pos += offset;
        const double y_peak = yb - 0.25 * (ya - yc) * offset;
        height = use_log ? std::exp(y_peak) : y_peak;
      }
    }
    ridge[static_cast<std::size_t>(l)] = pos;
    peak = std::max(peak, height);
  }

  FactorEstimate est;
  double lo = ridge.front(), hi = ridge.front(), sum = 0.0;
  for (double r : ridge) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    sum += r;
  }
  est.pitch_level = sum / static_cast<double>(ridge.size());
  est.pitch_variation = 0.5 * (hi - lo);
  // Every envelope in the family peaks at 1 (frame 0).
  est.energy = peak;
  return est;
}

Split ToyDataset::split_of(std::size_t i) const {
  const std::size_t n = samples.size();
  if (i < n * 8 / 10) return Split::train;
  if (i < n * 9 / 10) return Split::val;
  return Split::test;
}

std::vector<std::size_t> ToyDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (split_of(i) == split) out.push_back(i);
  }
  return out;
}

ToyDataset make_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw ValidationError("make_dataset: need at least 10 samples");
  ToyDataset ds;
  ds.seed = seed;
  ds.samples.reserve(n);
  RngStream rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    ToySample s;
    s.factors.energy = StyleFactors::kEnergyMin +
                       (StyleFactors::kEnergyMax - StyleFactors::kEnergyMin) * rng.uniform();
    s.factors.pitch_level = StyleFactors::kPitchMin +
                            (StyleFactors::kPitchMax - StyleFactors::kPitchMin) * rng.uniform();
    s.factors.pitch_variation =
        StyleFactors::kVariationMin +
        (StyleFactors::kVariationMax - StyleFactors::kVariationMin) * rng.uniform();
    s.factors.content = static_cast<int>(rng.index(kContentIds));
    s.mel = gen_toy_mel(s.factors);
    s.content_sequence.assign(kFrames, s.factors.content);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace ist
