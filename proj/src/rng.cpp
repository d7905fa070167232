#include "ist/rng.hpp"

#include "ist/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace ist {

double RngStream::uniform() { return std::generate_canonical<double, 64>(engine_); }

double RngStream::normal() {
  // Box-Muller without caching the second variate, so the stream state is
  // exactly the engine state.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RngStream::index(std::size_t n) {
  if (n == 0) throw ValidationError("RngStream::index: empty range");
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

std::string RngStream::serialize() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void RngStream::deserialize(const std::string& text) {
  std::istringstream is(text);
  is >> engine_;
  if (is.fail()) throw IntegrityError("malformed RNG state");
}

Mat gaussian_sample(RngStream& rng, Eigen::Index rows, Eigen::Index cols) {
  Mat out(rows, cols);
  // Row-major fill order keeps the stream layout independent of storage order.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = rng.normal();
  }
  return out;
}

}  // namespace ist
