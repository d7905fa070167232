#pragma once

#include "ist/tensor.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace ist {

// Seeded random stream. Identical seeds give identical sequences within one
// build; the engine state can be exported as text for checkpointing.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform();  // [0, 1)
  double normal();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  std::uint64_t next_u64() { return engine_(); }

  std::string serialize() const;
  void deserialize(const std::string& text);

  bool operator==(const RngStream& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

// i.i.d. standard normal entries.
Mat gaussian_sample(RngStream& rng, Eigen::Index rows, Eigen::Index cols);

}  // namespace ist
