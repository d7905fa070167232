#pragma once

#include "ist/rng.hpp"
#include "ist/tensor.hpp"

#include <string>
#include <vector>

namespace ist {

// A named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(); }
};

using ParamRefs = std::vector<Parameter*>;

void zero_grads(const ParamRefs& params);

// y = x W + b, one sample per row of x.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out);

  int in_dim() const { return static_cast<int>(weight_.value.rows()); }
  int out_dim() const { return static_cast<int>(weight_.value.cols()); }

  Mat forward(const Mat& x) const;
  // Accumulates dW, db and returns dL/dx.
  Mat backward(const Mat& x, const Mat& dy);

  // Glorot-uniform weights, zero bias.
  void init(RngStream& rng);

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }
  void collect(ParamRefs& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Parameter weight_;
  Parameter bias_;
};

// Elementwise tanh through the vectorized exponential, 1 - 2 / (e^{2x} + 1).
Mat tanh_activation(const Mat& x);

// Fully connected network: tanh on hidden layers, identity on the output.
class FeedForwardNet {
 public:
  struct Cache {
    std::vector<Mat> inputs;  // input to each layer (post-activation of the previous)
    Mat output;
  };

  FeedForwardNet() = default;
  FeedForwardNet(const std::string& name, std::vector<int> widths);

  const std::vector<int>& widths() const { return widths_; }
  int in_dim() const { return widths_.front(); }
  int out_dim() const { return widths_.back(); }
  std::size_t parameter_count() const;

  Mat forward(const Mat& x) const;
  Mat forward(const Mat& x, Cache& cache) const;
  // Gradients of <output, output_grad>: accumulated into the parameters,
  // returned for the input.
  Mat backward(const Cache& cache, const Mat& output_grad);

  void init(RngStream& rng);
  void collect(ParamRefs& out);
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<int> widths_;
  std::vector<Linear> layers_;
};

}  // namespace ist
