#include "ist/nn.hpp"

#include "ist/errors.hpp"

#include <cmath>

namespace ist {

void zero_grads(const ParamRefs& params) {
  for (Parameter* p : params) p->zero_grad();
}

Mat tanh_activation(const Mat& x) {
  return (1.0 - 2.0 / ((2.0 * x.array()).exp() + 1.0)).matrix();
}

Linear::Linear(const std::string& name, int in, int out)
    : weight_(name + ".weight", Mat::Zero(in, out)), bias_(name + ".bias", Mat::Zero(1, out)) {
  if (in <= 0 || out <= 0) throw DimensionError("Linear " + name + ": widths must be positive");
}

Mat Linear::forward(const Mat& x) const {
  if (x.cols() != weight_.value.rows()) {
    throw DimensionError(weight_.name + ": input width " + std::to_string(x.cols()) +
                         ", expected " + std::to_string(weight_.value.rows()));
  }
  Mat y = x * weight_.value;
  y.rowwise() += bias_.value.row(0);
  return y;
}

Mat Linear::backward(const Mat& x, const Mat& dy) {
  if (dy.rows() != x.rows() || dy.cols() != weight_.value.cols()) {
    throw DimensionError(weight_.name + ": output gradient shape mismatch");
  }
  weight_.grad.noalias() += x.transpose() * dy;
  bias_.grad += dy.colwise().sum();
  return dy * weight_.value.transpose();
}

void Linear::init(RngStream& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
  for (Eigen::Index r = 0; r < weight_.value.rows(); ++r) {
    for (Eigen::Index c = 0; c < weight_.value.cols(); ++c) {
      weight_.value(r, c) = round_to_storage((2.0 * rng.uniform() - 1.0) * limit);
    }
  }
  bias_.value.setZero();
}

FeedForwardNet::FeedForwardNet(const std::string& name, std::vector<int> widths)
    : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw DimensionError(name + ": need at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    layers_.emplace_back(name + ".l" + std::to_string(i), widths_[i], widths_[i + 1]);
  }
}

std::size_t FeedForwardNet::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    n += static_cast<std::size_t>(widths_[i]) * widths_[i + 1] + widths_[i + 1];
  }
  return n;
}

Mat FeedForwardNet::forward(const Mat& x) const {
  Cache cache;
  return forward(x, cache);
}

Mat FeedForwardNet::forward(const Mat& x, Cache& cache) const {
  cache.inputs.clear();
  cache.inputs.reserve(layers_.size());
  Mat a = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    cache.inputs.push_back(a);
    a = layers_[i].forward(a);
    if (i + 1 < layers_.size()) a = tanh_activation(a);
  }
  cache.output = a;
  return a;
}

Mat FeedForwardNet::backward(const Cache& cache, const Mat& output_grad) {
  if (output_grad.rows() != cache.output.rows() || output_grad.cols() != cache.output.cols()) {
    throw DimensionError("FeedForwardNet::backward: output gradient shape mismatch");
  }
  Mat grad = output_grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    grad = layers_[k].backward(cache.inputs[k], grad);
    if (k > 0) {
      // inputs[k] = tanh(pre-activation of layer k-1)
      const auto& act = cache.inputs[k].array();
      grad = (grad.array() * (1.0 - act * act)).matrix();
    }
  }
  return grad;
}

void FeedForwardNet::init(RngStream& rng) {
  for (auto& layer : layers_) layer.init(rng);
}

void FeedForwardNet::collect(ParamRefs& out) {
  for (auto& layer : layers_) layer.collect(out);
}

}  // namespace ist
