#include "ist/adam.hpp"

#include "ist/errors.hpp"

#include <cmath>

namespace ist {

void AdamState::round_to_storage() {
  for (auto& [name, mat] : m) ist::round_to_storage(mat);
  for (auto& [name, mat] : v) ist::round_to_storage(mat);
}

void adam_step(AdamState& state, const ParamRefs& params) {
  for (const Parameter* p : params) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) {
      throw DimensionError("adam_step: gradient shape mismatch for " + p->name);
    }
    if (!p->grad.allFinite()) throw NumericError("adam_step: non-finite gradient for " + p->name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (Parameter* p : params) {
    auto [mit, m_new] = state.m.try_emplace(p->name, Mat::Zero(p->value.rows(), p->value.cols()));
    auto [vit, v_new] = state.v.try_emplace(p->name, Mat::Zero(p->value.rows(), p->value.cols()));
    Mat& m = mit->second;
    Mat& v = vit->second;
    m = state.beta1 * m + (1.0 - state.beta1) * p->grad;
    v = state.beta2 * v + (1.0 - state.beta2) * p->grad.cwiseProduct(p->grad);
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    p->value.array() -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
  }
}

}  // namespace ist
