#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "lifenet/errors.hpp"
#include "lifenet/tensor.hpp"

namespace lifenet {

struct AdamConfig {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  // Applied outside the square root: theta -= alpha * m_hat / (sqrt(v_hat) + epsilon).
  double epsilon = 1e-7;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t t = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;

  AdamState() = default;

  template <typename Params>
  AdamState(AdamConfig cfg, const Params& params) : config(cfg) {
    for (const Tensor<T>& p : params) {
      m.emplace_back(p.shape());
      v.emplace_back(p.shape());
    }
  }
};

/// One bias-corrected Adam update, in place.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads, AdamState<T>& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw InvalidShape("adam_step: " + std::to_string(params.size()) + " parameters, " +
                       std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) +
                       " moment slots");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != state.m[i].shape())
      throw InvalidShape("adam_step: parameter " + std::to_string(i) + " has shape " +
                         shape_string(params[i]->shape()) + " but gradient has " + shape_string(grads[i]->shape()));
  }

  const auto& c = state.config;
  ++state.t;
  const double t = static_cast<double>(state.t);
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T one_minus_b1 = static_cast<T>(1.0 - c.beta1), one_minus_b2 = static_cast<T>(1.0 - c.beta2);
  const T m_corr = static_cast<T>(1.0 / (1.0 - std::pow(c.beta1, t)));
  const T v_corr = static_cast<T>(1.0 / (1.0 - std::pow(c.beta2, t)));
  const T alpha = static_cast<T>(c.alpha), eps = static_cast<T>(c.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i]->data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + one_minus_b1 * g[j];
      v[j] = b2 * v[j] + one_minus_b2 * g[j] * g[j];
      const T m_hat = m[j] * m_corr;
      const T v_hat = v[j] * v_corr;
      p[j] -= alpha * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

}  // namespace lifenet
