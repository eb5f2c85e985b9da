#pragma once

// Adam optimizer over a model's parameter tensors. State tensors are kept
// parallel to the model's weight/bias arrays; update arithmetic runs in
// double and is applied elementwise in a fixed order for determinism.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "provox/model.hpp"
#include "provox/tensor.hpp"

namespace provox {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> weight_m, weight_v, bias_m, bias_v;
  std::int64_t step = 0;
};

template <typename T>
AdamState<T> make_adam_state(const Model<T>& model) {
  AdamState<T> st;
  const std::size_t n = model.layers.size();
  st.weight_m.reserve(n);
  st.weight_v.reserve(n);
  st.bias_m.reserve(n);
  st.bias_v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (model.weights[i].numel() == 0) {
      st.weight_m.emplace_back();
      st.weight_v.emplace_back();
    } else {
      st.weight_m.emplace_back(model.weights[i].shape);
      st.weight_v.emplace_back(model.weights[i].shape);
    }
    if (model.biases[i].numel() == 0) {
      st.bias_m.emplace_back();
      st.bias_v.emplace_back();
    } else {
      st.bias_m.emplace_back(model.biases[i].shape);
      st.bias_v.emplace_back(model.biases[i].shape);
    }
  }
  return st;
}

namespace detail {

template <typename T>
void adam_update_tensor(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& m,
                        Tensor<T>& v, const AdamConfig& cfg, double bc1,
                        double bc2) {
  if (grad.numel() != param.numel())
    throw std::invalid_argument("adam: gradient/parameter size mismatch");
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double g = static_cast<double>(grad.data[i]);
    const double mi =
        cfg.beta1 * static_cast<double>(m.data[i]) + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * static_cast<double>(v.data[i]) +
                      (1.0 - cfg.beta2) * g * g;
    m.data[i] = static_cast<T>(mi);
    v.data[i] = static_cast<T>(vi);
    const double mhat = mi / bc1;
    const double vhat = vi / bc2;
    param.data[i] = static_cast<T>(static_cast<double>(param.data[i]) -
                                   cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
  }
}

}  // namespace detail

// One Adam step over every parameter tensor of the model, consuming the
// gradients produced by backward().
template <typename T>
void adam_step(Model<T>& model, const Gradients<T>& grads, AdamState<T>& st,
               const AdamConfig& cfg) {
  ++st.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (model.weights[i].numel() != 0)
      detail::adam_update_tensor(model.weights[i], grads.weight_grads[i],
                                 st.weight_m[i], st.weight_v[i], cfg, bc1,
                                 bc2);
    if (model.biases[i].numel() != 0)
      detail::adam_update_tensor(model.biases[i], grads.bias_grads[i],
                                 st.bias_m[i], st.bias_v[i], cfg, bc1, bc2);
  }
}

}  // namespace provox
