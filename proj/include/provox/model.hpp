#pragma once

// Sequential differentiable model: an ordered list of layers where
// SkipConcat / ResidualTanhClamp layers may additionally read the output of
// any earlier layer (or the model input). Forward keeps every layer output
// in a ForwardTrace; backward walks the list in reverse, accumulating
// gradients per layer output, per parameter tensor, and for the model input.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "provox/layers.hpp"
#include "provox/rng.hpp"
#include "provox/tensor.hpp"

namespace provox {

template <typename T>
struct Model {
  int spatial_rank = 2;  // 2 or 3
  int in_channels = 0;
  std::vector<LayerSpec> layers;
  // Parallel to `layers`; empty tensors for parameter-free layers.
  std::vector<Tensor<T>> weights;
  std::vector<Tensor<T>> biases;
};

template <typename T>
struct ForwardTrace {
  std::vector<Tensor<T>> acts;  // acts[i] = output of layers[i]
};

template <typename T>
struct Gradients {
  std::vector<Tensor<T>> weight_grads;  // parallel to model.weights
  std::vector<Tensor<T>> bias_grads;
  Tensor<T> input_grad;
};

struct BackwardOptions {
  bool param_grads = true;  // false: input gradient only (critic pass)
};

namespace detail {

inline bool has_params(LayerKind k) {
  return k == LayerKind::Conv2D || k == LayerKind::Conv3D ||
         k == LayerKind::UpsampleConv;
}

inline std::string layer_label(int index, LayerKind kind) {
  return "layer " + std::to_string(index) + " (" + layer_kind_name(kind) + ")";
}

}  // namespace detail

// Output channel count of every layer, validating channel bookkeeping and
// structural invariants along the way.
template <typename T>
std::vector<int> layer_out_channels(const Model<T>& model) {
  if (model.spatial_rank != 2 && model.spatial_rank != 3)
    throw std::invalid_argument("model: spatial_rank must be 2 or 3");
  if (model.in_channels < 1)
    throw std::invalid_argument("model: in_channels must be positive");
  if (model.layers.empty())
    throw std::invalid_argument("model: no layers");

  std::vector<int> out;
  out.reserve(model.layers.size());
  int cur = model.in_channels;
  for (int i = 0; i < static_cast<int>(model.layers.size()); ++i) {
    const LayerSpec& s = model.layers[i];
    const std::string where = detail::layer_label(i, s.kind);
    auto channels_of = [&](int source) {
      if (source == kModelInput) return model.in_channels;
      if (source < 0 || source >= i)
        throw std::invalid_argument(where + ": source must precede layer");
      return out[source];
    };
    switch (s.kind) {
      case LayerKind::Conv2D:
      case LayerKind::Conv3D:
      case LayerKind::UpsampleConv: {
        if (s.kind == LayerKind::Conv2D && model.spatial_rank != 2)
          throw std::invalid_argument(where + ": conv2d in a 3-D model");
        if (s.kind == LayerKind::Conv3D && model.spatial_rank != 3)
          throw std::invalid_argument(where + ": conv3d in a 2-D model");
        if (s.in_channels != cur)
          throw std::invalid_argument(
              where + ": expects " + std::to_string(s.in_channels) +
              " input channels, gets " + std::to_string(cur));
        if (s.out_channels < 1)
          throw std::invalid_argument(where + ": out_channels must be positive");
        if (s.kernel < 1 || s.pad < 0)
          throw std::invalid_argument(where + ": bad kernel/pad");
        if (s.kind == LayerKind::UpsampleConv) {
          if (s.stride != 1 || s.pad != (s.kernel - 1) / 2)
            throw std::invalid_argument(
                where + ": upsample conv must have stride 1, pad (k-1)/2");
        } else if (s.stride != 1 && s.stride != 2) {
          throw std::invalid_argument(where + ": stride must be 1 or 2");
        }
        cur = s.out_channels;
        break;
      }
      case LayerKind::InstanceNorm:
      case LayerKind::ReLU:
      case LayerKind::LeakyReLU:
      case LayerKind::Sigmoid:
      case LayerKind::Tanh:
        break;  // shape preserving
      case LayerKind::SkipConcat:
        cur += channels_of(s.source);
        break;
      case LayerKind::ResidualTanhClamp:
        if (cur != 1)
          throw std::invalid_argument(where + ": head must be 1-channel");
        (void)channels_of(s.source);
        cur = 1;
        break;
    }
    out.push_back(cur);
  }
  return out;
}

// Expected parameter shapes (empty for parameter-free layers).
template <typename T>
void validate_model(const Model<T>& model) {
  layer_out_channels(model);
  if (model.weights.size() != model.layers.size() ||
      model.biases.size() != model.layers.size())
    throw std::invalid_argument("model: parameter arrays out of sync");
  const int k_spatial = model.spatial_rank;
  for (int i = 0; i < static_cast<int>(model.layers.size()); ++i) {
    const LayerSpec& s = model.layers[i];
    const std::string where = detail::layer_label(i, s.kind);
    if (!detail::has_params(s.kind)) {
      if (model.weights[i].numel() != 0 || model.biases[i].numel() != 0)
        throw std::invalid_argument(where + ": unexpected parameters");
      continue;
    }
    std::vector<int> wshape = {s.out_channels, s.in_channels};
    for (int d = 0; d < k_spatial; ++d) wshape.push_back(s.kernel);
    if (model.weights[i].shape != wshape)
      throw std::invalid_argument(where + ": weight shape mismatch");
    if (s.has_bias) {
      if (model.biases[i].shape != std::vector<int>{s.out_channels})
        throw std::invalid_argument(where + ": bias shape mismatch");
    } else if (model.biases[i].numel() != 0) {
      throw std::invalid_argument(where + ": bias on a bias-free conv");
    }
  }
}

// Allocate parameters and apply He-normal init (std = sqrt(2 / fan_in)),
// biases zero, from a single deterministic stream.
template <typename T>
void init_params(Model<T>& model, std::uint64_t seed) {
  model.weights.assign(model.layers.size(), Tensor<T>{});
  model.biases.assign(model.layers.size(), Tensor<T>{});
  Xoshiro256 rng(seed);
  for (int i = 0; i < static_cast<int>(model.layers.size()); ++i) {
    const LayerSpec& s = model.layers[i];
    if (!detail::has_params(s.kind)) continue;
    std::vector<int> wshape = {s.out_channels, s.in_channels};
    std::size_t fan_in = static_cast<std::size_t>(s.in_channels);
    for (int d = 0; d < model.spatial_rank; ++d) {
      wshape.push_back(s.kernel);
      fan_in *= static_cast<std::size_t>(s.kernel);
    }
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor<T> w(wshape);
    for (auto& v : w.data) v = static_cast<T>(rng.normal() * std_dev);
    model.weights[i] = std::move(w);
    if (s.has_bias) model.biases[i] = Tensor<T>({s.out_channels});
  }
  validate_model(model);
}

template <typename T>
ForwardTrace<T> forward_trace(const Model<T>& model, const Tensor<T>& input) {
  if (static_cast<int>(input.shape.size()) != model.spatial_rank + 1)
    throw std::invalid_argument("model forward: input rank mismatch");
  if (input.shape[0] != model.in_channels)
    throw std::invalid_argument("model forward: input channel mismatch");

  ForwardTrace<T> trace;
  trace.acts.reserve(model.layers.size());
  const Tensor<T>* cur = &input;
  auto act_of = [&](int source) -> const Tensor<T>& {
    return source == kModelInput ? input : trace.acts[source];
  };
  for (int i = 0; i < static_cast<int>(model.layers.size()); ++i) {
    const LayerSpec& s = model.layers[i];
    const T* bias =
        model.biases[i].numel() != 0 ? model.biases[i].ptr() : nullptr;
    Tensor<T> y;
    switch (s.kind) {
      case LayerKind::Conv2D:
        y = conv2d_forward(*cur, model.weights[i], bias, s.stride, s.pad);
        break;
      case LayerKind::Conv3D:
        y = conv3d_forward(*cur, model.weights[i], bias, s.stride, s.pad);
        break;
      case LayerKind::UpsampleConv: {
        Tensor<T> up = upsample2_forward(*cur, model.spatial_rank);
        y = model.spatial_rank == 2
                ? conv2d_forward(up, model.weights[i], bias, 1, s.pad)
                : conv3d_forward(up, model.weights[i], bias, 1, s.pad);
        break;
      }
      case LayerKind::InstanceNorm:
        y = instance_norm_forward(*cur);
        break;
      case LayerKind::ReLU:
      case LayerKind::LeakyReLU:
      case LayerKind::Sigmoid:
      case LayerKind::Tanh:
        y = activation_forward(s.kind, *cur, s.slope);
        break;
      case LayerKind::SkipConcat:
        y = concat_channels(*cur, act_of(s.source));
        break;
      case LayerKind::ResidualTanhClamp:
        y = residual_tanh_clamp_forward(*cur, act_of(s.source));
        break;
    }
    trace.acts.push_back(std::move(y));
    cur = &trace.acts.back();
  }
  return trace;
}

template <typename T>
Tensor<T> forward(const Model<T>& model, const Tensor<T>& input) {
  ForwardTrace<T> trace = forward_trace(model, input);
  return std::move(trace.acts.back());
}

template <typename T>
Gradients<T> backward(const Model<T>& model, const Tensor<T>& input,
                      const ForwardTrace<T>& trace, const Tensor<T>& out_grad,
                      const BackwardOptions& opts = {}) {
  const int n = static_cast<int>(model.layers.size());
  if (static_cast<int>(trace.acts.size()) != n)
    throw std::invalid_argument("model backward: trace length mismatch");
  require_same_shape(out_grad, trace.acts.back(), "model backward: out_grad");

  Gradients<T> grads;
  grads.weight_grads.assign(n, Tensor<T>{});
  grads.bias_grads.assign(n, Tensor<T>{});
  if (opts.param_grads) {
    for (int i = 0; i < n; ++i) {
      if (model.weights[i].numel() == 0) continue;
      grads.weight_grads[i] = Tensor<T>(model.weights[i].shape);
      if (model.biases[i].numel() != 0)
        grads.bias_grads[i] = Tensor<T>(model.biases[i].shape);
    }
  }
  grads.input_grad = Tensor<T>(input.shape);

  // Gradient buckets for every layer output.
  std::vector<Tensor<T>> act_grads;
  act_grads.reserve(n);
  for (int i = 0; i < n; ++i) act_grads.emplace_back(trace.acts[i].shape);
  act_grads.back() = out_grad;

  auto grad_of = [&](int source) -> Tensor<T>& {
    return source == kModelInput ? grads.input_grad : act_grads[source];
  };
  auto act_of = [&](int source) -> const Tensor<T>& {
    return source == kModelInput ? input : trace.acts[source];
  };

  for (int i = n - 1; i >= 0; --i) {
    const LayerSpec& s = model.layers[i];
    const Tensor<T>& x = i == 0 ? input : trace.acts[i - 1];
    Tensor<T>& gx = i == 0 ? grads.input_grad : act_grads[i - 1];
    const Tensor<T>& gy = act_grads[i];
    Tensor<T>* gw = opts.param_grads && model.weights[i].numel() != 0
                        ? &grads.weight_grads[i]
                        : nullptr;
    Tensor<T>* gb =
        gw && model.biases[i].numel() != 0 ? &grads.bias_grads[i] : nullptr;
    switch (s.kind) {
      case LayerKind::Conv2D:
        conv2d_backward(x, model.weights[i], gy, s.stride, s.pad, &gx, gw, gb);
        break;
      case LayerKind::Conv3D:
        conv3d_backward(x, model.weights[i], gy, s.stride, s.pad, &gx, gw, gb);
        break;
      case LayerKind::UpsampleConv: {
        Tensor<T> up = upsample2_forward(x, model.spatial_rank);
        Tensor<T> gup(up.shape);
        if (model.spatial_rank == 2)
          conv2d_backward(up, model.weights[i], gy, 1, s.pad, &gup, gw, gb);
        else
          conv3d_backward(up, model.weights[i], gy, 1, s.pad, &gup, gw, gb);
        upsample2_backward(gup, model.spatial_rank, gx);
        break;
      }
      case LayerKind::InstanceNorm:
        instance_norm_backward(x, gy, gx);
        break;
      case LayerKind::ReLU:
      case LayerKind::LeakyReLU:
      case LayerKind::Sigmoid:
      case LayerKind::Tanh:
        activation_backward(s.kind, x, trace.acts[i], gy, s.slope, gx);
        break;
      case LayerKind::SkipConcat: {
        // First x.shape[0] channels flow to the previous layer, the rest to
        // the skip source.
        const std::size_t plane =
            gy.numel() / static_cast<std::size_t>(gy.shape[0]);
        const std::size_t split =
            static_cast<std::size_t>(x.shape[0]) * plane;
        for (std::size_t j = 0; j < split; ++j) gx.data[j] += gy.data[j];
        Tensor<T>& gsrc = grad_of(s.source);
        for (std::size_t j = split; j < gy.numel(); ++j)
          gsrc.data[j - split] += gy.data[j];
        break;
      }
      case LayerKind::ResidualTanhClamp:
        residual_tanh_clamp_backward(x, act_of(s.source), gy, gx,
                                     grad_of(s.source));
        break;
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Diagnostics

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (const T& v : t.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

// Index of the first layer whose output contains a non-finite value.
template <typename T>
std::optional<int> first_nonfinite_layer(const ForwardTrace<T>& trace) {
  for (int i = 0; i < static_cast<int>(trace.acts.size()); ++i)
    if (!all_finite(trace.acts[i])) return i;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check (double precision). The loss callback
// maps the model output to a scalar and the gradient of that scalar with
// respect to the output.

struct LossEval {
  double value = 0.0;
  Tensor<double> grad;
};

struct FdReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

inline double fd_rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

inline FdReport finite_diff_check(
    Model<double>& model, const Tensor<double>& input,
    const std::function<LossEval(const Tensor<double>&)>& loss,
    std::size_t max_probes_per_tensor = 8, double eps = 1e-5,
    bool check_input = false) {
  auto eval = [&]() {
    Tensor<double> out = forward(model, input);
    return loss(out).value;
  };
  FdReport report;
  ForwardTrace<double> trace = forward_trace(model, input);
  LossEval at_center = loss(trace.acts.back());
  Gradients<double> grads = backward(model, input, trace, at_center.grad);

  auto probe_tensor = [&](Tensor<double>& values, const Tensor<double>& analytic) {
    if (values.numel() == 0) return;
    const std::size_t step =
        std::max<std::size_t>(1, values.numel() / max_probes_per_tensor);
    for (std::size_t j = 0; j < values.numel(); j += step) {
      const double saved = values.data[j];
      values.data[j] = saved + eps;
      const double up = eval();
      values.data[j] = saved - eps;
      const double down = eval();
      values.data[j] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      report.max_rel_err =
          std::max(report.max_rel_err, fd_rel_err(analytic.data[j], numeric));
      ++report.checked;
    }
  };

  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    probe_tensor(model.weights[i], grads.weight_grads[i]);
    probe_tensor(model.biases[i], grads.bias_grads[i]);
  }
  if (check_input) {
    Tensor<double> in_copy = input;
    auto eval_input = [&]() {
      Tensor<double> out = forward(model, in_copy);
      return loss(out).value;
    };
    const std::size_t step =
        std::max<std::size_t>(1, in_copy.numel() / max_probes_per_tensor);
    for (std::size_t j = 0; j < in_copy.numel(); j += step) {
      const double saved = in_copy.data[j];
      in_copy.data[j] = saved + eps;
      const double up = eval_input();
      in_copy.data[j] = saved - eps;
      const double down = eval_input();
      in_copy.data[j] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      report.max_rel_err = std::max(
          report.max_rel_err, fd_rel_err(grads.input_grad.data[j], numeric));
      ++report.checked;
    }
  }
  return report;
}

}  // namespace provox
