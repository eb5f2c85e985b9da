#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "provox/adam.hpp"
#include "provox/model.hpp"
#include "provox/tensor.hpp"

namespace provox {
namespace {

// Single-parameter model: 1x1 conv without bias over a 1x1 image, so the
// model computes y = w * x and every Adam quantity has a hand value.
Model<double> scalar_model(double w0) {
  Model<double> m;
  m.spatial_rank = 2;
  m.in_channels = 1;
  LayerSpec conv{LayerKind::Conv2D, 1, 1, 1, 1, 0};
  conv.has_bias = false;
  m.layers = {conv};
  m.weights = {Tensor<double>({1, 1, 1, 1})};
  m.weights[0].data[0] = w0;
  m.biases = {Tensor<double>{}};
  validate_model(m);
  return m;
}

Gradients<double> scalar_grads(double g) {
  Gradients<double> grads;
  grads.weight_grads = {Tensor<double>({1, 1, 1, 1})};
  grads.weight_grads[0].data[0] = g;
  grads.bias_grads = {Tensor<double>{}};
  return grads;
}

// Hand-computed oracle for the bias-corrected Adam recurrence.
TEST(Adam, StepMatchesHandRecurrence) {
  const AdamConfig cfg{.lr = 0.1, .beta1 = 0.5, .beta2 = 0.9, .eps = 1e-8};
  Model<double> m = scalar_model(1.0);
  AdamState<double> st = make_adam_state(m);

  double w = 1.0, mm = 0.0, vv = 0.0;
  const double grads[3] = {2.0, -1.0, 0.5};
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    adam_step(m, scalar_grads(g), st, cfg);
    mm = 0.5 * mm + 0.5 * g;
    vv = 0.9 * vv + 0.1 * g * g;
    const double mhat = mm / (1.0 - std::pow(0.5, t));
    const double vhat = vv / (1.0 - std::pow(0.9, t));
    w -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    ASSERT_NEAR(m.weights[0].data[0], w, 1e-14) << "step " << t;
    EXPECT_EQ(st.step, t);
  }
}

// First step moves the parameter by almost exactly lr against the gradient
// sign (bias correction makes mhat/sqrt(vhat) = g/|g| up to eps).
TEST(Adam, FirstStepHasUnitScaleFreeMagnitude) {
  const AdamConfig cfg{};  // defaults: lr 2e-4, betas 0.5/0.999
  Model<double> m = scalar_model(0.0);
  AdamState<double> st = make_adam_state(m);
  adam_step(m, scalar_grads(3.7), st, cfg);
  EXPECT_NEAR(m.weights[0].data[0], -cfg.lr, 1e-9);
}

TEST(Adam, ConvergesOnQuadratic) {
  // Minimize (w - 3)^2 with analytic gradient 2 (w - 3).
  const AdamConfig cfg{.lr = 0.05, .beta1 = 0.5, .beta2 = 0.999, .eps = 1e-8};
  Model<double> m = scalar_model(-4.0);
  AdamState<double> st = make_adam_state(m);
  for (int t = 0; t < 2000; ++t) {
    const double w = m.weights[0].data[0];
    adam_step(m, scalar_grads(2.0 * (w - 3.0)), st, cfg);
  }
  EXPECT_NEAR(m.weights[0].data[0], 3.0, 1e-3);
}

TEST(Adam, StateShapesFollowModel) {
  Model<float> m;
  m.spatial_rank = 2;
  m.in_channels = 1;
  LayerSpec nobias{LayerKind::Conv2D, 1, 2, 3, 1, 1};
  nobias.has_bias = false;
  m.layers = {nobias,
              {LayerKind::InstanceNorm, 2, 2},
              {LayerKind::ReLU, 2, 2},
              {LayerKind::Conv2D, 2, 1, 3, 1, 1}};
  init_params(m, 9);
  const AdamState<float> st = make_adam_state(m);
  ASSERT_EQ(st.weight_m.size(), 4u);
  EXPECT_EQ(st.weight_m[0].shape, m.weights[0].shape);
  EXPECT_EQ(st.bias_m[0].numel(), 0u);   // bias-free conv
  EXPECT_EQ(st.weight_m[1].numel(), 0u); // parameter-free layers
  EXPECT_EQ(st.weight_m[2].numel(), 0u);
  EXPECT_EQ(st.bias_m[3].shape, m.biases[3].shape);
  EXPECT_EQ(st.step, 0);
}

TEST(Adam, RejectsMismatchedGradientSize) {
  const AdamConfig cfg{};
  Model<double> m = scalar_model(1.0);
  AdamState<double> st = make_adam_state(m);
  Gradients<double> bad;
  bad.weight_grads = {Tensor<double>({2, 1, 1, 1})};
  bad.bias_grads = {Tensor<double>{}};
  EXPECT_THROW(adam_step(m, bad, st, cfg), std::invalid_argument);
}

}  // namespace
}  // namespace provox
