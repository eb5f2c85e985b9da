#pragma once

// Conditional GAN building blocks shared by every pipeline stage and
// baseline: U-Net generator and patch discriminator constructors, the
// least-squares adversarial + L1 pixel losses, and the alternating
// D-step/G-step training loop over slice pairs.
//
// Objectives (pix2pix convention):
//   generator:      1/2 * mean((D(cond, fake) - 1)^2) + lambda_pix * mean|fake - target|
//   discriminator:  1/2 * mean((D(cond, real) - 1)^2) + 1/2 * mean(D(cond, fake)^2)

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "provox/adam.hpp"
#include "provox/model.hpp"
#include "provox/rng.hpp"
#include "provox/tensor.hpp"

namespace provox {

struct GeneratorConfig {
  int in_channels = 2;
  int out_channels = 1;
  int base_channels = 16;
  int depth = 3;
  bool residual_mode = false;  // output = clamp(input ch0 + 0.5*tanh(head))
  int spatial_rank = 2;        // 3 for the volumetric baseline
};

struct DiscriminatorConfig {
  int in_channels = 3;  // condition channels + 1 candidate channel
  int layers = 3;       // stride-2 conv blocks before the patch head
  int base_channels = 16;
  int spatial_rank = 2;
};

struct StageTrainConfig {
  int epochs = 1;
  int batch_size = 4;
  double lambda_pix = 100.0;
  AdamConfig adam;  // defaults: lr 2e-4, beta1 0.5, beta2 0.999
  std::uint64_t rng_seed = 0;
};

enum class LossSpec { PixelL1, AdvGenerator, AdvDiscriminator, AdvPlusPixel };

inline void validate_generator_config(const GeneratorConfig& cfg) {
  if (cfg.base_channels < 4)
    throw std::invalid_argument("generator config: base_channels must be >= 4");
  if (cfg.depth < 1)
    throw std::invalid_argument("generator config: depth must be >= 1");
  if (cfg.in_channels < 1 || cfg.out_channels < 1)
    throw std::invalid_argument("generator config: channels must be positive");
  // Residual mode adds the head onto input channel 0, so the output is a
  // single channel and the input must carry at least that base channel.
  // (Extra input channels are allowed: refinement stages may optionally see
  // the source contrasts alongside the volume being refined.)
  if (cfg.residual_mode && cfg.out_channels != 1)
    throw std::invalid_argument(
        "generator config: residual mode needs a single output channel");
  if (cfg.residual_mode && cfg.in_channels < cfg.out_channels)
    throw std::invalid_argument(
        "generator config: residual mode needs the refined channel present "
        "in the input");
  if (cfg.spatial_rank != 2 && cfg.spatial_rank != 3)
    throw std::invalid_argument("generator config: spatial_rank must be 2 or 3");
}

inline void validate_discriminator_config(const DiscriminatorConfig& cfg) {
  if (cfg.in_channels < 2)
    throw std::invalid_argument(
        "discriminator config: needs condition + candidate channels");
  if (cfg.layers < 1)
    throw std::invalid_argument("discriminator config: layers must be >= 1");
  if (cfg.base_channels < 4)
    throw std::invalid_argument(
        "discriminator config: base_channels must be >= 4");
  if (cfg.spatial_rank != 2 && cfg.spatial_rank != 3)
    throw std::invalid_argument(
        "discriminator config: spatial_rank must be 2 or 3");
}

// U-Net generator: stride-2 conv encoder, nearest-up + conv decoder with
// skip concatenations, sigmoid head — or, in residual mode, a zero-
// initialized head feeding clamp_[0,1](input + 0.5*tanh(head)) so a fresh
// refinement generator is an exact identity. Spatial extents must be
// divisible by 2^depth.
template <typename T>
Model<T> build_generator(const GeneratorConfig& cfg, std::uint64_t seed) {
  validate_generator_config(cfg);
  const LayerKind conv =
      cfg.spatial_rank == 2 ? LayerKind::Conv2D : LayerKind::Conv3D;
  auto level_ch = [&](int level) { return cfg.base_channels << (level - 1); };

  Model<T> m;
  m.spatial_rank = cfg.spatial_rank;
  m.in_channels = cfg.in_channels;

  std::vector<int> skip_at(cfg.depth + 1, kModelInput);  // per encoder level
  int cur = cfg.in_channels;
  for (int level = 1; level <= cfg.depth; ++level) {
    const bool norm = level > 1;  // first block keeps raw intensities
    m.layers.push_back({conv, cur, level_ch(level), 3, 2, 1, 0.2, kModelInput,
                        /*has_bias=*/!norm});
    if (norm) m.layers.push_back({LayerKind::InstanceNorm});
    m.layers.push_back({LayerKind::LeakyReLU, 0, 0, 3, 1, 1, 0.2});
    skip_at[level] = static_cast<int>(m.layers.size()) - 1;
    cur = level_ch(level);
  }
  for (int level = cfg.depth - 1; level >= 1; --level) {
    m.layers.push_back({LayerKind::UpsampleConv, cur, level_ch(level), 3, 1, 1,
                        0.2, kModelInput, /*has_bias=*/false});
    m.layers.push_back({LayerKind::InstanceNorm});
    m.layers.push_back({LayerKind::ReLU});
    m.layers.push_back(
        {LayerKind::SkipConcat, 0, 0, 3, 1, 1, 0.2, skip_at[level]});
    cur = 2 * level_ch(level);
  }
  m.layers.push_back(
      {LayerKind::UpsampleConv, cur, cfg.base_channels, 3, 1, 1});
  m.layers.push_back({LayerKind::ReLU});
  m.layers.push_back({LayerKind::SkipConcat, 0, 0, 3, 1, 1, 0.2, kModelInput});
  cur = cfg.base_channels + cfg.in_channels;
  m.layers.push_back({conv, cur, cfg.out_channels, 3, 1, 1});
  const std::size_t head = m.layers.size() - 1;
  if (cfg.residual_mode)
    m.layers.push_back(
        {LayerKind::ResidualTanhClamp, 0, 0, 3, 1, 1, 0.2, kModelInput});
  else
    m.layers.push_back({LayerKind::Sigmoid});

  init_params(m, seed);
  if (cfg.residual_mode) {
    // Identity start: the tanh head contributes exactly nothing.
    for (auto& v : m.weights[head].data) v = T(0);
    for (auto& v : m.biases[head].data) v = T(0);
  }
  return m;
}

// Conditional patch discriminator over concatenated (condition, candidate)
// channels: `layers` stride-2 conv blocks, then a stride-1 head producing a
// raw patch score map.
template <typename T>
Model<T> build_discriminator(const DiscriminatorConfig& cfg,
                             std::uint64_t seed) {
  validate_discriminator_config(cfg);
  const LayerKind conv =
      cfg.spatial_rank == 2 ? LayerKind::Conv2D : LayerKind::Conv3D;
  Model<T> m;
  m.spatial_rank = cfg.spatial_rank;
  m.in_channels = cfg.in_channels;
  int cur = cfg.in_channels;
  for (int level = 1; level <= cfg.layers; ++level) {
    const int out_ch = cfg.base_channels << (level - 1);
    const bool norm = level > 1;
    m.layers.push_back(
        {conv, cur, out_ch, 3, 2, 1, 0.2, kModelInput, /*has_bias=*/!norm});
    if (norm) m.layers.push_back({LayerKind::InstanceNorm});
    m.layers.push_back({LayerKind::LeakyReLU, 0, 0, 3, 1, 1, 0.2});
    cur = out_ch;
  }
  m.layers.push_back({conv, cur, 1, 3, 1, 1});
  init_params(m, seed);
  return m;
}

// ---------------------------------------------------------------------------
// Losses

template <typename T>
double tensor_mean_sq_err_to(const Tensor<T>& t, double center) {
  double acc = 0.0;
  for (const T& v : t.data) {
    const double d = static_cast<double>(v) - center;
    acc += d * d;
  }
  return acc / static_cast<double>(t.numel());
}

template <typename T>
double tensor_mean_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mean abs diff");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    acc += std::abs(static_cast<double>(a.data[i]) -
                    static_cast<double>(b.data[i]));
  return acc / static_cast<double>(a.numel());
}

template <typename T>
double generator_loss(const Tensor<T>& d_fake, const Tensor<T>& fake,
                      const Tensor<T>& target, double lambda_pix) {
  if (!(lambda_pix >= 0.0) || !std::isfinite(lambda_pix))
    throw std::invalid_argument("generator loss: lambda_pix must be finite, >= 0");
  return 0.5 * tensor_mean_sq_err_to(d_fake, 1.0) +
         lambda_pix * tensor_mean_abs_diff(fake, target);
}

template <typename T>
double discriminator_loss(const Tensor<T>& d_real, const Tensor<T>& d_fake) {
  require_same_shape(d_real, d_fake, "discriminator loss");
  return 0.5 * tensor_mean_sq_err_to(d_real, 1.0) +
         0.5 * tensor_mean_sq_err_to(d_fake, 0.0);
}

// Loss evaluator (value + gradient w.r.t. the generator output) for the
// gradient checker: the composite LSGAN + L1 objective, with the adversarial
// gradient obtained by differentiating through the frozen discriminator.
inline std::function<LossEval(const Tensor<double>&)> composite_loss_eval(
    const Model<double>& critic, Tensor<double> condition,
    Tensor<double> target, double lambda_pix) {
  return [critic, condition = std::move(condition), target = std::move(target),
          lambda_pix](const Tensor<double>& fake) {
    Tensor<double> din = concat_channels(condition, fake);
    ForwardTrace<double> trace = forward_trace(critic, din);
    const Tensor<double>& d_fake = trace.acts.back();

    LossEval e;
    e.value = generator_loss(d_fake, fake, target, lambda_pix);

    Tensor<double> gd(d_fake.shape);
    const double inv_n = 1.0 / static_cast<double>(d_fake.numel());
    for (std::size_t i = 0; i < d_fake.numel(); ++i)
      gd.data[i] = (d_fake.data[i] - 1.0) * inv_n;
    BackwardOptions opts;
    opts.param_grads = false;
    Gradients<double> grads = backward(critic, din, trace, gd, opts);

    e.grad = Tensor<double>(fake.shape);
    const std::size_t cand_offset =
        static_cast<std::size_t>(condition.shape[0]) *
        (fake.numel() / static_cast<std::size_t>(fake.shape[0]));
    const double inv_m = 1.0 / static_cast<double>(fake.numel());
    for (std::size_t i = 0; i < fake.numel(); ++i) {
      const double diff = fake.data[i] - target.data[i];
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      e.grad.data[i] = grads.input_grad.data[cand_offset + i] +
                       lambda_pix * sign * inv_m;
    }
    return e;
  };
}

// ---------------------------------------------------------------------------
// Stage training

template <typename T>
struct SlicePairT {
  Tensor<T> condition;  // {C, h, w}
  Tensor<T> target;     // {1, h, w}
};
using SlicePair = SlicePairT<float>;

struct EpochRecord {
  double mean_l1 = 0.0;    // pixel term, unweighted
  double mean_adv = 0.0;   // generator-side adversarial term
  double mean_disc = 0.0;  // discriminator loss
};

struct StageHistory {
  std::vector<EpochRecord> epochs;
};

template <typename T>
struct StageResult {
  Model<T> generator;
  Model<T> discriminator;
  StageHistory history;
};

namespace detail {

template <typename T>
void accumulate_gradients(Gradients<T>& total, const Gradients<T>& delta) {
  for (std::size_t i = 0; i < total.weight_grads.size(); ++i) {
    for (std::size_t j = 0; j < total.weight_grads[i].numel(); ++j)
      total.weight_grads[i].data[j] += delta.weight_grads[i].data[j];
    for (std::size_t j = 0; j < total.bias_grads[i].numel(); ++j)
      total.bias_grads[i].data[j] += delta.bias_grads[i].data[j];
  }
}

template <typename T>
Gradients<T> zero_param_gradients(const Model<T>& m) {
  Gradients<T> g;
  g.weight_grads.reserve(m.layers.size());
  g.bias_grads.reserve(m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    g.weight_grads.emplace_back(m.weights[i].numel() != 0
                                    ? Tensor<T>(m.weights[i].shape)
                                    : Tensor<T>{});
    g.bias_grads.emplace_back(m.biases[i].numel() != 0
                                  ? Tensor<T>(m.biases[i].shape)
                                  : Tensor<T>{});
  }
  return g;
}

template <typename T>
[[noreturn]] void throw_nonfinite(const char* what, const Model<T>& m,
                                  const ForwardTrace<T>& trace, int epoch,
                                  std::size_t batch) {
  std::string msg = std::string("non-finite ") + what + " at epoch " +
                    std::to_string(epoch) + ", batch " + std::to_string(batch);
  if (auto layer = first_nonfinite_layer(trace))
    msg += "; first non-finite output at " +
           layer_label(*layer, m.layers[*layer].kind);
  throw std::runtime_error(msg);
}

}  // namespace detail

// Alternating conditional-GAN training over slice pairs: per batch, one
// discriminator Adam step (real + fake passes), then one generator Adam step
// through the updated discriminator. Deterministic for a fixed seed.
template <typename T>
StageResult<T> train_stage(const std::vector<SlicePairT<T>>& pairs,
                           const StageTrainConfig& cfg,
                           const GeneratorConfig& gcfg,
                           const DiscriminatorConfig& dcfg) {
  if (pairs.empty()) throw std::invalid_argument("train_stage: empty dataset");
  if (cfg.epochs < 1)
    throw std::invalid_argument("train_stage: epochs must be >= 1");
  if (cfg.batch_size < 1)
    throw std::invalid_argument("train_stage: batch_size must be >= 1");
  if (!(cfg.lambda_pix >= 0.0) || !std::isfinite(cfg.lambda_pix))
    throw std::invalid_argument("train_stage: lambda_pix must be finite, >= 0");
  if (pairs.front().condition.shape[0] != gcfg.in_channels)
    throw std::invalid_argument(
        "train_stage: condition channels do not match generator config");
  if (dcfg.in_channels != gcfg.in_channels + gcfg.out_channels)
    throw std::invalid_argument(
        "train_stage: discriminator channels must cover condition + candidate");
  for (const auto& p : pairs) {
    require_same_shape(p.condition, pairs.front().condition,
                       "train_stage: condition");
    require_same_shape(p.target, pairs.front().target, "train_stage: target");
  }

  StageResult<T> result;
  result.generator = build_generator<T>(gcfg, derive_seed(cfg.rng_seed, 1));
  result.discriminator =
      build_discriminator<T>(dcfg, derive_seed(cfg.rng_seed, 2));
  Model<T>& gen = result.generator;
  Model<T>& critic = result.discriminator;
  AdamState<T> gen_state = make_adam_state(gen);
  AdamState<T> critic_state = make_adam_state(critic);
  Xoshiro256 shuffle_rng(derive_seed(cfg.rng_seed, 3));

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::size_t cond_plane =
      pairs.front().target.numel();  // one channel's worth of pixels
  BackwardOptions input_only;
  input_only.param_grads = false;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochRecord rec;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      const std::size_t batch_index =
          start / static_cast<std::size_t>(cfg.batch_size);

      // Generator forwards, reused by both phases of this batch.
      std::vector<ForwardTrace<T>> gen_traces;
      gen_traces.reserve(stop - start);
      for (std::size_t b = start; b < stop; ++b)
        gen_traces.push_back(
            forward_trace(gen, pairs[order[b]].condition));

      // --- Discriminator step ---
      Gradients<T> critic_grads = detail::zero_param_gradients(critic);
      double batch_disc = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const SlicePairT<T>& pair = pairs[order[b]];
        const Tensor<T>& fake = gen_traces[b - start].acts.back();
        Tensor<T> din_real = concat_channels(pair.condition, pair.target);
        Tensor<T> din_fake = concat_channels(pair.condition, fake);
        ForwardTrace<T> tr_real = forward_trace(critic, din_real);
        ForwardTrace<T> tr_fake = forward_trace(critic, din_fake);
        const Tensor<T>& d_real = tr_real.acts.back();
        const Tensor<T>& d_fake = tr_fake.acts.back();
        const double sample_loss = discriminator_loss(d_real, d_fake);
        if (!std::isfinite(sample_loss))
          detail::throw_nonfinite("discriminator loss", critic, tr_fake, epoch,
                                  batch_index);
        batch_disc += sample_loss * inv_batch;

        const double inv_n =
            inv_batch / static_cast<double>(d_real.numel());
        Tensor<T> g_real(d_real.shape);
        Tensor<T> g_fake(d_fake.shape);
        for (std::size_t i = 0; i < d_real.numel(); ++i) {
          g_real.data[i] = static_cast<T>(
              (static_cast<double>(d_real.data[i]) - 1.0) * inv_n);
          g_fake.data[i] =
              static_cast<T>(static_cast<double>(d_fake.data[i]) * inv_n);
        }
        detail::accumulate_gradients(
            critic_grads, backward(critic, din_real, tr_real, g_real));
        detail::accumulate_gradients(
            critic_grads, backward(critic, din_fake, tr_fake, g_fake));
      }
      adam_step(critic, critic_grads, critic_state, cfg.adam);

      // --- Generator step (through the updated discriminator) ---
      Gradients<T> gen_grads = detail::zero_param_gradients(gen);
      double batch_adv = 0.0, batch_l1 = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const SlicePairT<T>& pair = pairs[order[b]];
        const ForwardTrace<T>& gtrace = gen_traces[b - start];
        const Tensor<T>& fake = gtrace.acts.back();
        Tensor<T> din = concat_channels(pair.condition, fake);
        ForwardTrace<T> dtrace = forward_trace(critic, din);
        const Tensor<T>& d_fake = dtrace.acts.back();

        const double l1 = tensor_mean_abs_diff(fake, pair.target);
        const double adv = 0.5 * tensor_mean_sq_err_to(d_fake, 1.0);
        if (!std::isfinite(adv + cfg.lambda_pix * l1))
          detail::throw_nonfinite("generator loss", gen, gtrace, epoch,
                                  batch_index);
        batch_l1 += l1 * inv_batch;
        batch_adv += adv * inv_batch;

        Tensor<T> gd(d_fake.shape);
        const double inv_n = inv_batch / static_cast<double>(d_fake.numel());
        for (std::size_t i = 0; i < d_fake.numel(); ++i)
          gd.data[i] = static_cast<T>(
              (static_cast<double>(d_fake.data[i]) - 1.0) * inv_n);
        Gradients<T> through_critic =
            backward(critic, din, dtrace, gd, input_only);

        Tensor<T> g_fake(fake.shape);
        const std::size_t cand_offset =
            static_cast<std::size_t>(pair.condition.shape[0]) * cond_plane;
        const double pix_scale =
            cfg.lambda_pix * inv_batch / static_cast<double>(fake.numel());
        for (std::size_t i = 0; i < fake.numel(); ++i) {
          const double diff = static_cast<double>(fake.data[i]) -
                              static_cast<double>(pair.target.data[i]);
          const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          g_fake.data[i] = static_cast<T>(
              static_cast<double>(
                  through_critic.input_grad.data[cand_offset + i]) +
              sign * pix_scale);
        }
        detail::accumulate_gradients(
            gen_grads, backward(gen, pair.condition, gtrace, g_fake));
      }
      adam_step(gen, gen_grads, gen_state, cfg.adam);

      const double weight =
          static_cast<double>(stop - start) / static_cast<double>(order.size());
      rec.mean_l1 += batch_l1 * weight;
      rec.mean_adv += batch_adv * weight;
      rec.mean_disc += batch_disc * weight;
    }
    result.history.epochs.push_back(rec);
  }
  return result;
}

}  // namespace provox
