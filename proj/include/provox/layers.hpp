#pragma once

// Layer set and forward/backward kernels for the generators and
// discriminators. 2-D maps are {C, H, W}, 3-D maps are {C, D, H, W}.
//
// Shape rules:
//   Conv2D / Conv3D: out extent = (in + 2*pad - kernel) / stride + 1
//   UpsampleConv: nearest-neighbor x2 upsample, then a stride-1 conv with
//     pad = (kernel-1)/2, so the output extent is exactly 2x the input.
//
// Backward kernels accumulate into caller-provided (zero-initialized or
// partially filled) gradient tensors; any of the gradient outputs may be
// null to skip its computation.

#include <cmath>
#include <stdexcept>
#include <string>

#include "provox/tensor.hpp"

namespace provox {

enum class LayerKind {
  Conv2D,
  UpsampleConv,  // nearest x2 + stride-1 conv; rank follows the model
  Conv3D,
  InstanceNorm,
  ReLU,
  LeakyReLU,
  Sigmoid,
  Tanh,
  SkipConcat,        // concat(current, activation of `source`) on channels
  ResidualTanhClamp, // clamp_[0,1](source channel 0 + 0.5*tanh(head))
};

// `source` value that refers to the model input rather than a layer output.
constexpr int kModelInput = -1;

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  double slope = 0.2;      // LeakyReLU only
  int source = kModelInput;  // SkipConcat / ResidualTanhClamp only
  // Convs feeding InstanceNorm carry no bias: the norm cancels any channel
  // shift exactly, leaving a parameter with identically zero gradient.
  bool has_bias = true;
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::UpsampleConv: return "upsample_conv";
    case LayerKind::Conv3D: return "conv3d";
    case LayerKind::InstanceNorm: return "instance_norm";
    case LayerKind::ReLU: return "relu";
    case LayerKind::LeakyReLU: return "leaky_relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::SkipConcat: return "skip_concat";
    case LayerKind::ResidualTanhClamp: return "residual_tanh_clamp";
  }
  throw std::invalid_argument("layer kind: invalid value");
}

inline int conv_out_extent(int in, int kernel, int stride, int pad) {
  const int num = in + 2 * pad - kernel;
  if (num < 0) throw std::invalid_argument("conv: kernel larger than input");
  return num / stride + 1;
}

namespace detail {

inline int div_ceil(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }
inline int div_floor(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Valid output range [lo, hi] such that 0 <= o*stride + k - pad < extent.
inline void tap_range(int extent, int out_extent, int stride, int pad, int k,
                      int& lo, int& hi) {
  lo = div_ceil(pad - k, stride);
  hi = div_floor(extent - 1 + pad - k, stride);
  if (lo < 0) lo = 0;
  if (hi > out_extent - 1) hi = out_extent - 1;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Conv2D

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& in, const Tensor<T>& w,
                         const T* b, int stride, int pad) {
  const int ic = in.shape[0], h = in.shape[1], wd = in.shape[2];
  const int oc = w.shape[0], k = w.shape[2];
  if (w.shape[1] != ic)
    throw std::invalid_argument("conv2d: weight/input channel mismatch");
  const int oh = conv_out_extent(h, k, stride, pad);
  const int ow = conv_out_extent(wd, k, stride, pad);
  Tensor<T> out({oc, oh, ow});

  for (int o = 0; o < oc; ++o) {
    T* omap = out.ptr() + static_cast<std::size_t>(o) * oh * ow;
    const T bias = b ? b[o] : T(0);
    for (int i = 0; i < static_cast<int>(oh) * ow; ++i) omap[i] = bias;
    for (int c = 0; c < ic; ++c) {
      const T* imap = in.ptr() + static_cast<std::size_t>(c) * h * wd;
      const T* wmap = w.ptr() + ((static_cast<std::size_t>(o) * ic + c) * k) * k;
      for (int kh = 0; kh < k; ++kh) {
        int rlo, rhi;
        detail::tap_range(h, oh, stride, pad, kh, rlo, rhi);
        for (int kw = 0; kw < k; ++kw) {
          const T wv = wmap[kh * k + kw];
          int clo, chi;
          detail::tap_range(wd, ow, stride, pad, kw, clo, chi);
          for (int r = rlo; r <= rhi; ++r) {
            T* orow = omap + static_cast<std::size_t>(r) * ow;
            const T* irow =
                imap + static_cast<std::size_t>(r * stride + kh - pad) * wd +
                (kw - pad);
            if (stride == 1) {
              for (int cc = clo; cc <= chi; ++cc) orow[cc] += wv * irow[cc];
            } else {
              for (int cc = clo; cc <= chi; ++cc)
                orow[cc] += wv * irow[cc * stride];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void conv2d_backward(const Tensor<T>& in, const Tensor<T>& w,
                     const Tensor<T>& gout, int stride, int pad,
                     Tensor<T>* gin, Tensor<T>* gw, Tensor<T>* gb) {
  const int ic = in.shape[0], h = in.shape[1], wd = in.shape[2];
  const int oc = w.shape[0], k = w.shape[2];
  const int oh = gout.shape[1], ow = gout.shape[2];

  for (int o = 0; o < oc; ++o) {
    const T* gmap = gout.ptr() + static_cast<std::size_t>(o) * oh * ow;
    if (gb) {
      T acc = T(0);
      for (int i = 0; i < static_cast<int>(oh) * ow; ++i) acc += gmap[i];
      gb->data[o] += acc;
    }
    if (!gin && !gw) continue;
    for (int c = 0; c < ic; ++c) {
      const T* imap = in.ptr() + static_cast<std::size_t>(c) * h * wd;
      T* gimap = gin ? gin->ptr() + static_cast<std::size_t>(c) * h * wd
                     : nullptr;
      const std::size_t wbase = (static_cast<std::size_t>(o) * ic + c) *
                                static_cast<std::size_t>(k) * k;
      for (int kh = 0; kh < k; ++kh) {
        int rlo, rhi;
        detail::tap_range(h, oh, stride, pad, kh, rlo, rhi);
        for (int kw = 0; kw < k; ++kw) {
          int clo, chi;
          detail::tap_range(wd, ow, stride, pad, kw, clo, chi);
          if (gw) {
            T acc = T(0);
            for (int r = rlo; r <= rhi; ++r) {
              const T* grow = gmap + static_cast<std::size_t>(r) * ow;
              const T* irow =
                  imap + static_cast<std::size_t>(r * stride + kh - pad) * wd +
                  (kw - pad);
              for (int cc = clo; cc <= chi; ++cc)
                acc += grow[cc] * irow[cc * stride];
            }
            gw->data[wbase + static_cast<std::size_t>(kh) * k + kw] += acc;
          }
          if (gin) {
            const T wv = w.data[wbase + static_cast<std::size_t>(kh) * k + kw];
            for (int r = rlo; r <= rhi; ++r) {
              const T* grow = gmap + static_cast<std::size_t>(r) * ow;
              T* girow =
                  gimap + static_cast<std::size_t>(r * stride + kh - pad) * wd +
                  (kw - pad);
              for (int cc = clo; cc <= chi; ++cc)
                girow[cc * stride] += wv * grow[cc];
            }
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Conv3D

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& in, const Tensor<T>& w,
                         const T* b, int stride, int pad) {
  const int ic = in.shape[0], d = in.shape[1], h = in.shape[2],
            wd = in.shape[3];
  const int oc = w.shape[0], k = w.shape[2];
  if (w.shape[1] != ic)
    throw std::invalid_argument("conv3d: weight/input channel mismatch");
  const int od = conv_out_extent(d, k, stride, pad);
  const int oh = conv_out_extent(h, k, stride, pad);
  const int ow = conv_out_extent(wd, k, stride, pad);
  Tensor<T> out({oc, od, oh, ow});

  const std::size_t in_plane = static_cast<std::size_t>(h) * wd;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  for (int o = 0; o < oc; ++o) {
    T* omap = out.ptr() + static_cast<std::size_t>(o) * od * out_plane;
    const T bias = b ? b[o] : T(0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(od) * out_plane; ++i)
      omap[i] = bias;
    for (int c = 0; c < ic; ++c) {
      const T* imap = in.ptr() + static_cast<std::size_t>(c) * d * in_plane;
      const T* wmap = w.ptr() + (((static_cast<std::size_t>(o) * ic + c) * k) *
                                 k) * k;
      for (int kd = 0; kd < k; ++kd) {
        int dlo, dhi;
        detail::tap_range(d, od, stride, pad, kd, dlo, dhi);
        for (int kh = 0; kh < k; ++kh) {
          int rlo, rhi;
          detail::tap_range(h, oh, stride, pad, kh, rlo, rhi);
          for (int kw = 0; kw < k; ++kw) {
            const T wv = wmap[(kd * k + kh) * k + kw];
            int clo, chi;
            detail::tap_range(wd, ow, stride, pad, kw, clo, chi);
            for (int dd = dlo; dd <= dhi; ++dd) {
              const T* iplane = imap + static_cast<std::size_t>(
                                           dd * stride + kd - pad) * in_plane;
              T* oplane = omap + static_cast<std::size_t>(dd) * out_plane;
              for (int r = rlo; r <= rhi; ++r) {
                T* orow = oplane + static_cast<std::size_t>(r) * ow;
                const T* irow = iplane + static_cast<std::size_t>(
                                             r * stride + kh - pad) * wd +
                                (kw - pad);
                for (int cc = clo; cc <= chi; ++cc)
                  orow[cc] += wv * irow[cc * stride];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void conv3d_backward(const Tensor<T>& in, const Tensor<T>& w,
                     const Tensor<T>& gout, int stride, int pad,
                     Tensor<T>* gin, Tensor<T>* gw, Tensor<T>* gb) {
  const int ic = in.shape[0], d = in.shape[1], h = in.shape[2],
            wd = in.shape[3];
  const int oc = w.shape[0], k = w.shape[2];
  const int od = gout.shape[1], oh = gout.shape[2], ow = gout.shape[3];
  const std::size_t in_plane = static_cast<std::size_t>(h) * wd;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;

  for (int o = 0; o < oc; ++o) {
    const T* gmap = gout.ptr() + static_cast<std::size_t>(o) * od * out_plane;
    if (gb) {
      T acc = T(0);
      for (std::size_t i = 0; i < static_cast<std::size_t>(od) * out_plane;
           ++i)
        acc += gmap[i];
      gb->data[o] += acc;
    }
    if (!gin && !gw) continue;
    for (int c = 0; c < ic; ++c) {
      const T* imap = in.ptr() + static_cast<std::size_t>(c) * d * in_plane;
      T* gimap = gin ? gin->ptr() + static_cast<std::size_t>(c) * d * in_plane
                     : nullptr;
      const std::size_t wbase =
          ((static_cast<std::size_t>(o) * ic + c) * k) * static_cast<std::size_t>(k) * k;
      for (int kd = 0; kd < k; ++kd) {
        int dlo, dhi;
        detail::tap_range(d, od, stride, pad, kd, dlo, dhi);
        for (int kh = 0; kh < k; ++kh) {
          int rlo, rhi;
          detail::tap_range(h, oh, stride, pad, kh, rlo, rhi);
          for (int kw = 0; kw < k; ++kw) {
            int clo, chi;
            detail::tap_range(wd, ow, stride, pad, kw, clo, chi);
            const std::size_t widx =
                wbase + (static_cast<std::size_t>(kd) * k + kh) * k + kw;
            if (gw) {
              T acc = T(0);
              for (int dd = dlo; dd <= dhi; ++dd) {
                const T* gplane = gmap + static_cast<std::size_t>(dd) * out_plane;
                const T* iplane =
                    imap +
                    static_cast<std::size_t>(dd * stride + kd - pad) * in_plane;
                for (int r = rlo; r <= rhi; ++r) {
                  const T* grow = gplane + static_cast<std::size_t>(r) * ow;
                  const T* irow = iplane + static_cast<std::size_t>(
                                               r * stride + kh - pad) * wd +
                                  (kw - pad);
                  for (int cc = clo; cc <= chi; ++cc)
                    acc += grow[cc] * irow[cc * stride];
                }
              }
              gw->data[widx] += acc;
            }
            if (gin) {
              const T wv = w.data[widx];
              for (int dd = dlo; dd <= dhi; ++dd) {
                const T* gplane = gmap + static_cast<std::size_t>(dd) * out_plane;
                T* giplane =
                    gimap +
                    static_cast<std::size_t>(dd * stride + kd - pad) * in_plane;
                for (int r = rlo; r <= rhi; ++r) {
                  const T* grow = gplane + static_cast<std::size_t>(r) * ow;
                  T* girow = giplane + static_cast<std::size_t>(
                                           r * stride + kh - pad) * wd +
                             (kw - pad);
                  for (int cc = clo; cc <= chi; ++cc)
                    girow[cc * stride] += wv * grow[cc];
                }
              }
            }
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Nearest-neighbor x2 upsampling (adjoint: 2x2(x2) block sum)

template <typename T>
Tensor<T> upsample2_forward(const Tensor<T>& in, int spatial_rank) {
  if (spatial_rank == 2) {
    const int c = in.shape[0], h = in.shape[1], w = in.shape[2];
    Tensor<T> out({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
      for (int r = 0; r < 2 * h; ++r) {
        const T* irow = in.ptr() + (static_cast<std::size_t>(ch) * h + r / 2) * w;
        T* orow = out.ptr() + (static_cast<std::size_t>(ch) * 2 * h + r) * 2 * w;
        for (int cc = 0; cc < 2 * w; ++cc) orow[cc] = irow[cc / 2];
      }
    return out;
  }
  const int c = in.shape[0], d = in.shape[1], h = in.shape[2], w = in.shape[3];
  Tensor<T> out({c, 2 * d, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch)
    for (int dd = 0; dd < 2 * d; ++dd)
      for (int r = 0; r < 2 * h; ++r) {
        const T* irow =
            in.ptr() +
            ((static_cast<std::size_t>(ch) * d + dd / 2) * h + r / 2) * w;
        T* orow = out.ptr() +
                  ((static_cast<std::size_t>(ch) * 2 * d + dd) * 2 * h + r) *
                      2 * w;
        for (int cc = 0; cc < 2 * w; ++cc) orow[cc] = irow[cc / 2];
      }
  return out;
}

template <typename T>
void upsample2_backward(const Tensor<T>& gout, int spatial_rank,
                        Tensor<T>& gin) {
  if (spatial_rank == 2) {
    const int c = gin.shape[0], h = gin.shape[1], w = gin.shape[2];
    for (int ch = 0; ch < c; ++ch)
      for (int r = 0; r < 2 * h; ++r) {
        const T* grow =
            gout.ptr() + (static_cast<std::size_t>(ch) * 2 * h + r) * 2 * w;
        T* girow = gin.ptr() + (static_cast<std::size_t>(ch) * h + r / 2) * w;
        for (int cc = 0; cc < 2 * w; ++cc) girow[cc / 2] += grow[cc];
      }
    return;
  }
  const int c = gin.shape[0], d = gin.shape[1], h = gin.shape[2],
            w = gin.shape[3];
  for (int ch = 0; ch < c; ++ch)
    for (int dd = 0; dd < 2 * d; ++dd)
      for (int r = 0; r < 2 * h; ++r) {
        const T* grow =
            gout.ptr() +
            ((static_cast<std::size_t>(ch) * 2 * d + dd) * 2 * h + r) * 2 * w;
        T* girow = gin.ptr() +
                   ((static_cast<std::size_t>(ch) * d + dd / 2) * h + r / 2) * w;
        for (int cc = 0; cc < 2 * w; ++cc) girow[cc / 2] += grow[cc];
      }
}

// ---------------------------------------------------------------------------
// InstanceNorm (no affine parameters), eps = 1e-5, per-channel over all
// spatial positions. Statistics are recomputed in backward.

constexpr double kInstanceNormEps = 1e-5;

template <typename T>
Tensor<T> instance_norm_forward(const Tensor<T>& in) {
  const int c = in.shape[0];
  const std::size_t n = in.numel() / static_cast<std::size_t>(c);
  Tensor<T> out(in.shape);
  for (int ch = 0; ch < c; ++ch) {
    const T* x = in.ptr() + static_cast<std::size_t>(ch) * n;
    T* y = out.ptr() + static_cast<std::size_t>(ch) * n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += static_cast<double>(x[i]);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = static_cast<double>(x[i]) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kInstanceNormEps);
    for (std::size_t i = 0; i < n; ++i)
      y[i] = static_cast<T>((static_cast<double>(x[i]) - mean) * inv);
  }
  return out;
}

template <typename T>
void instance_norm_backward(const Tensor<T>& in, const Tensor<T>& gout,
                            Tensor<T>& gin) {
  const int c = in.shape[0];
  const std::size_t n = in.numel() / static_cast<std::size_t>(c);
  for (int ch = 0; ch < c; ++ch) {
    const T* x = in.ptr() + static_cast<std::size_t>(ch) * n;
    const T* g = gout.ptr() + static_cast<std::size_t>(ch) * n;
    T* gi = gin.ptr() + static_cast<std::size_t>(ch) * n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += static_cast<double>(x[i]);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = static_cast<double>(x[i]) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kInstanceNormEps);
    double gmean = 0.0, gxhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double xh = (static_cast<double>(x[i]) - mean) * inv;
      gmean += static_cast<double>(g[i]);
      gxhat += static_cast<double>(g[i]) * xh;
    }
    gmean /= static_cast<double>(n);
    gxhat /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double xh = (static_cast<double>(x[i]) - mean) * inv;
      gi[i] += static_cast<T>(inv * (static_cast<double>(g[i]) - gmean -
                                     xh * gxhat));
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise activations

template <typename T>
Tensor<T> activation_forward(LayerKind kind, const Tensor<T>& in,
                             double slope) {
  Tensor<T> out(in.shape);
  const std::size_t n = in.numel();
  const T* x = in.ptr();
  T* y = out.ptr();
  switch (kind) {
    case LayerKind::ReLU:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case LayerKind::LeakyReLU: {
      const T a = static_cast<T>(slope);
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : a * x[i];
      break;
    }
    case LayerKind::Sigmoid:
      for (std::size_t i = 0; i < n; ++i)
        y[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x[i]))));
      break;
    case LayerKind::Tanh:
      for (std::size_t i = 0; i < n; ++i)
        y[i] = static_cast<T>(std::tanh(static_cast<double>(x[i])));
      break;
    default:
      throw std::invalid_argument("activation_forward: not an activation");
  }
  return out;
}

template <typename T>
void activation_backward(LayerKind kind, const Tensor<T>& in,
                         const Tensor<T>& out, const Tensor<T>& gout,
                         double slope, Tensor<T>& gin) {
  const std::size_t n = in.numel();
  const T* x = in.ptr();
  const T* y = out.ptr();
  const T* g = gout.ptr();
  T* gi = gin.ptr();
  switch (kind) {
    case LayerKind::ReLU:
      for (std::size_t i = 0; i < n; ++i) gi[i] += x[i] > T(0) ? g[i] : T(0);
      break;
    case LayerKind::LeakyReLU: {
      const T a = static_cast<T>(slope);
      for (std::size_t i = 0; i < n; ++i)
        gi[i] += x[i] > T(0) ? g[i] : a * g[i];
      break;
    }
    case LayerKind::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) gi[i] += g[i] * y[i] * (T(1) - y[i]);
      break;
    case LayerKind::Tanh:
      for (std::size_t i = 0; i < n; ++i)
        gi[i] += g[i] * (T(1) - y[i] * y[i]);
      break;
    default:
      throw std::invalid_argument("activation_backward: not an activation");
  }
}

// ---------------------------------------------------------------------------
// Residual refinement head: y = clamp_[0,1](base + 0.5*tanh(head)), where
// base is channel 0 of the referenced activation and head is a 1-channel
// map. The clamp passes gradient through on [0, 1] and blocks outside.

template <typename T>
Tensor<T> residual_tanh_clamp_forward(const Tensor<T>& head,
                                      const Tensor<T>& base_act) {
  if (head.shape[0] != 1)
    throw std::invalid_argument("residual_tanh_clamp: head must be 1-channel");
  const std::size_t n = head.numel();
  Tensor<T> out(head.shape);
  const T* x = head.ptr();
  const T* base = base_act.ptr();  // channel 0 is the leading plane
  T* y = out.ptr();
  for (std::size_t i = 0; i < n; ++i) {
    const T u = base[i] + static_cast<T>(0.5 * std::tanh(static_cast<double>(x[i])));
    y[i] = u < T(0) ? T(0) : (u > T(1) ? T(1) : u);
  }
  return out;
}

template <typename T>
void residual_tanh_clamp_backward(const Tensor<T>& head,
                                  const Tensor<T>& base_act,
                                  const Tensor<T>& gout, Tensor<T>& ghead,
                                  Tensor<T>& gbase_act) {
  const std::size_t n = head.numel();
  const T* x = head.ptr();
  const T* base = base_act.ptr();
  const T* g = gout.ptr();
  T* gh = ghead.ptr();
  T* gb = gbase_act.ptr();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::tanh(static_cast<double>(x[i]));
    const double u = static_cast<double>(base[i]) + 0.5 * t;
    const double pass = (u >= 0.0 && u <= 1.0) ? 1.0 : 0.0;
    const double gu = static_cast<double>(g[i]) * pass;
    gh[i] += static_cast<T>(gu * 0.5 * (1.0 - t * t));
    gb[i] += static_cast<T>(gu);
  }
}

}  // namespace provox
