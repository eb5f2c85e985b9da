#pragma once

// Dense row-major tensor. Shape layout conventions used by the layer
// kernels: 2-D feature maps are {channels, rows, cols}, 3-D feature maps
// are {channels, depth, rows, cols}. float for training, double for
// gradient checks and metric features.

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace provox {

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> s, T fill = T(0))
      : shape(std::move(s)), data(checked_numel(shape), fill) {}

  static std::size_t checked_numel(const std::vector<int>& s) {
    if (s.empty()) throw std::invalid_argument("tensor: empty shape");
    std::size_t n = 1;
    for (int e : s) {
      if (e < 1) throw std::invalid_argument("tensor: non-positive extent");
      n *= static_cast<std::size_t>(e);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename T>
std::string shape_str(const Tensor<T>& t) {
  std::string s = "(";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.shape[i]);
  }
  return s + ")";
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                        const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                shape_str(a) + " vs " + shape_str(b));
}

// Channel concatenation for {C, spatial...} tensors with equal spatial
// extents.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape.size() != b.shape.size())
    throw std::invalid_argument("concat_channels: rank mismatch");
  for (std::size_t i = 1; i < a.shape.size(); ++i)
    if (a.shape[i] != b.shape[i])
      throw std::invalid_argument("concat_channels: spatial mismatch");
  std::vector<int> s = a.shape;
  s[0] = a.shape[0] + b.shape[0];
  Tensor<T> out(s);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
  return out;
}

}  // namespace provox
