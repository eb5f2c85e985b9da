#pragma once

// 3-D scalar volume with fixed axis semantics and exact slice
// extraction/stacking over the three anatomical orientations.
//
// Axis convention (fixed): index order (z, y, x), row-major with x
// innermost. Axial fixes z and yields (y, x) planes, coronal fixes y and
// yields (z, x) planes, sagittal fixes x and yields (z, y) planes.
// stack_slices(extract_slices(v, o), o) is a bitwise identity for every
// volume and orientation.

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace provox {

struct VolumeDims {
  int nz = 0, ny = 0, nx = 0;
  bool operator==(const VolumeDims&) const = default;
  std::size_t count() const {
    return static_cast<std::size_t>(nz) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nx);
  }
};

struct Volume {
  VolumeDims dims;
  std::vector<float> data;  // [z][y][x]

  Volume() = default;

  Volume(VolumeDims d, float fill = 0.0f)
      : dims(d), data(checked_count(d), fill) {}

  Volume(int nz, int ny, int nx, float fill = 0.0f)
      : Volume(VolumeDims{nz, ny, nx}, fill) {}

  static std::size_t checked_count(VolumeDims d) {
    if (d.nz < 1 || d.ny < 1 || d.nx < 1)
      throw std::invalid_argument("volume: all dims must be >= 1");
    return d.count();
  }

  float& at(int z, int y, int x) {
    return data[(static_cast<std::size_t>(z) * dims.ny + y) * dims.nx + x];
  }
  float at(int z, int y, int x) const {
    return data[(static_cast<std::size_t>(z) * dims.ny + y) * dims.nx + x];
  }
};

enum class Orientation { Axial, Coronal, Sagittal };

inline const char* orientation_name(Orientation o) {
  switch (o) {
    case Orientation::Axial: return "axial";
    case Orientation::Coronal: return "coronal";
    case Orientation::Sagittal: return "sagittal";
  }
  throw std::invalid_argument("orientation: invalid value");
}

inline Orientation orientation_from_name(const std::string& name) {
  if (name == "axial") return Orientation::Axial;
  if (name == "coronal") return Orientation::Coronal;
  if (name == "sagittal") return Orientation::Sagittal;
  throw std::invalid_argument("orientation: unknown name \"" + name + "\"");
}

// Extent along the fixed axis of an orientation.
inline int fixed_axis_extent(const VolumeDims& d, Orientation o) {
  switch (o) {
    case Orientation::Axial: return d.nz;
    case Orientation::Coronal: return d.ny;
    case Orientation::Sagittal: return d.nx;
  }
  throw std::invalid_argument("orientation: invalid value");
}

// (rows, cols) of a slice in the given orientation.
inline std::pair<int, int> slice_dims(const VolumeDims& d, Orientation o) {
  switch (o) {
    case Orientation::Axial: return {d.ny, d.nx};
    case Orientation::Coronal: return {d.nz, d.nx};
    case Orientation::Sagittal: return {d.nz, d.ny};
  }
  throw std::invalid_argument("orientation: invalid value");
}

struct SliceStack {
  Orientation orientation = Orientation::Axial;
  int rows = 0, cols = 0;
  std::vector<std::vector<float>> slices;  // each rows*cols, row-major
};

namespace detail {

// Volume index for (slice i, row r, col c) of an orientation.
inline std::size_t volume_index(const VolumeDims& d, Orientation o, int i,
                                int r, int c) {
  int z = 0, y = 0, x = 0;
  switch (o) {
    case Orientation::Axial: z = i, y = r, x = c; break;
    case Orientation::Coronal: y = i, z = r, x = c; break;
    case Orientation::Sagittal: x = i, z = r, y = c; break;
  }
  return (static_cast<std::size_t>(z) * d.ny + y) * d.nx + x;
}

}  // namespace detail

inline SliceStack extract_slices(const Volume& v, Orientation o) {
  const auto [rows, cols] = slice_dims(v.dims, o);
  const int n = fixed_axis_extent(v.dims, o);
  SliceStack s;
  s.orientation = o;
  s.rows = rows;
  s.cols = cols;
  s.slices.resize(n);
  for (int i = 0; i < n; ++i) {
    auto& sl = s.slices[i];
    sl.resize(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        sl[static_cast<std::size_t>(r) * cols + c] =
            v.data[detail::volume_index(v.dims, o, i, r, c)];
  }
  return s;
}

inline Volume stack_slices(const SliceStack& s, Orientation o) {
  if (s.orientation != o)
    throw std::invalid_argument(
        std::string("stack_slices: orientation mismatch (stack is ") +
        orientation_name(s.orientation) + ", requested " +
        orientation_name(o) + ")");
  if (s.slices.empty())
    throw std::invalid_argument("stack_slices: empty stack");
  const std::size_t expect = static_cast<std::size_t>(s.rows) * s.cols;
  for (const auto& sl : s.slices)
    if (sl.size() != expect)
      throw std::invalid_argument("stack_slices: inconsistent slice dims");

  VolumeDims d;
  const int n = static_cast<int>(s.slices.size());
  switch (o) {
    case Orientation::Axial: d = {n, s.rows, s.cols}; break;
    case Orientation::Coronal: d = {s.rows, n, s.cols}; break;
    case Orientation::Sagittal: d = {s.rows, s.cols, n}; break;
  }
  Volume v(d);
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < s.rows; ++r)
      for (int c = 0; c < s.cols; ++c)
        v.data[detail::volume_index(d, o, i, r, c)] =
            s.slices[i][static_cast<std::size_t>(r) * s.cols + c];
  return v;
}

// Normalization bookkeeping: divisor used so the mapping can be inverted.
struct ScaleRecord {
  float max_intensity = 1.0f;
};

// Divides by the maximum value; an all-zero volume uses divisor 1 so the
// map stays total. Input must be non-negative.
inline std::pair<Volume, ScaleRecord> normalize_volume(const Volume& v) {
  float maxv = 0.0f;
  for (float x : v.data) {
    if (x < 0.0f)
      throw std::invalid_argument("normalize_volume: negative input values");
    if (x > maxv) maxv = x;
  }
  ScaleRecord rec{maxv > 0.0f ? maxv : 1.0f};
  Volume out = v;
  for (float& x : out.data) x /= rec.max_intensity;
  return {std::move(out), rec};
}

inline Volume denormalize_volume(const Volume& v, const ScaleRecord& s) {
  if (!(s.max_intensity >= std::numeric_limits<float>::min()))
    throw std::invalid_argument("denormalize_volume: invalid scale record");
  Volume out = v;
  for (float& x : out.data) x *= s.max_intensity;
  return out;
}

}  // namespace provox
