#pragma once

// Side-by-side volume montage as a binary PGM (P5, 8-bit): one row per
// labeled volume (method), three columns — the center axial, coronal, and
// sagittal slices. Rows are separated by 2-pixel bands of gray (value 128);
// within a row, tiles shorter than the row height are bottom-padded with
// black. Labels are embedded as `#` comment lines after the magic, so the
// file stays viewable by any PGM reader and byte-stable for golden tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "provox/volume.hpp"

namespace provox {

struct MontageEntry {
  std::string label;
  Volume volume;
};

inline constexpr int kMontageSeparatorRows = 2;
inline constexpr std::uint8_t kMontageSeparatorValue = 128;

namespace detail {

inline std::uint8_t montage_byte(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace detail

inline std::string encode_montage(const std::vector<MontageEntry>& entries) {
  if (entries.empty())
    throw std::invalid_argument("montage: need at least one volume");
  const VolumeDims dims = entries.front().volume.dims;
  for (const MontageEntry& e : entries)
    if (!(e.volume.dims == dims))
      throw std::invalid_argument("montage: volume dimensions differ");

  const Orientation order[3] = {Orientation::Axial, Orientation::Coronal,
                                Orientation::Sagittal};
  // Tile extents per column: axial ny x nx, coronal nz x nx, sagittal nz x ny.
  int tile_rows[3], tile_cols[3];
  for (int c = 0; c < 3; ++c) {
    SliceStack probe = extract_slices(entries.front().volume, order[c]);
    tile_rows[c] = probe.rows;
    tile_cols[c] = probe.cols;
  }
  const int row_height = std::max({tile_rows[0], tile_rows[1], tile_rows[2]});
  const int width = tile_cols[0] + tile_cols[1] + tile_cols[2];
  const int n = static_cast<int>(entries.size());
  const int height = n * row_height + kMontageSeparatorRows * (n - 1);

  std::string out;
  out += "P5\n";
  for (int r = 0; r < n; ++r)
    out += "# row " + std::to_string(r) + ": " + entries[r].label + "\n";
  out += "# columns: center axial, coronal, sagittal slices\n";
  out += std::to_string(width) + " " + std::to_string(height) + "\n255\n";

  std::vector<std::uint8_t> raster(
      static_cast<std::size_t>(width) * height,
      kMontageSeparatorValue);  // pre-fills the separator bands
  for (int r = 0; r < n; ++r) {
    const int row0 = r * (row_height + kMontageSeparatorRows);
    // Black background for the row (covers bottom padding of short tiles).
    for (int y = 0; y < row_height; ++y)
      std::fill_n(raster.begin() + static_cast<std::size_t>(row0 + y) * width,
                  width, std::uint8_t{0});
    int col0 = 0;
    for (int c = 0; c < 3; ++c) {
      SliceStack st = extract_slices(entries[r].volume, order[c]);
      const std::vector<float>& slice =
          st.slices[static_cast<std::size_t>(st.slices.size() / 2)];
      for (int y = 0; y < tile_rows[c]; ++y)
        for (int x = 0; x < tile_cols[c]; ++x)
          raster[static_cast<std::size_t>(row0 + y) * width + col0 + x] =
              detail::montage_byte(slice[static_cast<std::size_t>(y) *
                                             tile_cols[c] +
                                         x]);
      col0 += tile_cols[c];
    }
  }
  out.append(reinterpret_cast<const char*>(raster.data()), raster.size());
  return out;
}

inline void write_montage(const std::vector<MontageEntry>& entries,
                          const std::filesystem::path& path) {
  const std::string bytes = encode_montage(entries);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f)
    throw std::runtime_error("montage: cannot open for writing: " +
                             path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("montage: write failed: " + path.string());
}

}  // namespace provox
