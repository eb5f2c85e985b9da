#include <gtest/gtest.h>

#include <cstring>

#include "provox/rng.hpp"
#include "provox/volume.hpp"

namespace provox {
namespace {

Volume random_volume(Xoshiro256& rng, int nz, int ny, int nx) {
  Volume v(nz, ny, nx);
  for (float& x : v.data) x = static_cast<float>(rng.uniform());
  return v;
}

// Independent oracle for slice extraction: direct (z,y,x) loops per
// orientation, written without the shared index helper.
float oracle_slice_value(const Volume& v, Orientation o, int i, int r, int c) {
  switch (o) {
    case Orientation::Axial: return v.at(i, r, c);      // fixes z; (y, x)
    case Orientation::Coronal: return v.at(r, i, c);    // fixes y; (z, x)
    case Orientation::Sagittal: return v.at(r, c, i);   // fixes x; (z, y)
  }
  throw std::logic_error("unreachable");
}

TEST(Volume, SliceContentsMatchBruteForceOracle) {
  Xoshiro256 rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const int nz = 1 + static_cast<int>(rng.below(6));
    const int ny = 1 + static_cast<int>(rng.below(6));
    const int nx = 1 + static_cast<int>(rng.below(6));
    const Volume v = random_volume(rng, nz, ny, nx);
    for (Orientation o : {Orientation::Axial, Orientation::Coronal,
                          Orientation::Sagittal}) {
      const SliceStack s = extract_slices(v, o);
      ASSERT_EQ(static_cast<int>(s.slices.size()), fixed_axis_extent(v.dims, o));
      const auto [rows, cols] = slice_dims(v.dims, o);
      ASSERT_EQ(s.rows, rows);
      ASSERT_EQ(s.cols, cols);
      for (std::size_t i = 0; i < s.slices.size(); ++i)
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c)
            ASSERT_EQ(s.slices[i][static_cast<std::size_t>(r) * cols + c],
                      oracle_slice_value(v, o, static_cast<int>(i), r, c));
    }
  }
}

TEST(Volume, StackExtractRoundTripBitwise) {
  Xoshiro256 rng(103);
  for (int trial = 0; trial < 100; ++trial) {
    const int nz = 1 + static_cast<int>(rng.below(8));
    const int ny = 1 + static_cast<int>(rng.below(8));
    const int nx = 1 + static_cast<int>(rng.below(8));
    const Volume v = random_volume(rng, nz, ny, nx);
    for (Orientation o : {Orientation::Axial, Orientation::Coronal,
                          Orientation::Sagittal}) {
      const Volume back = stack_slices(extract_slices(v, o), o);
      ASSERT_TRUE(back.dims == v.dims);
      ASSERT_EQ(std::memcmp(back.data.data(), v.data.data(),
                            v.data.size() * sizeof(float)),
                0);
    }
  }
}

TEST(Volume, StackRejectsOrientationMismatch) {
  const Volume v(2, 3, 4);
  SliceStack s = extract_slices(v, Orientation::Axial);
  EXPECT_THROW(stack_slices(s, Orientation::Coronal), std::invalid_argument);
}

TEST(Volume, StackRejectsMalformedStacks) {
  SliceStack empty;
  empty.rows = 2;
  empty.cols = 2;
  EXPECT_THROW(stack_slices(empty, Orientation::Axial), std::invalid_argument);

  const Volume v(2, 3, 4);
  SliceStack bad = extract_slices(v, Orientation::Axial);
  bad.slices[1].pop_back();
  EXPECT_THROW(stack_slices(bad, Orientation::Axial), std::invalid_argument);
}

TEST(Volume, DimsValidation) {
  EXPECT_THROW(Volume(0, 2, 2), std::invalid_argument);
  EXPECT_THROW(Volume(2, -1, 2), std::invalid_argument);
  EXPECT_NO_THROW(Volume(1, 1, 1));
}

TEST(Volume, NormalizeDenormalizeRoundTrip) {
  Xoshiro256 rng(107);
  Volume v(4, 4, 4);
  for (float& x : v.data) x = static_cast<float>(rng.uniform(0.0, 37.5));
  const auto [norm, rec] = normalize_volume(v);
  float maxv = 0.0f;
  for (float x : norm.data) {
    ASSERT_GE(x, 0.0f);
    ASSERT_LE(x, 1.0f);
    maxv = std::max(maxv, x);
  }
  EXPECT_EQ(maxv, 1.0f);  // the max element maps exactly to 1
  const Volume back = denormalize_volume(norm, rec);
  for (std::size_t i = 0; i < v.data.size(); ++i)
    EXPECT_NEAR(back.data[i], v.data[i], 1e-4f);
}

TEST(Volume, NormalizeAllZeroUsesUnitScale) {
  const Volume v(2, 2, 2, 0.0f);
  const auto [norm, rec] = normalize_volume(v);
  EXPECT_EQ(rec.max_intensity, 1.0f);
  for (float x : norm.data) EXPECT_EQ(x, 0.0f);
}

TEST(Volume, NormalizeRejectsNegatives) {
  Volume v(2, 2, 2, 0.5f);
  v.data[3] = -0.1f;
  EXPECT_THROW(normalize_volume(v), std::invalid_argument);
}

TEST(Volume, OrientationNamesRoundTrip) {
  for (Orientation o : {Orientation::Axial, Orientation::Coronal,
                        Orientation::Sagittal})
    EXPECT_EQ(orientation_from_name(orientation_name(o)), o);
  EXPECT_THROW(orientation_from_name("diagonal"), std::invalid_argument);
}

}  // namespace
}  // namespace provox
