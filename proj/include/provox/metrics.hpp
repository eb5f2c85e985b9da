#pragma once

// Evaluation metrics: PSNR, a fixed-extractor Fréchet distance standing in
// for FID at desk scale, and the discontinuity index quantifying
// slice-to-slice artifacts along an orientation.
//
// The FID features come from a frozen, seeded random convolutional network,
// not a pretrained classifier: absolute values are meaningful only for
// comparing methods within this framework.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "provox/model.hpp"
#include "provox/volume.hpp"

namespace provox {

// ---------------------------------------------------------------------------
// PSNR

inline double psnr_from_mse(double mse, double max_val) {
  if (!(max_val > 0.0))
    throw std::invalid_argument("psnr: max_val must be positive");
  if (!(mse >= 0.0)) throw std::invalid_argument("psnr: negative MSE");
  if (mse < max_val * max_val * std::pow(10.0, -9.9)) return 99.0;
  return 10.0 * std::log10(max_val * max_val / mse);
}

inline double mse_between(const Volume& ref, const Volume& syn) {
  if (!(ref.dims.nz == syn.dims.nz && ref.dims.ny == syn.dims.ny &&
        ref.dims.nx == syn.dims.nx))
    throw std::invalid_argument("psnr: volume dims differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    const double d = static_cast<double>(ref.data[i]) -
                     static_cast<double>(syn.data[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(ref.data.size());
}

inline double psnr(const Volume& ref, const Volume& syn, double max_val = 1.0) {
  return psnr_from_mse(mse_between(ref, syn), max_val);
}

// ---------------------------------------------------------------------------
// Feature extractor for the Fréchet distance: a frozen seeded conv net
// (1->8->16->32 stride-2 blocks with ReLU, 1x1 conv to 64, global average
// pool). All stride-2 convs are 3x3, pad 1.

constexpr std::uint64_t kFeatureExtractorSeed = 0xF1D;

struct FeatureExtractor {
  Model<double> net;
};

inline FeatureExtractor make_feature_extractor() {
  FeatureExtractor fe;
  fe.net.spatial_rank = 2;
  fe.net.in_channels = 1;
  fe.net.layers = {
      {LayerKind::Conv2D, 1, 8, 3, 2, 1},
      {LayerKind::ReLU},
      {LayerKind::Conv2D, 8, 16, 3, 2, 1},
      {LayerKind::ReLU},
      {LayerKind::Conv2D, 16, 32, 3, 2, 1},
      {LayerKind::ReLU},
      {LayerKind::Conv2D, 32, 64, 1, 1, 0},
  };
  init_params(fe.net, kFeatureExtractorSeed);
  return fe;
}

constexpr int kFeatureDim = 64;

// Rows are pooled 64-d features, one per slice.
inline Eigen::MatrixXd extract_features(const SliceStack& slices,
                                        const FeatureExtractor& fe) {
  if (slices.slices.empty())
    throw std::invalid_argument("extract_features: empty slice stack");
  if (slices.rows < 8 || slices.cols < 8)
    throw std::invalid_argument("extract_features: slice too small (min 8x8)");
  Eigen::MatrixXd features(static_cast<Eigen::Index>(slices.slices.size()),
                           kFeatureDim);
  for (std::size_t i = 0; i < slices.slices.size(); ++i) {
    Tensor<double> in({1, slices.rows, slices.cols});
    for (std::size_t j = 0; j < slices.slices[i].size(); ++j)
      in.data[j] = static_cast<double>(slices.slices[i][j]);
    Tensor<double> out = forward(fe.net, in);
    const std::size_t plane =
        out.numel() / static_cast<std::size_t>(out.shape[0]);
    for (int c = 0; c < kFeatureDim; ++c) {
      double acc = 0.0;
      const double* p = out.ptr() + static_cast<std::size_t>(c) * plane;
      for (std::size_t j = 0; j < plane; ++j) acc += p[j];
      features(static_cast<Eigen::Index>(i), c) =
          acc / static_cast<double>(plane);
    }
  }
  return features;
}

// ---------------------------------------------------------------------------
// Gaussian statistics and Fréchet distance

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased + 1e-6 I regularizer, exactly symmetric
  std::int64_t n = 0;
};

constexpr double kCovRegularizer = 1e-6;

inline GaussianStats gaussian_stats(const Eigen::MatrixXd& features) {
  const Eigen::Index n = features.rows();
  if (n < 2)
    throw std::invalid_argument("gaussian_stats: need at least 2 samples");
  GaussianStats st;
  st.n = n;
  st.mean = features.colwise().mean();
  const Eigen::MatrixXd centered = features.rowwise() - st.mean.transpose();
  st.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  st.cov = ((st.cov + st.cov.transpose()) * 0.5).eval();  // exact symmetry
  st.cov.diagonal().array() += kCovRegularizer;
  return st;
}

namespace detail {

// PSD square root via symmetric eigendecomposition; eigenvalues below
// -tolerance are an error, small negatives are clamped to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error(std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd lam = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-6)
      throw std::runtime_error(std::string(what) +
                               ": matrix is not PSD (eigenvalue " +
                               std::to_string(lam[i]) + ")");
    lam[i] = std::sqrt(std::max(0.0, lam[i]));
  }
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

inline void validate_gaussian_stats(const GaussianStats& s) {
  if (s.n < 2) throw std::invalid_argument("frechet: stats need n >= 2");
  if (s.cov.rows() != s.cov.cols() || s.cov.rows() != s.mean.size())
    throw std::invalid_argument("frechet: stats dimensions inconsistent");
  if ((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("frechet: covariance not symmetric");
}

inline double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  validate_gaussian_stats(a);
  validate_gaussian_stats(b);
  if (a.mean.size() != b.mean.size())
    throw std::invalid_argument("frechet: dimension mismatch");
  const Eigen::MatrixXd sqrt_a = detail::psd_sqrt(a.cov, "frechet");
  Eigen::MatrixXd inner = sqrt_a * b.cov * sqrt_a;
  inner = ((inner + inner.transpose()) * 0.5).eval();
  const Eigen::MatrixXd inner_sqrt = detail::psd_sqrt(inner, "frechet inner");
  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double trace_term =
      a.cov.trace() + b.cov.trace() - 2.0 * inner_sqrt.trace();
  return std::max(0.0, mean_term + trace_term);
}

// ---------------------------------------------------------------------------
// Discontinuity index: mean over adjacent slice pairs (along o) of the mean
// absolute voxel difference.

inline double discontinuity_index(const Volume& v, Orientation o) {
  const int n = fixed_axis_extent(v.dims, o);
  if (n < 2)
    throw std::invalid_argument(std::string("discontinuity index: single-slice axis ") +
                                orientation_name(o));
  SliceStack st = extract_slices(v, o);
  const std::size_t plane = st.slices.front().size();
  double acc = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    double slice_acc = 0.0;
    for (std::size_t j = 0; j < plane; ++j)
      slice_acc += std::abs(static_cast<double>(st.slices[i + 1][j]) -
                            static_cast<double>(st.slices[i][j]));
    acc += slice_acc / static_cast<double>(plane);
  }
  return acc / static_cast<double>(n - 1);
}

// ---------------------------------------------------------------------------
// Aggregate report

struct MetricReport {
  double psnr_mean = 0.0;
  double psnr_std = 0.0;  // population std over subjects
  std::vector<double> psnr_per_subject;
  double fid = 0.0;
  std::map<Orientation, double> di_delta;  // |DI(syn) - DI(ref)|, averaged
  // Provenance, filled by the caller.
  std::string method;
  std::string dataset_id;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

// Paired evaluation of synthesized volumes against references: per-subject
// PSNR, Fréchet distance between pooled axial-slice features, and per-
// orientation discontinuity deltas.
inline MetricReport evaluate_volumes(const std::vector<Volume>& refs,
                                     const std::vector<Volume>& syns,
                                     const FeatureExtractor& fe) {
  if (refs.size() != syns.size())
    throw std::invalid_argument("evaluate: ref/syn count mismatch");
  if (refs.empty()) throw std::invalid_argument("evaluate: no volumes");

  MetricReport report;
  for (std::size_t i = 0; i < refs.size(); ++i)
    report.psnr_per_subject.push_back(psnr(refs[i], syns[i], 1.0));
  double mean = 0.0;
  for (double p : report.psnr_per_subject) mean += p;
  mean /= static_cast<double>(report.psnr_per_subject.size());
  double var = 0.0;
  for (double p : report.psnr_per_subject) var += (p - mean) * (p - mean);
  var /= static_cast<double>(report.psnr_per_subject.size());
  report.psnr_mean = mean;
  report.psnr_std = std::sqrt(var);

  auto pooled_features = [&](const std::vector<Volume>& vols) {
    std::vector<Eigen::MatrixXd> parts;
    Eigen::Index total = 0;
    for (const Volume& v : vols) {
      parts.push_back(extract_features(extract_slices(v, Orientation::Axial), fe));
      total += parts.back().rows();
    }
    Eigen::MatrixXd all(total, kFeatureDim);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      all.middleRows(at, p.rows()) = p;
      at += p.rows();
    }
    return all;
  };
  report.fid = frechet_distance(gaussian_stats(pooled_features(refs)),
                                gaussian_stats(pooled_features(syns)));

  for (Orientation o :
       {Orientation::Axial, Orientation::Coronal, Orientation::Sagittal}) {
    double acc = 0.0;
    for (std::size_t i = 0; i < refs.size(); ++i)
      acc += std::abs(discontinuity_index(syns[i], o) -
                      discontinuity_index(refs[i], o));
    report.di_delta[o] = acc / static_cast<double>(refs.size());
  }
  return report;
}

}  // namespace provox
