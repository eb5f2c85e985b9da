#pragma once

// Comparison baselines: the cross-sectional 2D-GAN (definitionally the
// pipeline's axial stage trained alone) and a volumetric 3D-GAN trained on
// whole volumes with 3-D convolutions. Both share the LSGAN + L1 objective
// and optimizer with the pipeline.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "provox/gan.hpp"
#include "provox/pipeline.hpp"
#include "provox/subject.hpp"

namespace provox {

// The 2D-GAN baseline IS stage A of the pipeline under the same seed and
// config; aliasing the implementation keeps the comparison like-for-like.
inline Model<float> train_2dgan(const std::vector<SubjectVolumes>& train,
                                const std::vector<SubjectVolumes>& val,
                                const PipelineTrainConfig& cfg) {
  PipelineTrainConfig stage_a = cfg;
  stage_a.stages = {Orientation::Axial};
  auto [models, history] = train_pipeline(train, val, stage_a);
  (void)history;
  return std::move(models.g_axial);
}

// Volumetric baseline: deliberately smaller than the 2-D generators (the
// memory/capacity trade-off volumetric models face at fixed budget).
struct Baseline3DConfig {
  int base_channels = 8;
  int depth = 2;
  int epochs = 3;
  int batch_size = 2;
  double lambda_pix = 100.0;
  AdamConfig adam;
  std::uint64_t rng_seed = 0;
};

// Largest volume extent the volumetric baseline accepts (memory bound).
constexpr int kMaxVolumetricExtent = 64;

namespace detail {

inline void check_volumetric_extent(const VolumeDims& d) {
  if (d.nz > kMaxVolumetricExtent || d.ny > kMaxVolumetricExtent ||
      d.nx > kMaxVolumetricExtent)
    throw std::invalid_argument(
        "volumetric baseline: volume too large (max extent " +
        std::to_string(kMaxVolumetricExtent) + ")");
}

// {2, nz, ny, nx} stacked source volume: channel 0 = PD, channel 1 = T2.
inline Tensor<float> stacked_sources(const SubjectVolumes& s) {
  const Volume& pd = source_volume(s, Contrast::PD);
  const Volume& t2 = source_volume(s, Contrast::T2);
  Tensor<float> t({2, pd.dims.nz, pd.dims.ny, pd.dims.nx});
  const std::size_t n = pd.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    t.data[i] = pd.data[i];
    t.data[n + i] = t2.data[i];
  }
  return t;
}

inline GeneratorConfig volumetric_generator_config(const Baseline3DConfig& cfg) {
  GeneratorConfig g;
  g.in_channels = 2;
  g.out_channels = 1;
  g.base_channels = cfg.base_channels;
  g.depth = cfg.depth;
  g.residual_mode = false;
  g.spatial_rank = 3;
  return g;
}

}  // namespace detail

inline Model<float> train_3dgan(const std::vector<SubjectVolumes>& train,
                                const std::vector<SubjectVolumes>& val,
                                const Baseline3DConfig& cfg) {
  (void)val;  // volumetric baseline logs no per-epoch validation
  if (train.empty())
    throw std::invalid_argument("volumetric baseline: empty train split");
  std::vector<SlicePair> pairs;
  for (const SubjectVolumes& s : train) {
    validate_subject(s);
    if (!s.target)
      throw std::invalid_argument("volumetric baseline: subject '" + s.id +
                                  "' has no target volume");
    detail::check_volumetric_extent(s.sources.begin()->second.dims);
    SlicePair p;
    p.condition = detail::stacked_sources(s);
    p.target = Tensor<float>({1, s.target->dims.nz, s.target->dims.ny,
                              s.target->dims.nx});
    for (std::size_t i = 0; i < s.target->data.size(); ++i)
      p.target.data[i] = s.target->data[i];
    pairs.push_back(std::move(p));
  }

  StageTrainConfig tcfg;
  tcfg.epochs = cfg.epochs;
  tcfg.batch_size = cfg.batch_size;
  tcfg.lambda_pix = cfg.lambda_pix;
  tcfg.adam = cfg.adam;
  tcfg.rng_seed = cfg.rng_seed;

  DiscriminatorConfig dcfg;
  dcfg.in_channels = 3;
  dcfg.layers = cfg.depth;
  dcfg.base_channels = cfg.base_channels;
  dcfg.spatial_rank = 3;

  StageResult<float> res =
      train_stage(pairs, tcfg, detail::volumetric_generator_config(cfg), dcfg);
  return std::move(res.generator);
}

inline Volume synthesize_3dgan(const Model<float>& m,
                               const SubjectVolumes& s) {
  validate_subject(s);
  if (m.spatial_rank != 3)
    throw std::invalid_argument("volumetric baseline: model is not 3-D");
  if (m.in_channels != static_cast<int>(s.sources.size()))
    throw std::invalid_argument(
        "volumetric baseline: model expects " +
        std::to_string(m.in_channels) + " source channels, subject '" + s.id +
        "' has " + std::to_string(s.sources.size()));
  const VolumeDims dims = s.sources.begin()->second.dims;
  detail::check_volumetric_extent(dims);
  Tensor<float> out = forward(m, detail::stacked_sources(s));
  Volume v(dims);
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = out.data[i];
  return v;
}

}  // namespace provox
