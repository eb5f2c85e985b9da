#pragma once

// Progressive multi-orientation synthesis: a first generator maps (PD, T2)
// axial slice pairs to T1 axial slices; residual refinement generators then
// sharpen the stacked volume along the coronal and sagittal orientations.
// Stages are trained sequentially with earlier stages frozen; refinement
// generators start as exact identities (zero tanh head), so an untrained
// later stage never degrades the volume.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "provox/gan.hpp"
#include "provox/metrics.hpp"
#include "provox/subject.hpp"
#include "provox/volume.hpp"

namespace provox {

struct PipelineTrainConfig {
  std::uint64_t master_seed = 0;
  int epochs_per_stage = 3;
  int batch_size = 4;
  double lambda_pix = 100.0;
  AdamConfig adam;
  int base_channels = 16;
  int depth = 3;
  // Ablation flag (off by default): refinement stages additionally see the
  // PD/T2 source slices as extra condition channels.
  bool refine_sees_sources = false;
  // Stages to train, starting with Axial; untrained refinement stages stay
  // identity. Canonical full order: Axial, Coronal, Sagittal.
  std::vector<Orientation> stages = {Orientation::Axial, Orientation::Coronal,
                                     Orientation::Sagittal};
};

struct PipelineModels {
  Model<float> g_axial;
  Model<float> g_coronal;
  Model<float> g_sagittal;
  GeneratorConfig axial_cfg;
  GeneratorConfig refine_cfg;
  // Provenance
  std::uint64_t master_seed = 0;
  int epochs_per_stage = 0;
  std::vector<Orientation> trained_stages;
};

struct PipelineStageRecord {
  Orientation orientation = Orientation::Axial;
  StageHistory history;
  double val_psnr_mean = 0.0;  // 0 when no validation subjects
  int n_val = 0;
};

struct PipelineHistory {
  std::vector<PipelineStageRecord> stages;
};

struct PipelineResult {
  Volume final;
  std::array<Volume, 3> intermediates;  // after A, after C, after S
};

namespace detail {

inline const Volume& source_volume(const SubjectVolumes& s, Contrast c) {
  auto it = s.sources.find(c);
  if (it == s.sources.end())
    throw std::invalid_argument("subject '" + s.id + "': missing " +
                                contrast_name(c) + " source volume");
  return it->second;
}

// {2, ny, nx} axial condition slice: channel 0 = PD, channel 1 = T2.
inline Tensor<float> axial_condition_slice(const SubjectVolumes& s, int z) {
  const Volume& pd = source_volume(s, Contrast::PD);
  const Volume& t2 = source_volume(s, Contrast::T2);
  const int ny = pd.dims.ny, nx = pd.dims.nx;
  Tensor<float> t({2, ny, nx});
  const std::size_t plane = static_cast<std::size_t>(ny) * nx;
  const std::size_t base = static_cast<std::size_t>(z) * plane;
  for (std::size_t j = 0; j < plane; ++j) {
    t.data[j] = pd.data[base + j];
    t.data[plane + j] = t2.data[base + j];
  }
  return t;
}

inline Tensor<float> slice_to_tensor(const SliceStack& st, std::size_t i) {
  Tensor<float> t({1, st.rows, st.cols});
  for (std::size_t j = 0; j < st.slices[i].size(); ++j)
    t.data[j] = st.slices[i][j];
  return t;
}

}  // namespace detail

inline bool is_residual_generator(const Model<float>& g) {
  return !g.layers.empty() &&
         g.layers.back().kind == LayerKind::ResidualTanhClamp;
}

// Stage 1: per-axial-slice synthesis from the stacked (PD, T2) condition.
inline Volume synthesize_stage1(const Model<float>& g_axial,
                                const SubjectVolumes& s) {
  validate_subject(s);
  if (g_axial.in_channels != static_cast<int>(s.sources.size()))
    throw std::invalid_argument(
        "synthesize_stage1: generator expects " +
        std::to_string(g_axial.in_channels) + " source channels, subject '" +
        s.id + "' has " + std::to_string(s.sources.size()));
  const VolumeDims dims = s.sources.begin()->second.dims;
  Volume out(dims);
  const std::size_t plane = static_cast<std::size_t>(dims.ny) * dims.nx;
  for (int z = 0; z < dims.nz; ++z) {
    Tensor<float> slice = forward(g_axial, detail::axial_condition_slice(s, z));
    for (std::size_t j = 0; j < plane; ++j)
      out.data[static_cast<std::size_t>(z) * plane + j] = slice.data[j];
  }
  return out;
}

// Residual per-slice refinement along an orientation. When the generator
// takes extra condition channels (ablation), `sources` supplies the PD/T2
// volumes whose matching slices are appended after the current slice.
inline Volume refine_stage(const Model<float>& g, const Volume& v,
                           Orientation o,
                           const SubjectVolumes* sources = nullptr) {
  if (!is_residual_generator(g))
    throw std::invalid_argument("refine_stage: generator is not residual");
  SliceStack st = extract_slices(v, o);
  std::optional<SliceStack> pd_st, t2_st;
  if (g.in_channels != 1) {
    if (g.in_channels != 3 || sources == nullptr)
      throw std::invalid_argument(
          "refine_stage: generator condition channels need PD/T2 sources");
    pd_st = extract_slices(detail::source_volume(*sources, Contrast::PD), o);
    t2_st = extract_slices(detail::source_volume(*sources, Contrast::T2), o);
  }
  SliceStack out = st;
  const std::size_t plane = static_cast<std::size_t>(st.rows) * st.cols;
  for (std::size_t i = 0; i < st.slices.size(); ++i) {
    Tensor<float> cond({g.in_channels, st.rows, st.cols});
    for (std::size_t j = 0; j < plane; ++j) cond.data[j] = st.slices[i][j];
    if (g.in_channels == 3) {
      for (std::size_t j = 0; j < plane; ++j) {
        cond.data[plane + j] = pd_st->slices[i][j];
        cond.data[2 * plane + j] = t2_st->slices[i][j];
      }
    }
    Tensor<float> refined = forward(g, cond);
    for (std::size_t j = 0; j < plane; ++j) out.slices[i][j] = refined.data[j];
  }
  return stack_slices(out, o);
}

// Full progressive inference: axial synthesis, coronal refinement, sagittal
// refinement. Intermediates are the volumes after each stage.
inline PipelineResult run_pipeline(const PipelineModels& m,
                                   const SubjectVolumes& s) {
  PipelineResult r;
  const SubjectVolumes* extra =
      m.refine_cfg.in_channels != 1 ? &s : nullptr;
  r.intermediates[0] = synthesize_stage1(m.g_axial, s);
  r.intermediates[1] =
      refine_stage(m.g_coronal, r.intermediates[0], Orientation::Coronal,
                   extra);
  r.intermediates[2] =
      refine_stage(m.g_sagittal, r.intermediates[1], Orientation::Sagittal,
                   extra);
  r.final = r.intermediates[2];
  return r;
}

namespace detail {

inline void validate_pipeline_stages(const std::vector<Orientation>& stages) {
  if (stages.empty())
    throw std::invalid_argument("pipeline: no stages to train");
  if (stages.front() != Orientation::Axial)
    throw std::invalid_argument("pipeline: first stage must be axial");
  for (std::size_t i = 0; i < stages.size(); ++i)
    for (std::size_t j = i + 1; j < stages.size(); ++j)
      if (stages[i] == stages[j])
        throw std::invalid_argument("pipeline: duplicate stage");
}

// Slice pairs (condition -> target) for a refinement stage: slices of the
// current synthesized volumes against the matching target slices.
inline std::vector<SlicePair> refinement_pairs(
    const std::vector<SubjectVolumes>& subjects,
    const std::vector<Volume>& current, Orientation o, bool with_sources) {
  std::vector<SlicePair> pairs;
  for (std::size_t si = 0; si < subjects.size(); ++si) {
    SliceStack syn = extract_slices(current[si], o);
    SliceStack tgt = extract_slices(*subjects[si].target, o);
    std::optional<SliceStack> pd_st, t2_st;
    if (with_sources) {
      pd_st = extract_slices(source_volume(subjects[si], Contrast::PD), o);
      t2_st = extract_slices(source_volume(subjects[si], Contrast::T2), o);
    }
    const std::size_t plane = static_cast<std::size_t>(syn.rows) * syn.cols;
    for (std::size_t i = 0; i < syn.slices.size(); ++i) {
      SlicePair p;
      p.condition = Tensor<float>({with_sources ? 3 : 1, syn.rows, syn.cols});
      for (std::size_t j = 0; j < plane; ++j)
        p.condition.data[j] = syn.slices[i][j];
      if (with_sources) {
        for (std::size_t j = 0; j < plane; ++j) {
          p.condition.data[plane + j] = pd_st->slices[i][j];
          p.condition.data[2 * plane + j] = t2_st->slices[i][j];
        }
      }
      p.target = slice_to_tensor(tgt, i);
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

}  // namespace detail

// Sequential training: stage A on (PD, T2) -> T1 axial slices; each
// refinement stage on slices of the frozen earlier stages' output against
// the target, along its own orientation. Returns models for all three
// stages (untrained refinements stay zero-head identities).
inline std::pair<PipelineModels, PipelineHistory> train_pipeline(
    const std::vector<SubjectVolumes>& train,
    const std::vector<SubjectVolumes>& val, const PipelineTrainConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("pipeline: empty train split");
  detail::validate_pipeline_stages(cfg.stages);
  for (const SubjectVolumes& s : train) {
    validate_subject(s);
    if (!s.target)
      throw std::invalid_argument("pipeline: train subject '" + s.id +
                                  "' has no target volume");
  }
  for (const SubjectVolumes& s : val) {
    validate_subject(s);
    if (!s.target)
      throw std::invalid_argument("pipeline: val subject '" + s.id +
                                  "' has no target volume");
  }

  PipelineModels models;
  models.master_seed = cfg.master_seed;
  models.epochs_per_stage = cfg.epochs_per_stage;
  models.axial_cfg = GeneratorConfig{2, 1, cfg.base_channels, cfg.depth,
                                     /*residual_mode=*/false, 2};
  models.refine_cfg =
      GeneratorConfig{cfg.refine_sees_sources ? 3 : 1, 1, cfg.base_channels,
                      cfg.depth, /*residual_mode=*/true, 2};

  // Stage seeds: master + stage index (0 axial, 1 coronal, 2 sagittal).
  auto stage_seed = [&](Orientation o) {
    return cfg.master_seed + static_cast<std::uint64_t>(o);
  };
  auto stage_train_cfg = [&](Orientation o) {
    StageTrainConfig t;
    t.epochs = cfg.epochs_per_stage;
    t.batch_size = cfg.batch_size;
    t.lambda_pix = cfg.lambda_pix;
    t.adam = cfg.adam;
    t.rng_seed = stage_seed(o);
    return t;
  };

  // Untrained defaults: identity refinements, stage-seeded.
  models.g_coronal = build_generator<float>(
      models.refine_cfg, derive_seed(stage_seed(Orientation::Coronal), 1));
  models.g_sagittal = build_generator<float>(
      models.refine_cfg, derive_seed(stage_seed(Orientation::Sagittal), 1));

  PipelineHistory history;

  // --- Stage A ---
  {
    std::vector<SlicePair> pairs;
    for (const SubjectVolumes& s : train) {
      const int nz = s.sources.begin()->second.dims.nz;
      SliceStack tgt = extract_slices(*s.target, Orientation::Axial);
      for (int z = 0; z < nz; ++z) {
        SlicePair p;
        p.condition = detail::axial_condition_slice(s, z);
        p.target = detail::slice_to_tensor(tgt, static_cast<std::size_t>(z));
        pairs.push_back(std::move(p));
      }
    }
    DiscriminatorConfig dcfg;
    dcfg.in_channels = models.axial_cfg.in_channels + 1;
    dcfg.base_channels = cfg.base_channels;
    StageResult<float> res = train_stage(
        pairs, stage_train_cfg(Orientation::Axial), models.axial_cfg, dcfg);
    models.g_axial = std::move(res.generator);
    models.trained_stages.push_back(Orientation::Axial);

    PipelineStageRecord rec;
    rec.orientation = Orientation::Axial;
    rec.history = std::move(res.history);
    rec.n_val = static_cast<int>(val.size());
    for (const SubjectVolumes& s : val)
      rec.val_psnr_mean += psnr(*s.target, synthesize_stage1(models.g_axial, s));
    if (!val.empty()) rec.val_psnr_mean /= static_cast<double>(val.size());
    history.stages.push_back(std::move(rec));
  }

  // Current synthesized volumes for the training split (frozen stages).
  std::vector<Volume> current;
  current.reserve(train.size());
  for (const SubjectVolumes& s : train)
    current.push_back(synthesize_stage1(models.g_axial, s));

  // --- Refinement stages ---
  for (std::size_t stage_i = 1; stage_i < cfg.stages.size(); ++stage_i) {
    const Orientation o = cfg.stages[stage_i];
    std::vector<SlicePair> pairs = detail::refinement_pairs(
        train, current, o, cfg.refine_sees_sources);
    DiscriminatorConfig dcfg;
    dcfg.in_channels = models.refine_cfg.in_channels + 1;
    dcfg.base_channels = cfg.base_channels;
    StageResult<float> res =
        train_stage(pairs, stage_train_cfg(o), models.refine_cfg, dcfg);
    (o == Orientation::Coronal ? models.g_coronal : models.g_sagittal) =
        std::move(res.generator);
    models.trained_stages.push_back(o);

    for (std::size_t si = 0; si < train.size(); ++si)
      current[si] = refine_stage(
          (o == Orientation::Coronal ? models.g_coronal : models.g_sagittal),
          current[si], o, cfg.refine_sees_sources ? &train[si] : nullptr);

    PipelineStageRecord rec;
    rec.orientation = o;
    rec.history = std::move(res.history);
    rec.n_val = static_cast<int>(val.size());
    for (const SubjectVolumes& s : val)
      rec.val_psnr_mean += psnr(*s.target, run_pipeline(models, s).final);
    if (!val.empty()) rec.val_psnr_mean /= static_cast<double>(val.size());
    history.stages.push_back(std::move(rec));
  }

  return {std::move(models), std::move(history)};
}

}  // namespace provox
