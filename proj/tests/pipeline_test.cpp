#include <gtest/gtest.h>

#include <stdexcept>
#include <vector>

#include "provox/gan.hpp"
#include "provox/phantom.hpp"
#include "provox/pipeline.hpp"
#include "provox/volume.hpp"

namespace provox {
namespace {

std::vector<SubjectVolumes> phantom_subjects(std::uint64_t first_seed, int n,
                                             int size) {
  std::vector<SubjectVolumes> out;
  for (int i = 0; i < n; ++i)
    out.push_back(generate_phantom(first_seed + static_cast<std::uint64_t>(i),
                                   size, default_tissue_table(), 0.0)
                      .volumes);
  return out;
}

PipelineTrainConfig small_config(std::uint64_t seed) {
  PipelineTrainConfig cfg;
  cfg.master_seed = seed;
  cfg.epochs_per_stage = 1;
  cfg.batch_size = 4;
  cfg.base_channels = 8;
  cfg.depth = 2;
  return cfg;
}

bool models_equal(const Model<float>& a, const Model<float>& b) {
  if (a.weights.size() != b.weights.size()) return false;
  for (std::size_t i = 0; i < a.weights.size(); ++i)
    if (a.weights[i].data != b.weights[i].data ||
        a.biases[i].data != b.biases[i].data)
      return false;
  return true;
}

TEST(Pipeline, UntrainedRefinementsKeepAxialOutputBitwise) {
  const std::vector<SubjectVolumes> train = phantom_subjects(100, 2, 16);
  PipelineTrainConfig cfg = small_config(5);
  cfg.stages = {Orientation::Axial};  // leave both refinements untrained
  const auto [models, history] = train_pipeline(train, {}, cfg);
  ASSERT_EQ(models.trained_stages,
            (std::vector<Orientation>{Orientation::Axial}));

  for (const SubjectVolumes& s : phantom_subjects(200, 2, 16)) {
    const PipelineResult r = run_pipeline(models, s);
    const Volume direct = synthesize_stage1(models.g_axial, s);
    EXPECT_EQ(r.intermediates[0].data, direct.data);
    EXPECT_EQ(r.intermediates[1].data, direct.data);  // identity refinement
    EXPECT_EQ(r.intermediates[2].data, direct.data);
    EXPECT_EQ(r.final.data, direct.data);
  }
}

TEST(Pipeline, HistoryRecordsEveryStageInTrainingOrder) {
  const std::vector<SubjectVolumes> train = phantom_subjects(110, 2, 16);
  const std::vector<SubjectVolumes> val = phantom_subjects(120, 1, 16);
  PipelineTrainConfig cfg = small_config(6);
  cfg.epochs_per_stage = 2;
  const auto [models, history] = train_pipeline(train, val, cfg);

  ASSERT_EQ(history.stages.size(), 3u);
  EXPECT_EQ(history.stages[0].orientation, Orientation::Axial);
  EXPECT_EQ(history.stages[1].orientation, Orientation::Coronal);
  EXPECT_EQ(history.stages[2].orientation, Orientation::Sagittal);
  for (const PipelineStageRecord& rec : history.stages) {
    EXPECT_EQ(rec.history.epochs.size(), 2u);
    EXPECT_EQ(rec.n_val, 1);
    EXPECT_GT(rec.val_psnr_mean, 0.0);
  }
  EXPECT_EQ(models.trained_stages.size(), 3u);
  EXPECT_EQ(models.master_seed, 6u);
  EXPECT_EQ(models.epochs_per_stage, 2);
}

TEST(Pipeline, TrainingIsSeedDeterministic) {
  const std::vector<SubjectVolumes> train = phantom_subjects(130, 2, 16);
  const std::vector<SubjectVolumes> val = phantom_subjects(140, 1, 16);
  const PipelineTrainConfig cfg = small_config(7);
  const auto [ma, ha] = train_pipeline(train, val, cfg);
  const auto [mb, hb] = train_pipeline(train, val, cfg);
  EXPECT_TRUE(models_equal(ma.g_axial, mb.g_axial));
  EXPECT_TRUE(models_equal(ma.g_coronal, mb.g_coronal));
  EXPECT_TRUE(models_equal(ma.g_sagittal, mb.g_sagittal));
  for (std::size_t i = 0; i < ha.stages.size(); ++i)
    EXPECT_EQ(ha.stages[i].val_psnr_mean, hb.stages[i].val_psnr_mean);

  PipelineTrainConfig other = cfg;
  other.master_seed = 8;
  const auto [mc, hc] = train_pipeline(train, val, other);
  EXPECT_FALSE(models_equal(ma.g_axial, mc.g_axial));
}

TEST(Pipeline, OutputMatchesInputGridAndUnitRange) {
  const std::vector<SubjectVolumes> train = phantom_subjects(150, 2, 16);
  const auto [models, history] = train_pipeline(train, {}, small_config(9));
  const SubjectVolumes probe =
      phantom_subjects(160, 1, 16).front();
  const PipelineResult r = run_pipeline(models, probe);
  EXPECT_EQ(r.final.dims.nz, 16);
  EXPECT_EQ(r.final.dims.ny, 16);
  EXPECT_EQ(r.final.dims.nx, 16);
  for (const Volume& v : r.intermediates)
    for (float x : v.data) {
      ASSERT_GE(x, 0.0f);
      ASSERT_LE(x, 1.0f);
    }
}

TEST(Pipeline, RefinementPairsCarrySlicesOfCurrentAndTarget) {
  // Distinct constant planes make every slice identifiable.
  SubjectVolumes s;
  s.id = "probe";
  const VolumeDims dims{4, 3, 5};
  Volume pd(dims), t2(dims), t1(dims), cur(dims);
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 5; ++x) {
        pd.at(z, y, x) = 0.10f + 0.01f * y;
        t2.at(z, y, x) = 0.20f + 0.01f * y;
        t1.at(z, y, x) = 0.30f + 0.01f * y;
        cur.at(z, y, x) = 0.40f + 0.01f * y;
      }
  s.sources.emplace(Contrast::PD, pd);
  s.sources.emplace(Contrast::T2, t2);
  s.target = t1;

  const auto pairs = detail::refinement_pairs({s}, {cur},
                                              Orientation::Coronal, false);
  ASSERT_EQ(pairs.size(), 3u);  // one per coronal (y) index
  for (int y = 0; y < 3; ++y) {
    ASSERT_EQ(pairs[y].condition.shape, (std::vector<int>{1, 4, 5}));
    ASSERT_EQ(pairs[y].target.shape, (std::vector<int>{1, 4, 5}));
    for (std::size_t j = 0; j < 20; ++j) {
      ASSERT_FLOAT_EQ(pairs[y].condition.data[j], 0.40f + 0.01f * y);
      ASSERT_FLOAT_EQ(pairs[y].target.data[j], 0.30f + 0.01f * y);
    }
  }

  const auto with_src = detail::refinement_pairs({s}, {cur},
                                                 Orientation::Coronal, true);
  ASSERT_EQ(with_src[1].condition.shape, (std::vector<int>{3, 4, 5}));
  // Channel order: current synthesis, then PD, then T2.
  EXPECT_FLOAT_EQ(with_src[1].condition.data[0], 0.41f);
  EXPECT_FLOAT_EQ(with_src[1].condition.data[20], 0.11f);
  EXPECT_FLOAT_EQ(with_src[1].condition.data[40], 0.21f);
}

TEST(Pipeline, StageListValidation) {
  const std::vector<SubjectVolumes> train = phantom_subjects(170, 1, 16);
  PipelineTrainConfig cfg = small_config(11);
  cfg.stages = {};
  EXPECT_THROW(train_pipeline(train, {}, cfg), std::invalid_argument);
  cfg.stages = {Orientation::Coronal, Orientation::Axial};
  EXPECT_THROW(train_pipeline(train, {}, cfg), std::invalid_argument);
  cfg.stages = {Orientation::Axial, Orientation::Coronal,
                Orientation::Coronal};
  EXPECT_THROW(train_pipeline(train, {}, cfg), std::invalid_argument);
  EXPECT_THROW(train_pipeline({}, {}, small_config(11)),
               std::invalid_argument);
}

TEST(Pipeline, SkippedStageStaysIdentity) {
  const std::vector<SubjectVolumes> train = phantom_subjects(180, 2, 16);
  PipelineTrainConfig cfg = small_config(12);
  cfg.stages = {Orientation::Axial, Orientation::Sagittal};
  const auto [models, history] = train_pipeline(train, {}, cfg);
  ASSERT_EQ(history.stages.size(), 2u);
  EXPECT_EQ(history.stages[1].orientation, Orientation::Sagittal);

  const SubjectVolumes probe = phantom_subjects(190, 1, 16).front();
  const PipelineResult r = run_pipeline(models, probe);
  // Coronal was never trained: its stage is a strict pass-through.
  EXPECT_EQ(r.intermediates[1].data, r.intermediates[0].data);
  // Sagittal was trained: it actually changes the volume.
  EXPECT_NE(r.intermediates[2].data, r.intermediates[1].data);
}

TEST(Pipeline, SourceSeeingRefinementsTrainAndRun) {
  const std::vector<SubjectVolumes> train = phantom_subjects(210, 2, 16);
  PipelineTrainConfig cfg = small_config(13);
  cfg.refine_sees_sources = true;
  cfg.stages = {Orientation::Axial, Orientation::Coronal};
  const auto [models, history] = train_pipeline(train, {}, cfg);
  EXPECT_EQ(models.refine_cfg.in_channels, 3);
  const SubjectVolumes probe = phantom_subjects(220, 1, 16).front();
  const PipelineResult r = run_pipeline(models, probe);
  EXPECT_EQ(r.final.dims.count(), probe.target->dims.count());
}

TEST(Pipeline, StageEntryPointsValidateInputs) {
  const std::vector<SubjectVolumes> train = phantom_subjects(230, 1, 16);
  const auto [models, history] = train_pipeline(train, {}, small_config(14));

  SubjectVolumes missing = train.front();
  missing.sources.erase(Contrast::T2);
  EXPECT_THROW(synthesize_stage1(models.g_axial, missing),
               std::invalid_argument);
  // A sigmoid-head generator is not a residual refiner.
  EXPECT_THROW(refine_stage(models.g_axial, *train.front().target,
                            Orientation::Coronal),
               std::invalid_argument);
}

}  // namespace
}  // namespace provox
