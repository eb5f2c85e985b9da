#include "provox/cli.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "provox/phantom.hpp"
#include "provox/report.hpp"

namespace fs = std::filesystem;
using namespace provox;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           (tag + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string file_head(const fs::path& p, std::size_t n) {
  std::ifstream f(p, std::ios::binary);
  std::string head(n, '\0');
  f.read(head.data(), static_cast<std::streamsize>(n));
  head.resize(static_cast<std::size_t>(f.gcount()));
  return head;
}

}  // namespace

TEST(CliUsage, HelpListsSubcommands) {
  const CliRun r = cli({"help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("subcommands:"), std::string::npos);
  EXPECT_NE(r.out.find("report-compare"), std::string::npos);
  EXPECT_TRUE(r.err.empty());
}

TEST(CliUsage, MissingSubcommandExitsTwo) {
  const CliRun r = cli({});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("usage error: missing subcommand"), std::string::npos);
}

TEST(CliUsage, UnknownSubcommandExitsTwo) {
  const CliRun r = cli({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown subcommand \"frobnicate\""),
            std::string::npos);
}

TEST(CliUsage, PhantomRequiresGenSubcommand) {
  const CliRun r = cli({"phantom", "rm"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("phantom: expected subcommand \"gen\""),
            std::string::npos);
}

TEST(CliUsage, FlagErrorsAreSpecific) {
  CliRun r = cli({"phantom", "gen", "--n-train", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing required flag"), std::string::npos);

  r = cli({"train", "--data"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("flag --data needs a value"), std::string::npos);

  r = cli({"train", "--bogus", "x"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown flag \"--bogus\""), std::string::npos);

  r = cli({"evaluate", "refs"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unexpected argument \"refs\""), std::string::npos);

  r = cli({"phantom", "gen", "--n-train", "abc", "--n-val", "1", "--n-test",
           "1", "--size", "16", "--seed", "1", "--out", "x"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("needs an integer, got \"abc\""), std::string::npos);

  r = cli({"phantom", "gen", "--n-train", "1", "--n-val", "1", "--n-test",
           "1", "--size", "16", "--seed", "7x", "--out", "x"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("needs an unsigned integer, got \"7x\""),
            std::string::npos);

  r = cli({"phantom", "gen", "--n-train", "1", "--n-val", "1", "--n-test",
           "1", "--size", "16", "--seed", "1", "--out", "x", "--noise-std",
           "much"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("needs a number, got \"much\""), std::string::npos);
}

TEST(CliStages, ParsesInOrderSubsetsOnly) {
  EXPECT_EQ(detail::parse_stages("axial"),
            (std::vector<Orientation>{Orientation::Axial}));
  EXPECT_EQ(detail::parse_stages("axial,coronal,sagittal"),
            (std::vector<Orientation>{Orientation::Axial, Orientation::Coronal,
                                      Orientation::Sagittal}));
  EXPECT_EQ(detail::parse_stages("axial,sagittal"),
            (std::vector<Orientation>{Orientation::Axial,
                                      Orientation::Sagittal}));
  EXPECT_THROW(detail::parse_stages("coronal"), UsageError);
  EXPECT_THROW(detail::parse_stages("axial,axial"), UsageError);
  EXPECT_THROW(detail::parse_stages("sagittal,coronal"), UsageError);
  EXPECT_THROW(detail::parse_stages("axial,bogus"), UsageError);
  EXPECT_THROW(detail::parse_stages(""), UsageError);
}

TEST(CliPhantom, GenWritesDatasetAndHonorsOverwrite) {
  TempDir tmp("cli-gen");
  const std::string out = (tmp.path / "data").string();
  const std::vector<std::string> gen_args = {
      "phantom", "gen", "--n-train", "2", "--n-val", "1", "--n-test", "1",
      "--size", "16", "--seed", "3", "--out", out};
  CliRun r = cli(gen_args);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("dataset: " + out), std::string::npos);
  EXPECT_TRUE(fs::exists(tmp.path / "data" / "manifest.json"));

  r = cli(gen_args);  // directory now non-empty
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("not empty"), std::string::npos);

  std::vector<std::string> force = gen_args;
  force.push_back("--overwrite");
  r = cli(force);
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST(CliSynthesize, EmptyModelsDirectoryIsRuntimeError) {
  TempDir tmp("cli-nomodels");
  const CliRun gen = cli({"phantom", "gen", "--n-train", "1", "--n-val", "1",
                          "--n-test", "1", "--size", "16", "--seed", "4",
                          "--out", (tmp.path / "data").string()});
  ASSERT_EQ(gen.code, 0) << gen.err;
  fs::create_directories(tmp.path / "models");
  const CliRun r = cli({"synthesize", "--models",
                        (tmp.path / "models").string(), "--input",
                        (tmp.path / "data").string(), "--out",
                        (tmp.path / "syn").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("no pipeline.json or baseline.json"),
            std::string::npos);
}

TEST(CliChain, PipelineSmokeFromPhantomToComparison) {
  TempDir tmp("cli-chain");
  const std::string data = (tmp.path / "data").string();
  const std::string models = (tmp.path / "models").string();
  const std::string syn = (tmp.path / "syn").string();
  const std::string report = (tmp.path / "report.json").string();

  CliRun r = cli({"phantom", "gen", "--n-train", "2", "--n-val", "1",
                  "--n-test", "1", "--size", "16", "--seed", "5", "--out",
                  data});
  ASSERT_EQ(r.code, 0) << r.err;

  r = cli({"train", "--data", data, "--out", models, "--seed", "5",
           "--epochs", "1", "--base", "8", "--depth", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("saved pipeline to " + models), std::string::npos);
  EXPECT_TRUE(fs::exists(tmp.path / "models" / "pipeline.json"));

  r = cli({"synthesize", "--models", models, "--input", data, "--out", syn});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("synthesized 1 volumes"), std::string::npos);
  const DatasetSplits splits = load_dataset(data);
  const std::string test_id = splits.manifest.test.at(0);
  ASSERT_TRUE(fs::exists(tmp.path / "syn" / (test_id + "_t1.ovol")));

  // Synthesized volumes against the reference targets.
  r = cli({"evaluate", "--refs", data, "--syns", syn, "--report", report,
           "--method", "pipeline", "--seed", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const MetricReport rep = read_report(report);
  EXPECT_EQ(rep.method, "pipeline");
  EXPECT_EQ(rep.seed, 5u);
  EXPECT_EQ(rep.dataset_id, "phantom-5-16");  // derived from the manifest
  EXPECT_EQ(rep.psnr_per_subject.size(), 1u);
  EXPECT_GT(rep.psnr_mean, 0.0);
  EXPECT_GE(rep.wall_seconds, 0.0);

  // A directory evaluated against itself sits at the metric ceilings.
  const std::string self_report = (tmp.path / "self.json").string();
  r = cli({"evaluate", "--refs", data, "--syns", data, "--report",
           self_report, "--method", "identity"});
  ASSERT_EQ(r.code, 0) << r.err;
  const MetricReport self = read_report(self_report);
  EXPECT_EQ(self.psnr_mean, 99.0);
  EXPECT_LE(self.fid, 1e-6);

  const std::string montage = (tmp.path / "fig.pgm").string();
  r = cli({"montage", "--ref",
           (fs::path(data) / (test_id + "_t1.ovol")).string(), "--volume",
           (fs::path(syn) / (test_id + "_t1.ovol")).string(), "--out",
           montage});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(file_head(montage, 3), "P5\n");

  r = cli({"report-compare", "--a", report, "--b", self_report});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("compared to identity"), std::string::npos);
  EXPECT_NE(r.out.find(" dB "), std::string::npos);
  EXPECT_NE(r.out.find("% "), std::string::npos);
}

TEST(CliChain, MontageWithoutVolumesIsUsageError) {
  TempDir tmp("cli-montage");
  const CliRun gen = cli({"phantom", "gen", "--n-train", "1", "--n-val", "1",
                          "--n-test", "1", "--size", "16", "--seed", "6",
                          "--out", (tmp.path / "data").string()});
  ASSERT_EQ(gen.code, 0) << gen.err;
  const DatasetSplits splits = load_dataset((tmp.path / "data").string());
  const std::string ref =
      (tmp.path / "data" / (splits.manifest.test.at(0) + "_t1.ovol"))
          .string();
  const CliRun r = cli({"montage", "--ref", ref, "--out",
                        (tmp.path / "fig.pgm").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("at least one --volume"), std::string::npos);
}

TEST(CliBaseline, VolumetricTrainSynthesizeAndKindValidation) {
  TempDir tmp("cli-baseline");
  const std::string data = (tmp.path / "data").string();
  const std::string bl = (tmp.path / "baseline").string();
  CliRun r = cli({"phantom", "gen", "--n-train", "2", "--n-val", "1",
                  "--n-test", "1", "--size", "16", "--seed", "9", "--out",
                  data});
  ASSERT_EQ(r.code, 0) << r.err;

  r = cli({"train-baseline", "--kind", "3d", "--data", data, "--out", bl,
           "--seed", "9", "--epochs", "1", "--base", "8", "--depth", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(tmp.path / "baseline" / "baseline.json"));
  EXPECT_TRUE(fs::exists(tmp.path / "baseline" / "g_3d.ockp"));

  r = cli({"synthesize", "--models", bl, "--input", data, "--out",
           (tmp.path / "syn3d").string(), "--split", "val"});
  ASSERT_EQ(r.code, 0) << r.err;
  const DatasetSplits splits = load_dataset(data);
  EXPECT_TRUE(fs::exists(tmp.path / "syn3d" /
                         (splits.manifest.val.at(0) + "_t1.ovol")));

  r = cli({"train-baseline", "--kind", "4d", "--data", data, "--out", bl,
           "--seed", "9"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--kind must be 2d or 3d, got \"4d\""),
            std::string::npos);
}

TEST(CliBaseline, PlanarBaselineSavesPipelineLayout) {
  TempDir tmp("cli-2d");
  const std::string data = (tmp.path / "data").string();
  CliRun r = cli({"phantom", "gen", "--n-train", "2", "--n-val", "1",
                  "--n-test", "1", "--size", "16", "--seed", "11", "--out",
                  data});
  ASSERT_EQ(r.code, 0) << r.err;
  r = cli({"train-baseline", "--kind", "2d", "--data", data, "--out",
           (tmp.path / "planar").string(), "--seed", "11", "--epochs", "1",
           "--base", "8", "--depth", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("saved 2d baseline"), std::string::npos);
  EXPECT_TRUE(fs::exists(tmp.path / "planar" / "pipeline.json"));
  r = cli({"synthesize", "--models", (tmp.path / "planar").string(),
           "--input", data, "--out", (tmp.path / "syn2d").string()});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST(CliEvaluate, BadSplitNameIsUsageError) {
  TempDir tmp("cli-split");
  const std::string data = (tmp.path / "data").string();
  CliRun r = cli({"phantom", "gen", "--n-train", "1", "--n-val", "1",
                  "--n-test", "1", "--size", "16", "--seed", "12", "--out",
                  data});
  ASSERT_EQ(r.code, 0) << r.err;
  r = cli({"train", "--data", data, "--out", (tmp.path / "m").string(),
           "--seed", "12", "--epochs", "1", "--base", "8", "--depth", "2",
           "--stages", "axial"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = cli({"synthesize", "--models", (tmp.path / "m").string(), "--input",
           data, "--out", (tmp.path / "s").string(), "--split", "holdout"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--split must be train, val, or test"),
            std::string::npos);
}
