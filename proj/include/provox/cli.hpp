#pragma once

// Command-line surface. `run_cli` is an in-process entry point (argv minus
// the program name) so the full surface is testable without spawning
// processes. Exit codes: 0 success, 1 runtime failure ("error: ..." on the
// error stream), 2 usage error ("usage error: ...").

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "provox/baselines.hpp"
#include "provox/checkpoint.hpp"
#include "provox/metrics.hpp"
#include "provox/montage.hpp"
#include "provox/phantom.hpp"
#include "provox/pipeline.hpp"
#include "provox/report.hpp"

namespace provox {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

class ArgMap {
 public:
  ArgMap(const std::vector<std::string>& tokens,
         std::set<std::string> value_flags, std::set<std::string> bool_flags)
      : value_flags_(std::move(value_flags)),
        bool_flags_(std::move(bool_flags)) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const std::string& t = tokens[i];
      if (t.rfind("--", 0) != 0)
        throw UsageError("unexpected argument \"" + t + "\"");
      if (bool_flags_.count(t)) {
        bools_.insert(t);
      } else if (value_flags_.count(t)) {
        if (i + 1 >= tokens.size())
          throw UsageError("flag " + t + " needs a value");
        values_[t].push_back(tokens[++i]);
      } else {
        throw UsageError("unknown flag \"" + t + "\"");
      }
    }
  }

  bool flag(const std::string& name) const { return bools_.count(name) > 0; }
  bool has(const std::string& name) const { return values_.count(name) > 0; }

  const std::string& get(const std::string& name) const {
    const auto it = values_.find(name);
    if (it == values_.end()) throw UsageError("missing required flag " + name);
    return it->second.back();
  }

  std::string get_or(const std::string& name, std::string fallback) const {
    const auto it = values_.find(name);
    return it == values_.end() ? std::move(fallback) : it->second.back();
  }

  const std::vector<std::string>& all(const std::string& name) const {
    static const std::vector<std::string> kEmpty;
    const auto it = values_.find(name);
    return it == values_.end() ? kEmpty : it->second;
  }

  long long get_int(const std::string& name) const {
    return parse_int(name, get(name));
  }
  long long get_int_or(const std::string& name, long long fallback) const {
    return has(name) ? get_int(name) : fallback;
  }
  std::uint64_t get_u64(const std::string& name) const {
    const std::string& s = get(name);
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw UsageError("flag " + name + " needs an unsigned integer, got \"" +
                       s + "\"");
    }
  }
  double get_double_or(const std::string& name, double fallback) const {
    if (!has(name)) return fallback;
    const std::string& s = get(name);
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw UsageError("flag " + name + " needs a number, got \"" + s + "\"");
    }
  }

 private:
  static long long parse_int(const std::string& name, const std::string& s) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw UsageError("flag " + name + " needs an integer, got \"" + s +
                       "\"");
    }
  }

  std::set<std::string> value_flags_, bool_flags_;
  std::map<std::string, std::vector<std::string>> values_;
  std::set<std::string> bools_;
};

inline const char* cli_usage() {
  return
      "provox — progressive multi-orientation volume synthesis\n"
      "\n"
      "subcommands:\n"
      "  phantom gen --n-train N --n-val N --n-test N --size S --seed S\n"
      "              --out DIR [--noise-std X] [--overwrite]\n"
      "  train --data DIR --out DIR --seed S [--stages axial,coronal,sagittal]\n"
      "        [--epochs N] [--batch N] [--base N] [--depth N]\n"
      "        [--refine-sees-sources]\n"
      "  train-baseline --kind 2d|3d --data DIR --out DIR --seed S\n"
      "        [--epochs N] [--batch N] [--base N] [--depth N]\n"
      "  synthesize --models DIR --input DIR --out DIR [--split test]\n"
      "  evaluate --refs DIR --syns DIR --report FILE [--method NAME]\n"
      "           [--dataset-id ID] [--seed S]\n"
      "  montage --ref FILE --volume FILE [--volume FILE ...] --out FILE\n"
      "  report-compare --a FILE --b FILE\n";
}

inline std::vector<Orientation> parse_stages(const std::string& spec) {
  std::vector<Orientation> stages;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = spec.find(',', start);
    const std::string name =
        spec.substr(start, comma == std::string::npos ? std::string::npos
                                                      : comma - start);
    try {
      stages.push_back(orientation_from_name(name));
    } catch (const std::exception&) {
      throw UsageError("--stages: unknown stage \"" + name + "\"");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  for (std::size_t i = 1; i < stages.size(); ++i)
    if (static_cast<int>(stages[i]) <= static_cast<int>(stages[i - 1]))
      throw UsageError(
          "--stages: must be an in-order subset of axial,coronal,sagittal");
  if (stages.empty() || stages.front() != Orientation::Axial)
    throw UsageError("--stages: must start with axial");
  return stages;
}

// Subject ids found as <id>_t1.ovol in a directory, sorted for determinism.
inline std::vector<std::string> subject_ids_in(
    const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::string> ids;
  const std::string suffix = "_t1.ovol";
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline const std::vector<std::string>& manifest_split(
    const DatasetManifest& m, const std::string& split) {
  if (split == "train") return m.train;
  if (split == "val") return m.val;
  if (split == "test") return m.test;
  throw UsageError("--split must be train, val, or test, got \"" + split +
                   "\"");
}

inline int cmd_phantom_gen(const std::vector<std::string>& rest,
                           std::ostream& out) {
  ArgMap a(rest,
           {"--n-train", "--n-val", "--n-test", "--size", "--seed", "--out",
            "--noise-std"},
           {"--overwrite"});
  const DatasetManifest m = generate_dataset(
      static_cast<int>(a.get_int("--n-train")),
      static_cast<int>(a.get_int("--n-val")),
      static_cast<int>(a.get_int("--n-test")),
      static_cast<int>(a.get_int("--size")), a.get_u64("--seed"),
      a.get("--out"), a.get_double_or("--noise-std", 0.02),
      a.flag("--overwrite"));
  out << "dataset: " << a.get("--out") << " (train " << m.train.size()
      << ", val " << m.val.size() << ", test " << m.test.size() << ", size "
      << m.size << "^3, noise " << m.noise_std << ")\n";
  return 0;
}

inline PipelineTrainConfig pipeline_config_from_args(const ArgMap& a) {
  PipelineTrainConfig cfg;
  cfg.master_seed = a.get_u64("--seed");
  cfg.epochs_per_stage = static_cast<int>(a.get_int_or("--epochs", 3));
  cfg.batch_size = static_cast<int>(a.get_int_or("--batch", 4));
  cfg.base_channels = static_cast<int>(a.get_int_or("--base", 16));
  cfg.depth = static_cast<int>(a.get_int_or("--depth", 3));
  cfg.refine_sees_sources = a.flag("--refine-sees-sources");
  return cfg;
}

inline void print_pipeline_history(const PipelineHistory& h,
                                   std::ostream& out) {
  for (const PipelineStageRecord& rec : h.stages) {
    out << "stage " << orientation_name(rec.orientation) << ": ";
    if (!rec.history.epochs.empty()) {
      const EpochRecord& last = rec.history.epochs.back();
      out << "L1 " << last.mean_l1 << ", adv " << last.mean_adv;
    }
    if (rec.n_val > 0)
      out << ", val PSNR " << rec.val_psnr_mean << " dB (" << rec.n_val
          << " subjects)";
    out << "\n";
  }
}

inline int cmd_train(const std::vector<std::string>& rest, std::ostream& out) {
  ArgMap a(rest,
           {"--data", "--out", "--seed", "--stages", "--epochs", "--batch",
            "--base", "--depth"},
           {"--refine-sees-sources"});
  PipelineTrainConfig cfg = pipeline_config_from_args(a);
  cfg.stages = parse_stages(a.get_or("--stages", "axial,coronal,sagittal"));
  const DatasetSplits data = load_dataset(a.get("--data"));
  auto [models, history] = train_pipeline(data.train, data.val, cfg);
  save_pipeline(a.get("--out"), models);
  print_pipeline_history(history, out);
  out << "saved pipeline to " << a.get("--out") << "\n";
  return 0;
}

inline int cmd_train_baseline(const std::vector<std::string>& rest,
                              std::ostream& out) {
  ArgMap a(rest,
           {"--kind", "--data", "--out", "--seed", "--epochs", "--batch",
            "--base", "--depth"},
           {});
  const std::string kind = a.get("--kind");
  if (kind != "2d" && kind != "3d")
    throw UsageError("--kind must be 2d or 3d, got \"" + kind + "\"");
  const DatasetSplits data = load_dataset(a.get("--data"));
  const std::filesystem::path out_dir = a.get("--out");

  if (kind == "2d") {
    // The planar baseline is pipeline stage A alone: train it through the
    // pipeline (refinements stay identity) so comparisons are like-for-like.
    PipelineTrainConfig cfg = pipeline_config_from_args(a);
    cfg.stages = {Orientation::Axial};
    auto [models, history] = train_pipeline(data.train, data.val, cfg);
    save_pipeline(out_dir, models);
    print_pipeline_history(history, out);
    out << "saved 2d baseline to " << out_dir.string() << "\n";
    return 0;
  }

  Baseline3DConfig cfg;
  cfg.rng_seed = a.get_u64("--seed");
  cfg.epochs = static_cast<int>(a.get_int_or("--epochs", 3));
  cfg.batch_size = static_cast<int>(a.get_int_or("--batch", 2));
  cfg.base_channels = static_cast<int>(a.get_int_or("--base", 8));
  cfg.depth = static_cast<int>(a.get_int_or("--depth", 2));
  Model<float> model = train_3dgan(data.train, data.val, cfg);

  std::filesystem::create_directories(out_dir);
  CheckpointMeta meta;
  meta.seed = cfg.rng_seed;
  meta.config = {{"kind", "3d"},
                 {"base_channels", cfg.base_channels},
                 {"depth", cfg.depth},
                 {"epochs", cfg.epochs},
                 {"batch_size", cfg.batch_size}};
  save_model(out_dir / "g_3d.ockp", model, meta);
  nlohmann::ordered_json manifest;
  manifest["format"] = "provox-baseline";
  manifest["kind"] = "3d";
  manifest["file"] = "g_3d.ockp";
  manifest["seed"] = cfg.rng_seed;
  std::ofstream f(out_dir / "baseline.json", std::ios::trunc);
  if (!f)
    throw std::runtime_error("cannot write baseline manifest in " +
                             out_dir.string());
  f << manifest.dump(2) << "\n";
  out << "saved 3d baseline to " << out_dir.string() << "\n";
  return 0;
}

inline int cmd_synthesize(const std::vector<std::string>& rest,
                          std::ostream& out) {
  ArgMap a(rest, {"--models", "--input", "--out", "--split"}, {});
  const std::filesystem::path models_dir = a.get("--models");
  const std::filesystem::path input_dir = a.get("--input");
  const std::filesystem::path out_dir = a.get("--out");
  const std::string split = a.get_or("--split", "test");

  std::ifstream mf(input_dir / "manifest.json");
  if (!mf)
    throw std::runtime_error("synthesize: cannot open manifest.json in " +
                             input_dir.string());
  const DatasetManifest manifest =
      manifest_from_json(nlohmann::json::parse(mf));
  const std::vector<std::string>& ids = manifest_split(manifest, split);
  std::filesystem::create_directories(out_dir);

  auto write_synth = [&](const std::string& id, const Volume& v,
                         std::uint64_t seed) {
    VolumeSidecar sc;
    sc.subject = id;
    sc.contrast = "t1";
    sc.scale_max = 1.0;
    sc.seed = seed;
    write_volume(out_dir / (id + "_t1.ovol"), v, sc);
  };

  if (std::filesystem::exists(models_dir / "pipeline.json")) {
    const PipelineModels p = load_pipeline(models_dir);
    for (const std::string& id : ids) {
      const SubjectVolumes s = load_subject(input_dir, id, /*with_target=*/false);
      write_synth(id, run_pipeline(p, s).final, p.master_seed);
    }
  } else if (std::filesystem::exists(models_dir / "baseline.json")) {
    std::ifstream bf(models_dir / "baseline.json");
    const nlohmann::json bj = nlohmann::json::parse(bf);
    if (bj.at("kind").get<std::string>() != "3d")
      throw std::runtime_error("synthesize: unsupported baseline kind \"" +
                               bj.at("kind").get<std::string>() + "\"");
    const LoadedModel lm =
        load_model(models_dir / bj.at("file").get<std::string>());
    for (const std::string& id : ids) {
      const SubjectVolumes s = load_subject(input_dir, id, /*with_target=*/false);
      write_synth(id, synthesize_3dgan(lm.model, s), lm.meta.seed);
    }
  } else {
    throw std::runtime_error(
        "synthesize: no pipeline.json or baseline.json in " +
        models_dir.string());
  }
  out << "synthesized " << ids.size() << " volumes to " << out_dir.string()
      << "\n";
  return 0;
}

inline int cmd_evaluate(const std::vector<std::string>& rest,
                        std::ostream& out) {
  ArgMap a(rest,
           {"--refs", "--syns", "--report", "--method", "--dataset-id",
            "--seed"},
           {});
  const std::filesystem::path refs_dir = a.get("--refs");
  const std::filesystem::path syns_dir = a.get("--syns");
  const std::vector<std::string> ids = subject_ids_in(syns_dir);
  if (ids.empty())
    throw std::runtime_error("evaluate: no *_t1.ovol volumes in " +
                             syns_dir.string());

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Volume> refs, syns;
  for (const std::string& id : ids) {
    syns.push_back(read_volume(syns_dir / (id + "_t1.ovol")));
    refs.push_back(read_volume(refs_dir / (id + "_t1.ovol")));
  }
  const FeatureExtractor fe = make_feature_extractor();
  MetricReport report = evaluate_volumes(refs, syns, fe);
  report.method = a.get_or("--method", "unknown");
  report.seed = a.has("--seed") ? a.get_u64("--seed") : 0;

  std::string dataset_id = a.get_or("--dataset-id", "");
  if (dataset_id.empty()) {
    std::ifstream mf(refs_dir / "manifest.json");
    if (mf) {
      const DatasetManifest m = manifest_from_json(nlohmann::json::parse(mf));
      dataset_id = "phantom-" + std::to_string(m.master_seed) + "-" +
                   std::to_string(m.size);
    }
  }
  report.dataset_id = dataset_id;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  write_report(a.get("--report"), report);
  out << "report: " << a.get("--report") << " (psnr_mean " << report.psnr_mean
      << " dB, fid " << report.fid << ", " << ids.size() << " subjects)\n";
  return 0;
}

inline int cmd_montage(const std::vector<std::string>& rest,
                       std::ostream& out) {
  ArgMap a(rest, {"--ref", "--volume", "--out"}, {});
  std::vector<MontageEntry> entries;
  entries.push_back({"reference", read_volume(a.get("--ref"))});
  if (a.all("--volume").empty())
    throw UsageError("montage needs at least one --volume");
  for (const std::string& path : a.all("--volume"))
    entries.push_back(
        {std::filesystem::path(path).stem().string(), read_volume(path)});
  write_montage(entries, a.get("--out"));
  out << "montage: " << a.get("--out") << " (" << entries.size()
      << " rows)\n";
  return 0;
}

inline int cmd_report_compare(const std::vector<std::string>& rest,
                              std::ostream& out) {
  ArgMap a(rest, {"--a", "--b"}, {});
  const MetricReport ra = read_report(a.get("--a"));
  const MetricReport rb = read_report(a.get("--b"));
  out << format_comparison(ra, rb) << "\n";
  return 0;
}

inline int dispatch(const std::vector<std::string>& args, std::ostream& out) {
  if (args.empty()) throw UsageError("missing subcommand");
  const std::string& cmd = args[0];
  const std::vector<std::string> rest(args.begin() + 1, args.end());
  if (cmd == "help" || cmd == "--help" || cmd == "-h") {
    out << cli_usage();
    return 0;
  }
  if (cmd == "phantom") {
    if (rest.empty() || rest[0] != "gen")
      throw UsageError("phantom: expected subcommand \"gen\"");
    return cmd_phantom_gen({rest.begin() + 1, rest.end()}, out);
  }
  if (cmd == "train") return cmd_train(rest, out);
  if (cmd == "train-baseline") return cmd_train_baseline(rest, out);
  if (cmd == "synthesize") return cmd_synthesize(rest, out);
  if (cmd == "evaluate") return cmd_evaluate(rest, out);
  if (cmd == "montage") return cmd_montage(rest, out);
  if (cmd == "report-compare") return cmd_report_compare(rest, out);
  throw UsageError("unknown subcommand \"" + cmd + "\"");
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args,
                   std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  try {
    return detail::dispatch(args, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace provox
