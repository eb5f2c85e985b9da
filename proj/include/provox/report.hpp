#pragma once

// Evaluation reports as JSON files with a fixed schema, plus the
// human-readable comparison line between two reports ("X.XX dB higher PSNR
// and YY.YY% lower FID compared to <method>").

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "provox/metrics.hpp"

namespace provox {

inline nlohmann::ordered_json report_to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["psnr_mean"] = r.psnr_mean;
  j["psnr_std"] = r.psnr_std;
  j["psnr_per_subject"] = r.psnr_per_subject;
  j["fid"] = r.fid;
  nlohmann::ordered_json di;
  const Orientation order[3] = {Orientation::Axial, Orientation::Coronal,
                                Orientation::Sagittal};
  for (Orientation o : order) {
    const auto it = r.di_delta.find(o);
    di[orientation_name(o)] = it == r.di_delta.end() ? 0.0 : it->second;
  }
  j["di_delta"] = std::move(di);
  j["method"] = r.method;
  j["dataset_id"] = r.dataset_id;
  j["seed"] = r.seed;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

// Checks the full schema: all required keys present with the right shapes,
// all numbers finite.
inline void validate_report_json(const nlohmann::json& j) {
  const char* number_keys[] = {"psnr_mean", "psnr_std", "fid", "wall_seconds"};
  for (const char* k : number_keys) {
    if (!j.contains(k) || !j.at(k).is_number())
      throw std::runtime_error(std::string("report: missing numeric key \"") +
                               k + "\"");
    if (!std::isfinite(j.at(k).get<double>()))
      throw std::runtime_error(std::string("report: non-finite value for \"") +
                               k + "\"");
  }
  if (!j.contains("psnr_per_subject") || !j.at("psnr_per_subject").is_array())
    throw std::runtime_error(
        "report: missing array key \"psnr_per_subject\"");
  for (const auto& v : j.at("psnr_per_subject"))
    if (!v.is_number() || !std::isfinite(v.get<double>()))
      throw std::runtime_error("report: non-finite psnr_per_subject entry");
  if (!j.contains("di_delta") || !j.at("di_delta").is_object())
    throw std::runtime_error("report: missing object key \"di_delta\"");
  for (const char* o : {"axial", "coronal", "sagittal"}) {
    if (!j.at("di_delta").contains(o) || !j.at("di_delta").at(o).is_number())
      throw std::runtime_error(std::string("report: di_delta missing \"") + o +
                               "\"");
    if (!std::isfinite(j.at("di_delta").at(o).get<double>()))
      throw std::runtime_error(std::string("report: non-finite di_delta.") + o);
  }
  for (const char* k : {"method", "dataset_id"})
    if (!j.contains(k) || !j.at(k).is_string())
      throw std::runtime_error(std::string("report: missing string key \"") +
                               k + "\"");
  if (!j.contains("seed") || !j.at("seed").is_number_unsigned())
    throw std::runtime_error("report: missing unsigned key \"seed\"");
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  validate_report_json(j);
  MetricReport r;
  r.psnr_mean = j.at("psnr_mean").get<double>();
  r.psnr_std = j.at("psnr_std").get<double>();
  r.psnr_per_subject = j.at("psnr_per_subject").get<std::vector<double>>();
  r.fid = j.at("fid").get<double>();
  r.di_delta[Orientation::Axial] = j.at("di_delta").at("axial").get<double>();
  r.di_delta[Orientation::Coronal] =
      j.at("di_delta").at("coronal").get<double>();
  r.di_delta[Orientation::Sagittal] =
      j.at("di_delta").at("sagittal").get<double>();
  r.method = j.at("method").get<std::string>();
  r.dataset_id = j.at("dataset_id").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

inline void write_report(const std::filesystem::path& path,
                         const MetricReport& r) {
  std::ofstream f(path, std::ios::trunc);
  if (!f)
    throw std::runtime_error("report: cannot open for writing: " +
                             path.string());
  f << report_to_json(r).dump(2) << "\n";
  if (!f) throw std::runtime_error("report: write failed: " + path.string());
}

inline MetricReport read_report(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f)
    throw std::runtime_error("report: cannot open: " + path.string());
  return report_from_json(nlohmann::json::parse(f));
}

// One-line comparison in the style "X.XX dB higher PSNR and YY.YY% lower FID
// compared to <method>", describing report `a` relative to baseline `b`.
// Signs are resolved into higher/lower words; magnitudes print with two
// decimals. FID deltas are relative to the baseline's FID.
inline std::string format_comparison(const MetricReport& a,
                                     const MetricReport& b) {
  const double dpsnr = a.psnr_mean - b.psnr_mean;
  double fid_pct;
  if (b.fid == 0.0) {
    if (a.fid != 0.0)
      throw std::runtime_error(
          "report: baseline FID is zero; relative FID delta undefined");
    fid_pct = 0.0;
  } else {
    fid_pct = (b.fid - a.fid) / b.fid * 100.0;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%.2f dB %s PSNR and %.2f%% %s FID compared to %s",
                std::fabs(dpsnr), dpsnr >= 0.0 ? "higher" : "lower",
                std::fabs(fid_pct), fid_pct >= 0.0 ? "lower" : "higher",
                b.method.c_str());
  return std::string(buf);
}

}  // namespace provox
