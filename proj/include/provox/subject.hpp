#pragma once

// Multi-contrast subject container: PD/T2 source volumes and an optional T1
// target, all sharing dimensions.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "provox/volume.hpp"

namespace provox {

enum class Contrast { T1, T2, PD };

inline const char* contrast_name(Contrast c) {
  switch (c) {
    case Contrast::T1: return "t1";
    case Contrast::T2: return "t2";
    case Contrast::PD: return "pd";
  }
  throw std::invalid_argument("contrast: invalid value");
}

inline Contrast contrast_from_name(const std::string& name) {
  if (name == "t1") return Contrast::T1;
  if (name == "t2") return Contrast::T2;
  if (name == "pd") return Contrast::PD;
  throw std::invalid_argument("contrast: unknown name '" + name + "'");
}

struct SubjectVolumes {
  std::string id;
  std::map<Contrast, Volume> sources;  // PD and T2
  std::optional<Volume> target;        // T1
};

// Fixed source channel order fed to the stage-1 generator.
inline const Contrast kSourceOrder[2] = {Contrast::PD, Contrast::T2};

inline void validate_subject(const SubjectVolumes& s) {
  if (s.sources.empty())
    throw std::invalid_argument("subject '" + s.id + "': no source volumes");
  const VolumeDims dims = s.sources.begin()->second.dims;
  for (const auto& [contrast, volume] : s.sources) {
    (void)contrast;
    if (!(volume.dims.nz == dims.nz && volume.dims.ny == dims.ny &&
          volume.dims.nx == dims.nx))
      throw std::invalid_argument("subject '" + s.id +
                                  "': source volume dims differ");
  }
  if (s.target && !(s.target->dims.nz == dims.nz &&
                    s.target->dims.ny == dims.ny &&
                    s.target->dims.nx == dims.nx))
    throw std::invalid_argument("subject '" + s.id +
                                "': target dims differ from sources");
}

}  // namespace provox
