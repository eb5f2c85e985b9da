#pragma once

// OVOL volume file format, fully specified:
//   "OVOL" (4 bytes) | version u8 = 1 | nz, ny, nx little-endian u32 |
//   dtype u8 = 1 (32-bit little-endian IEEE float) | payload nz*ny*nx
//   floats, row-major (z, y, x).
// Sidecar <name>.json (".ovol" replaced by ".json"):
//   {subject, contrast, scale_max, seed}.
// All multi-byte values are serialized byte-by-byte, so files are identical
// across hosts.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "provox/volume.hpp"

namespace provox {

constexpr char kOvolMagic[4] = {'O', 'V', 'O', 'L'};
constexpr std::uint8_t kOvolVersion = 1;
constexpr std::uint8_t kOvolDtypeF32 = 1;

struct VolumeSidecar {
  std::string subject;
  std::string contrast;
  double scale_max = 1.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& ovol) {
  std::filesystem::path p = ovol;
  p.replace_extension(".json");
  return p;
}

}  // namespace detail

inline std::string encode_volume(const Volume& v) {
  std::string out;
  out.reserve(13 + v.data.size() * 4);
  out.append(kOvolMagic, 4);
  out.push_back(static_cast<char>(kOvolVersion));
  detail::put_u32le(out, static_cast<std::uint32_t>(v.dims.nz));
  detail::put_u32le(out, static_cast<std::uint32_t>(v.dims.ny));
  detail::put_u32le(out, static_cast<std::uint32_t>(v.dims.nx));
  out.push_back(static_cast<char>(kOvolDtypeF32));
  for (float f : v.data)
    detail::put_u32le(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline Volume decode_volume(const std::string& bytes) {
  constexpr std::size_t header = 4 + 1 + 12 + 1;
  if (bytes.size() < header)
    throw std::runtime_error("ovol: truncated header");
  const unsigned char* p =
      reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::string(bytes.data(), 4) != std::string(kOvolMagic, 4))
    throw std::runtime_error("ovol: bad magic");
  if (p[4] != kOvolVersion)
    throw std::runtime_error("ovol: bad version " + std::to_string(p[4]));
  const std::uint32_t nz = detail::get_u32le(p + 5);
  const std::uint32_t ny = detail::get_u32le(p + 9);
  const std::uint32_t nx = detail::get_u32le(p + 13);
  if (p[17] != kOvolDtypeF32)
    throw std::runtime_error("ovol: bad dtype " + std::to_string(p[17]));
  if (nz == 0 || ny == 0 || nx == 0)
    throw std::runtime_error("ovol: zero dimension in header");
  const std::size_t count =
      static_cast<std::size_t>(nz) * ny * nx;
  const std::size_t expect = count * 4;
  const std::size_t have = bytes.size() - header;
  if (have != expect)
    throw std::runtime_error(
        "ovol: payload length mismatch (truncated payload or trailing "
        "bytes): expected " +
        std::to_string(expect) + " bytes, found " + std::to_string(have));
  Volume v(VolumeDims{static_cast<int>(nz), static_cast<int>(ny),
                      static_cast<int>(nx)});
  for (std::size_t i = 0; i < count; ++i)
    v.data[i] = std::bit_cast<float>(detail::get_u32le(p + header + i * 4));
  return v;
}

inline void write_volume(const std::filesystem::path& path, const Volume& v,
                         const VolumeSidecar& sidecar) {
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("ovol: cannot open for write: " +
                                     path.string());
    const std::string bytes = encode_volume(v);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("ovol: write failed: " + path.string());
  }
  nlohmann::ordered_json j;
  j["subject"] = sidecar.subject;
  j["contrast"] = sidecar.contrast;
  j["scale_max"] = sidecar.scale_max;
  j["seed"] = sidecar.seed;
  std::ofstream f(detail::sidecar_path(path), std::ios::trunc);
  if (!f)
    throw std::runtime_error("ovol: cannot open sidecar for write: " +
                             detail::sidecar_path(path).string());
  f << j.dump(2) << "\n";
}

inline Volume read_volume(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("ovol: cannot open: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  return decode_volume(bytes);
}

inline VolumeSidecar read_sidecar(const std::filesystem::path& ovol_path) {
  const std::filesystem::path p = detail::sidecar_path(ovol_path);
  std::ifstream f(p);
  if (!f) throw std::runtime_error("ovol: cannot open sidecar: " + p.string());
  nlohmann::json j = nlohmann::json::parse(f);
  VolumeSidecar s;
  s.subject = j.at("subject").get<std::string>();
  s.contrast = j.at("contrast").get<std::string>();
  s.scale_max = j.at("scale_max").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

}  // namespace provox
