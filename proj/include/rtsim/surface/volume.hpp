#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtsim/geometry/types.hpp"

namespace rtsim::surface {

/// Regular scalar grid (CT intensities or signed distances) with x-fastest
/// sample ordering. Sample (i, j, k) sits at origin + spacing * (i, j, k).
struct ScalarVolume {
  std::array<std::size_t, 3> dims{0, 0, 0};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
  std::vector<float> samples;

  ScalarVolume() = default;
  ScalarVolume(std::array<std::size_t, 3> d, Vec3 sp, Vec3 org, float fill = 0.0f)
      : dims(d), spacing(sp), origin(org), samples(d[0] * d[1] * d[2], fill) {}

  void validate() const {
    if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2) throw GeometryError("volume needs at least 2 samples per axis");
    if (!(spacing.array() > 0.0).all() || !is_finite(spacing)) throw GeometryError("volume spacing must be positive");
    if (!is_finite(origin)) throw GeometryError("volume origin must be finite");
    if (samples.size() != dims[0] * dims[1] * dims[2]) throw GeometryError("volume sample count does not match dims");
  }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + dims[0] * (j + dims[1] * k); }
  float at(std::size_t i, std::size_t j, std::size_t k) const { return samples[index(i, j, k)]; }
  float& at(std::size_t i, std::size_t j, std::size_t k) { return samples[index(i, j, k)]; }

  Vec3 position(double i, double j, double k) const {
    return origin + spacing.cwiseProduct(Vec3(i, j, k));
  }

  /// Samples a field at every grid point.
  static ScalarVolume from_function(std::array<std::size_t, 3> d, Vec3 sp, Vec3 org,
                                    const std::function<double(const Vec3&)>& f) {
    ScalarVolume v(d, sp, org);
    for (std::size_t k = 0; k < d[2]; ++k) {
      for (std::size_t j = 0; j < d[1]; ++j) {
        for (std::size_t i = 0; i < d[0]; ++i) v.at(i, j, k) = static_cast<float>(f(v.position(i, j, k)));
      }
    }
    return v;
  }
};

// Header: {dims:[nx,ny,nz], spacing_mm:[..], origin_mm:[..], dtype:"i16"|"f32", data:"<path>"}
// The data path is resolved relative to the header's directory.

inline ScalarVolume read_volume(const std::string& header_path) {
  namespace fs = std::filesystem;
  std::ifstream hin(header_path);
  if (!hin) throw FormatError("cannot open '" + header_path + "'");
  ScalarVolume vol;
  std::string dtype;
  fs::path data_path;
  try {
    nlohmann::json h;
    hin >> h;
    const auto d = h.at("dims").get<std::vector<std::size_t>>();
    const auto sp = h.at("spacing_mm").get<std::vector<double>>();
    const auto org = h.at("origin_mm").get<std::vector<double>>();
    if (d.size() != 3 || sp.size() != 3 || org.size() != 3) throw FormatError("volume: dims/spacing/origin need 3 values");
    vol.dims = {d[0], d[1], d[2]};
    vol.spacing = Vec3(sp[0], sp[1], sp[2]);
    vol.origin = Vec3(org[0], org[1], org[2]);
    dtype = h.at("dtype").get<std::string>();
    data_path = h.at("data").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("volume header: ") + ex.what());
  }
  if (data_path.is_relative()) data_path = fs::path(header_path).parent_path() / data_path;
  const std::size_t n = vol.dims[0] * vol.dims[1] * vol.dims[2];
  std::ifstream din(data_path, std::ios::binary);
  if (!din) throw FormatError("cannot open volume data '" + data_path.string() + "'");
  vol.samples.resize(n);
  if (dtype == "f32") {
    din.read(reinterpret_cast<char*>(vol.samples.data()), static_cast<std::streamsize>(n * sizeof(float)));
  } else if (dtype == "i16") {
    std::vector<std::int16_t> raw(n);
    din.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(std::int16_t)));
    for (std::size_t i = 0; i < n; ++i) vol.samples[i] = raw[i];
  } else {
    throw FormatError("volume: unsupported dtype '" + dtype + "'");
  }
  if (!din) throw FormatError("volume: data file shorter than dims imply");
  vol.validate();
  return vol;
}

/// Writes header + raw file (`<header stem>.raw` next to the header).
inline void write_volume(const std::string& header_path, const ScalarVolume& vol, const std::string& dtype = "f32") {
  namespace fs = std::filesystem;
  vol.validate();
  const fs::path raw = fs::path(header_path).replace_extension(".raw");
  std::ofstream dout(raw, std::ios::binary);
  if (!dout) throw FormatError("cannot open '" + raw.string() + "' for writing");
  if (dtype == "f32") {
    dout.write(reinterpret_cast<const char*>(vol.samples.data()),
               static_cast<std::streamsize>(vol.samples.size() * sizeof(float)));
  } else if (dtype == "i16") {
    for (float s : vol.samples) {
      const auto v = static_cast<std::int16_t>(std::clamp(std::lround(s), -32768L, 32767L));
      dout.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  } else {
    throw FormatError("volume: unsupported dtype '" + dtype + "'");
  }
  nlohmann::json h = {{"dims", {vol.dims[0], vol.dims[1], vol.dims[2]}},
                      {"spacing_mm", {vol.spacing.x(), vol.spacing.y(), vol.spacing.z()}},
                      {"origin_mm", {vol.origin.x(), vol.origin.y(), vol.origin.z()}},
                      {"dtype", dtype},
                      {"data", raw.filename().string()}};
  std::ofstream hout(header_path);
  if (!hout) throw FormatError("cannot open '" + header_path + "' for writing");
  hout << h.dump(2) << '\n';
}

}  // namespace rtsim::surface
