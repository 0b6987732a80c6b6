#pragma once

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtsim/scan/camera.hpp"

namespace rtsim::scan {

// DepthFrame file: "DPF1", uint32 width, uint32 height, float32 fx fy cx cy,
// then width*height uint16 depths, row-major from the top row. Little-endian.

namespace detail {
template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("DPF1: truncated file");
  return v;
}
}  // namespace detail

inline void write_depth_frame(std::ostream& out, const DepthFrame& f) {
  const CameraIntrinsics& k = f.intrinsics();
  out.write("DPF1", 4);
  detail::put<std::uint32_t>(out, k.width);
  detail::put<std::uint32_t>(out, k.height);
  detail::put<float>(out, static_cast<float>(k.fx));
  detail::put<float>(out, static_cast<float>(k.fy));
  detail::put<float>(out, static_cast<float>(k.cx));
  detail::put<float>(out, static_cast<float>(k.cy));
  out.write(reinterpret_cast<const char*>(f.depths().data()),
            static_cast<std::streamsize>(f.depths().size() * sizeof(std::uint16_t)));
  if (!out) throw FormatError("DPF1: write failed");
}

inline DepthFrame read_depth_frame(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "DPF1", 4) != 0) throw FormatError("DPF1: bad magic");
  CameraIntrinsics k;
  k.width = detail::get<std::uint32_t>(in);
  k.height = detail::get<std::uint32_t>(in);
  k.fx = detail::get<float>(in);
  k.fy = detail::get<float>(in);
  k.cx = detail::get<float>(in);
  k.cy = detail::get<float>(in);
  if (k.width == 0 || k.height == 0 || k.width > 16384 || k.height > 16384) {
    throw FormatError("DPF1: implausible image size");
  }
  std::vector<std::uint16_t> depths(k.pixel_count());
  in.read(reinterpret_cast<char*>(depths.data()), static_cast<std::streamsize>(depths.size() * sizeof(std::uint16_t)));
  if (!in) throw FormatError("DPF1: truncated depth data");
  return DepthFrame(k, std::move(depths));
}

inline void write_depth_frame(const std::string& path, const DepthFrame& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write_depth_frame(out, f);
}

inline DepthFrame read_depth_frame(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return read_depth_frame(in);
}

// Rig file: JSON array of {camera_id, rotation: 9 floats row-major, translation_mm: 3 floats}.

inline nlohmann::json rig_to_json(std::span<const CameraPose> rig) {
  nlohmann::json arr = nlohmann::json::array();
  for (const CameraPose& c : rig) {
    const Mat3& r = c.pose.rotation();
    const Vec3& t = c.pose.translation();
    nlohmann::json rot = nlohmann::json::array();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) rot.push_back(r(i, j));
    }
    arr.push_back({{"camera_id", c.camera_id}, {"rotation", rot}, {"translation_mm", {t.x(), t.y(), t.z()}}});
  }
  return arr;
}

inline std::vector<CameraPose> rig_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw FormatError("rig: expected a JSON array");
  std::vector<CameraPose> rig;
  try {
    for (const auto& e : j) {
      const auto rot = e.at("rotation").get<std::vector<double>>();
      const auto tr = e.at("translation_mm").get<std::vector<double>>();
      if (rot.size() != 9 || tr.size() != 3) throw FormatError("rig: rotation needs 9 values, translation 3");
      Mat3 r;
      for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) r(i, k) = rot[static_cast<std::size_t>(3 * i + k)];
      }
      rig.push_back({e.at("camera_id").get<std::string>(),
                     RigidTransform::from_approximate(r, Vec3(tr[0], tr[1], tr[2]))});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("rig: ") + ex.what());
  } catch (const GeometryError& ex) {
    throw FormatError(std::string("rig: ") + ex.what());
  }
  return rig;
}

inline std::vector<CameraPose> read_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("rig: ") + ex.what());
  }
  return rig_from_json(j);
}

inline void write_rig(const std::string& path, std::span<const CameraPose> rig) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << rig_to_json(rig).dump(2) << '\n';
}

}  // namespace rtsim::scan
