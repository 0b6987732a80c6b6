#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rtsim/geometry/types.hpp"

// PLY interchange for point clouds and meshes. Reads ASCII and binary
// little-endian files with arbitrary extra properties; writes x,y,z (and
// optional nx,ny,nz) as float32 and faces as uchar count + int32 indices.
namespace rtsim::ply {

static_assert(std::endian::native == std::endian::little, "PLY binary I/O assumes a little-endian host");

enum class Format { Ascii, BinaryLittleEndian };

struct Data {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;  // empty unless nx,ny,nz were present
  std::vector<Triangle> faces;
  std::map<std::string, std::vector<double>> vertex_properties;  // every scalar vertex property by name
};

/// Extra per-vertex scalar properties appended after the coordinates.
struct VertexProperty {
  enum class Type { Float32, UInt8 };
  std::string name;
  Type type = Type::Float32;
  std::vector<double> values;
};

namespace detail {

enum class Scalar { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

inline Scalar parse_scalar(const std::string& s) {
  if (s == "char" || s == "int8") return Scalar::Int8;
  if (s == "uchar" || s == "uint8") return Scalar::UInt8;
  if (s == "short" || s == "int16") return Scalar::Int16;
  if (s == "ushort" || s == "uint16") return Scalar::UInt16;
  if (s == "int" || s == "int32") return Scalar::Int32;
  if (s == "uint" || s == "uint32") return Scalar::UInt32;
  if (s == "float" || s == "float32") return Scalar::Float32;
  if (s == "double" || s == "float64") return Scalar::Float64;
  throw FormatError("PLY: unknown scalar type '" + s + "'");
}

inline std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::Int8:
    case Scalar::UInt8: return 1;
    case Scalar::Int16:
    case Scalar::UInt16: return 2;
    case Scalar::Int32:
    case Scalar::UInt32:
    case Scalar::Float32: return 4;
    case Scalar::Float64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  Scalar type = Scalar::Float32;
  bool is_list = false;
  Scalar count_type = Scalar::UInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

template <class T>
T read_raw(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("PLY: unexpected end of binary data");
  return v;
}

inline double read_binary(std::istream& in, Scalar s) {
  switch (s) {
    case Scalar::Int8: return read_raw<std::int8_t>(in);
    case Scalar::UInt8: return read_raw<std::uint8_t>(in);
    case Scalar::Int16: return read_raw<std::int16_t>(in);
    case Scalar::UInt16: return read_raw<std::uint16_t>(in);
    case Scalar::Int32: return read_raw<std::int32_t>(in);
    case Scalar::UInt32: return read_raw<std::uint32_t>(in);
    case Scalar::Float32: return read_raw<float>(in);
    case Scalar::Float64: return read_raw<double>(in);
  }
  return 0.0;
}

inline double read_ascii(std::istream& in) {
  double v;
  if (!(in >> v)) throw FormatError("PLY: malformed ASCII value");
  return v;
}

template <class T>
void write_raw(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace detail

inline Data read(std::istream& in) {
  using namespace detail;
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw FormatError("PLY: missing magic");

  bool binary = false;
  std::vector<Element> elements;
  while (true) {
    if (!std::getline(in, line)) throw FormatError("PLY: header not terminated");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        throw FormatError("PLY: unsupported format '" + fmt + "'");
      }
    } else if (kw == "element") {
      Element e;
      ls >> e.name >> e.count;
      if (!ls) throw FormatError("PLY: malformed element line");
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty()) throw FormatError("PLY: property before element");
      Property p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar(ct);
        p.type = parse_scalar(it);
      } else {
        p.type = parse_scalar(type);
        ls >> p.name;
      }
      elements.back().properties.push_back(std::move(p));
    } else if (kw == "end_header") {
      break;
    }
    // comment / obj_info lines fall through
  }

  Data data;
  for (const Element& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    std::vector<double> scalars(e.properties.size());
    for (std::size_t i = 0; i < e.count; ++i) {
      std::vector<std::uint32_t> poly;
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const Property& p = e.properties[k];
        if (p.is_list) {
          const double cnt = binary ? read_binary(in, p.count_type) : read_ascii(in);
          if (cnt < 0) throw FormatError("PLY: negative list length");
          const auto n = static_cast<std::size_t>(cnt);
          const bool indices = is_face && (p.name == "vertex_indices" || p.name == "vertex_index");
          for (std::size_t j = 0; j < n; ++j) {
            const double v = binary ? read_binary(in, p.type) : read_ascii(in);
            if (indices) {
              if (v < 0) throw FormatError("PLY: negative vertex index");
              poly.push_back(static_cast<std::uint32_t>(v));
            }
          }
        } else {
          scalars[k] = binary ? read_binary(in, p.type) : read_ascii(in);
        }
      }
      if (is_vertex) {
        Vec3 v = Vec3::Zero();
        Vec3 n = Vec3::Zero();
        bool has_n = false;
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const std::string& name = e.properties[k].name;
          if (e.properties[k].is_list) continue;
          if (name == "x") v.x() = scalars[k];
          else if (name == "y") v.y() = scalars[k];
          else if (name == "z") v.z() = scalars[k];
          else if (name == "nx") { n.x() = scalars[k]; has_n = true; }
          else if (name == "ny") n.y() = scalars[k];
          else if (name == "nz") n.z() = scalars[k];
          data.vertex_properties[name].push_back(scalars[k]);
        }
        data.vertices.push_back(v);
        if (has_n) data.normals.push_back(n);
      } else if (is_face) {
        for (std::size_t j = 2; j < poly.size(); ++j) data.faces.push_back({poly[0], poly[j - 1], poly[j]});
      }
    }
  }
  if (!data.normals.empty() && data.normals.size() != data.vertices.size()) {
    throw FormatError("PLY: inconsistent normals");
  }
  return data;
}

inline Data read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return read(in);
}

inline TriMesh to_mesh(const Data& d) { return TriMesh(d.vertices, d.faces); }

/// Normals are renormalized on load since float32 storage loses unit length.
inline PointCloud to_point_cloud(const Data& d) {
  std::vector<Vec3> normals;
  normals.reserve(d.normals.size());
  for (const Vec3& n : d.normals) {
    const double len = n.norm();
    if (len <= 0.0) throw FormatError("PLY: zero-length normal");
    normals.push_back(n / len);
  }
  return PointCloud(d.vertices, std::move(normals));
}

inline TriMesh read_mesh(const std::string& path) { return to_mesh(read_file(path)); }
inline PointCloud read_point_cloud(const std::string& path) { return to_point_cloud(read_file(path)); }

inline void write(std::ostream& out, std::span<const Vec3> vertices, std::span<const Vec3> normals,
                  std::span<const Triangle> faces, Format format,
                  std::span<const VertexProperty> extras = {}) {
  using detail::write_raw;
  for (const VertexProperty& p : extras) {
    if (p.values.size() != vertices.size()) throw FormatError("PLY: extra property length mismatch");
  }
  out << "ply\n"
      << (format == Format::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "element vertex " << vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (!normals.empty()) out << "property float nx\nproperty float ny\nproperty float nz\n";
  for (const VertexProperty& p : extras) {
    out << "property " << (p.type == VertexProperty::Type::Float32 ? "float " : "uchar ") << p.name << "\n";
  }
  if (!faces.empty()) {
    out << "element face " << faces.size() << "\nproperty list uchar int vertex_indices\n";
  }
  out << "end_header\n";

  if (format == Format::Ascii) {
    out.precision(9);
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const Vec3& v = vertices[i];
      out << static_cast<float>(v.x()) << ' ' << static_cast<float>(v.y()) << ' ' << static_cast<float>(v.z());
      if (!normals.empty()) {
        const Vec3& n = normals[i];
        out << ' ' << static_cast<float>(n.x()) << ' ' << static_cast<float>(n.y()) << ' '
            << static_cast<float>(n.z());
      }
      for (const VertexProperty& p : extras) {
        if (p.type == VertexProperty::Type::Float32) {
          out << ' ' << static_cast<float>(p.values[i]);
        } else {
          out << ' ' << static_cast<int>(static_cast<std::uint8_t>(p.values[i]));
        }
      }
      out << '\n';
    }
    for (const Triangle& f : faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  } else {
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const Vec3& v = vertices[i];
      write_raw(out, static_cast<float>(v.x()));
      write_raw(out, static_cast<float>(v.y()));
      write_raw(out, static_cast<float>(v.z()));
      if (!normals.empty()) {
        const Vec3& n = normals[i];
        write_raw(out, static_cast<float>(n.x()));
        write_raw(out, static_cast<float>(n.y()));
        write_raw(out, static_cast<float>(n.z()));
      }
      for (const VertexProperty& p : extras) {
        if (p.type == VertexProperty::Type::Float32) {
          write_raw(out, static_cast<float>(p.values[i]));
        } else {
          write_raw(out, static_cast<std::uint8_t>(p.values[i]));
        }
      }
    }
    for (const Triangle& f : faces) {
      write_raw(out, std::uint8_t{3});
      for (std::uint32_t idx : f) write_raw(out, static_cast<std::int32_t>(idx));
    }
  }
  if (!out) throw FormatError("PLY: write failed");
}

inline void write_file(const std::string& path, std::span<const Vec3> vertices, std::span<const Vec3> normals,
                       std::span<const Triangle> faces, Format format, std::span<const VertexProperty> extras = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write(out, vertices, normals, faces, format, extras);
}

inline void write_mesh(const std::string& path, const TriMesh& m, Format format = Format::BinaryLittleEndian) {
  write_file(path, m.vertices(), {}, m.triangles(), format);
}

inline void write_point_cloud(const std::string& path, const PointCloud& pc,
                              Format format = Format::BinaryLittleEndian) {
  write_file(path, pc.points(), pc.normals(), {}, format);
}

inline std::string mesh_to_string(const TriMesh& m, Format format = Format::BinaryLittleEndian) {
  std::ostringstream out(std::ios::binary);
  write(out, m.vertices(), {}, m.triangles(), format);
  return out.str();
}

inline TriMesh mesh_from_string(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return to_mesh(read(in));
}

}  // namespace rtsim::ply
