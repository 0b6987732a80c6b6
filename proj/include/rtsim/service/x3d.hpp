#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rtsim/machine/kinematics.hpp"

// X3D subset: Scene / Transform / Shape / IndexedFaceSet / Coordinate.
// Coordinates stay in millimeters.
namespace rtsim::x3d {

struct Options {
  int precision = 10;  // significant digits for coordinates
};

namespace detail {

inline void put_number(std::string& out, double v, int precision) {
  char buf[64];
  if (v == 0.0) v = 0.0;  // no "-0"
  const int n = std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  out.append(buf, static_cast<std::size_t>(n));
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void put_shape(std::string& out, const std::string& name, const RigidTransform& pose, const TriMesh& mesh,
                      const Options& opt) {
  const Eigen::AngleAxisd aa(pose.rotation());
  Vec3 axis = aa.axis();
  double angle = aa.angle();
  if (!(std::abs(angle) > 0.0)) {
    axis = Vec3::UnitZ();
    angle = 0.0;
  }
  const Vec3& t = pose.translation();
  out += "    <Transform DEF=\"" + escape(name) + "\" translation=\"";
  for (int i = 0; i < 3; ++i) {
    if (i) out += ' ';
    put_number(out, t[i], 17);
  }
  out += "\" rotation=\"";
  for (int i = 0; i < 3; ++i) {
    put_number(out, axis[i], 17);
    out += ' ';
  }
  put_number(out, angle, 17);
  out += "\">\n      <Shape>\n        <IndexedFaceSet solid=\"false\" coordIndex=\"";
  const auto& tris = mesh.triangles();
  for (std::size_t f = 0; f < tris.size(); ++f) {
    if (f) out += ' ';
    for (std::uint32_t v : tris[f]) {
      out += std::to_string(v);
      out += ' ';
    }
    out += "-1";
  }
  out += "\">\n          <Coordinate point=\"";
  const auto& verts = mesh.vertices();
  for (std::size_t i = 0; i < verts.size(); ++i) {
    if (i) out += ", ";
    for (int k = 0; k < 3; ++k) {
      if (k) out += ' ';
      put_number(out, verts[i][k], opt.precision);
    }
  }
  out += "\"/>\n        </IndexedFaceSet>\n      </Shape>\n    </Transform>\n";
}

inline std::string header() {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<!DOCTYPE X3D PUBLIC \"ISO//Web3D//DTD X3D 3.3//EN\" \"http://www.web3d.org/specifications/x3d-3.3.dtd\">\n"
         "<X3D profile=\"Interchange\" version=\"3.3\">\n  <Scene>\n";
}

inline std::string footer() { return "  </Scene>\n</X3D>\n"; }

}  // namespace detail

/// One mesh under an identity Transform.
inline std::string export_mesh(const TriMesh& mesh, const std::string& name = "patient", const Options& opt = {}) {
  std::string out = detail::header();
  detail::put_shape(out, name, RigidTransform(), mesh, opt);
  out += detail::footer();
  return out;
}

/// Every posed component as a Transform (its world pose) around its local mesh.
inline std::string export_scene(const machine::PosedScene& scene, const Options& opt = {}) {
  std::string out = detail::header();
  for (const machine::PosedComponent& c : scene.components) detail::put_shape(out, c.name, c.world, *c.mesh, opt);
  out += detail::footer();
  return out;
}

struct Shape {
  std::string name;  // DEF of the innermost named Transform, if any
  TriMesh mesh;      // world coordinates
};

namespace detail {

struct Tag {
  std::string name;
  std::map<std::string, std::string> attrs;
  bool closing = false;
  bool self_closing = false;
};

class Scanner {
 public:
  explicit Scanner(std::string_view text) : s_(text) {}

  /// Next element tag; skips text, comments, declarations and processing instructions.
  bool next(Tag& tag) {
    while (true) {
      const auto lt = s_.find('<', pos_);
      if (lt == std::string_view::npos) return false;
      pos_ = lt;
      if (s_.compare(pos_, 4, "<!--") == 0) {
        const auto end = s_.find("-->", pos_);
        if (end == std::string_view::npos) throw FormatError("X3D: unterminated comment");
        pos_ = end + 3;
        continue;
      }
      if (s_.compare(pos_, 2, "<?") == 0 || s_.compare(pos_, 2, "<!") == 0) {
        const auto end = s_.find('>', pos_);
        if (end == std::string_view::npos) throw FormatError("X3D: unterminated declaration");
        pos_ = end + 1;
        continue;
      }
      break;
    }
    ++pos_;
    tag = Tag{};
    if (peek() == '/') {
      tag.closing = true;
      ++pos_;
    }
    tag.name = ident();
    if (tag.name.empty()) throw FormatError("X3D: malformed tag");
    while (true) {
      skip_space();
      const char c = peek();
      if (c == '>') {
        ++pos_;
        return true;
      }
      if (c == '/') {
        pos_ += 1;
        if (peek() != '>') throw FormatError("X3D: malformed tag end");
        ++pos_;
        tag.self_closing = true;
        return true;
      }
      const std::string key = ident();
      if (key.empty()) throw FormatError("X3D: malformed attribute in <" + tag.name + ">");
      skip_space();
      if (peek() != '=') throw FormatError("X3D: attribute '" + key + "' without value");
      ++pos_;
      skip_space();
      const char quote = peek();
      if (quote != '"' && quote != '\'') throw FormatError("X3D: unquoted attribute '" + key + "'");
      const auto end = s_.find(quote, pos_ + 1);
      if (end == std::string_view::npos) throw FormatError("X3D: unterminated attribute '" + key + "'");
      tag.attrs[key] = unescape(s_.substr(pos_ + 1, end - pos_ - 1));
      pos_ = end + 1;
    }
  }

 private:
  char peek() const {
    if (pos_ >= s_.size()) throw FormatError("X3D: unexpected end of document");
    return s_[pos_];
  }
  void skip_space() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  std::string ident() {
    const auto start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == ':' || s_[pos_] == '-')) {
      ++pos_;
    }
    return std::string(s_.substr(start, pos_ - start));
  }
  static std::string unescape(std::string_view v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] != '&') {
        out += v[i];
        continue;
      }
      const auto semi = v.find(';', i);
      if (semi == std::string_view::npos) throw FormatError("X3D: bad entity");
      const auto ent = v.substr(i + 1, semi - i - 1);
      if (ent == "amp") out += '&';
      else if (ent == "lt") out += '<';
      else if (ent == "gt") out += '>';
      else if (ent == "quot") out += '"';
      else if (ent == "apos") out += '\'';
      else throw FormatError("X3D: unknown entity");
      i = semi;
    }
    return out;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

inline std::vector<double> numbers(const std::string& s) {
  std::vector<double> out;
  const char* p = s.data();
  const char* end = p + s.size();
  while (p < end) {
    while (p < end && (std::isspace(static_cast<unsigned char>(*p)) || *p == ',')) ++p;
    if (p >= end) break;
    double v = 0.0;
    const auto r = std::from_chars(p, end, v);
    if (r.ec != std::errc()) throw FormatError("X3D: bad number list");
    out.push_back(v);
    p = r.ptr;
  }
  return out;
}

inline RigidTransform transform_of(const Tag& t) {
  Vec3 tr = Vec3::Zero();
  if (auto it = t.attrs.find("translation"); it != t.attrs.end()) {
    const auto v = numbers(it->second);
    if (v.size() != 3) throw FormatError("X3D: translation needs 3 numbers");
    tr = Vec3(v[0], v[1], v[2]);
  }
  Mat3 r = Mat3::Identity();
  if (auto it = t.attrs.find("rotation"); it != t.attrs.end()) {
    const auto v = numbers(it->second);
    if (v.size() != 4) throw FormatError("X3D: rotation needs 4 numbers");
    const Vec3 axis(v[0], v[1], v[2]);
    if (axis.norm() > 0.0) r = Eigen::AngleAxisd(v[3], axis.normalized()).toRotationMatrix();
  }
  return RigidTransform::from_approximate(r, tr);
}

}  // namespace detail

/// Reads the subset written by export_mesh / export_scene (nested
/// Transforms compose; polygons are fan-triangulated).
inline std::vector<Shape> import(std::string_view text) {
  detail::Scanner scan(text);
  detail::Tag tag;
  std::vector<RigidTransform> stack = {RigidTransform()};
  std::vector<std::string> names = {""};
  std::vector<Shape> shapes;
  std::vector<std::int64_t> pending_index;
  bool in_faceset = false;
  bool seen_root = false;
  while (scan.next(tag)) {
    if (tag.name == "X3D") {
      seen_root = true;
      continue;
    }
    if (tag.name == "Transform") {
      if (tag.closing) {
        if (stack.size() <= 1) throw FormatError("X3D: unbalanced </Transform>");
        stack.pop_back();
        names.pop_back();
      } else if (!tag.self_closing) {
        stack.push_back(stack.back() * detail::transform_of(tag));
        auto def = tag.attrs.find("DEF");
        names.push_back(def != tag.attrs.end() ? def->second : names.back());
      }
      continue;
    }
    if (tag.name == "IndexedFaceSet") {
      if (tag.closing) {
        in_faceset = false;
        continue;
      }
      in_faceset = !tag.self_closing;
      pending_index.clear();
      if (auto it = tag.attrs.find("coordIndex"); it != tag.attrs.end()) {
        for (double v : detail::numbers(it->second)) pending_index.push_back(static_cast<std::int64_t>(v));
      }
      continue;
    }
    if (tag.name == "Coordinate" && !tag.closing) {
      if (!in_faceset) throw FormatError("X3D: Coordinate outside IndexedFaceSet");
      const auto pts = detail::numbers(tag.attrs.count("point") ? tag.attrs.at("point") : std::string());
      if (pts.size() % 3 != 0) throw FormatError("X3D: point list length is not a multiple of 3");
      std::vector<Vec3> verts;
      for (std::size_t i = 0; i < pts.size(); i += 3) verts.push_back(stack.back().apply(Vec3(pts[i], pts[i + 1], pts[i + 2])));
      std::vector<Triangle> tris;
      std::vector<std::uint32_t> poly;
      auto flush = [&] {
        for (std::size_t k = 1; k + 1 < poly.size(); ++k) tris.push_back({poly[0], poly[k], poly[k + 1]});
        poly.clear();
      };
      for (std::int64_t idx : pending_index) {
        if (idx == -1) {
          flush();
        } else if (idx < 0 || static_cast<std::size_t>(idx) >= verts.size()) {
          throw FormatError("X3D: coordIndex out of range");
        } else {
          poly.push_back(static_cast<std::uint32_t>(idx));
        }
      }
      flush();
      shapes.push_back({names.back(), TriMesh(std::move(verts), std::move(tris))});
    }
  }
  if (!seen_root) throw FormatError("X3D: no <X3D> root element");
  return shapes;
}

}  // namespace rtsim::x3d
