#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "rtsim/evalkit/metrics.hpp"
#include "rtsim/geometry/kdtree.hpp"
#include "rtsim/geometry/ply.hpp"

namespace rtsim::surface {

enum class QualityBin { Blue, Green, Red, Over };

inline const char* to_string(QualityBin b) {
  switch (b) {
    case QualityBin::Blue: return "blue";
    case QualityBin::Green: return "green";
    case QualityBin::Red: return "red";
    case QualityBin::Over: return "over";
  }
  return "?";
}

struct BinCounts {
  std::size_t blue = 0, green = 0, red = 0, over = 0;
};

struct QualityMap {
  std::vector<double> quality;  // per vertex, mm to the nearest reference point
  evalkit::MetricsReport summary;
  std::array<double, 3> thresholds{1.0, 3.0, 5.0};
  /// One-sided Hausdorff distance from points sampled over the faces; only
  /// set when quality_map was asked for a sample density.
  std::optional<double> sampled_hausdorff_mm;

  QualityBin bin(double q) const {
    if (q < thresholds[0]) return QualityBin::Blue;
    if (q < thresholds[1]) return QualityBin::Green;
    if (q < thresholds[2]) return QualityBin::Red;
    return QualityBin::Over;
  }

  BinCounts counts() const {
    BinCounts c;
    for (double q : quality) {
      switch (bin(q)) {
        case QualityBin::Blue: ++c.blue; break;
        case QualityBin::Green: ++c.green; break;
        case QualityBin::Red: ++c.red; break;
        case QualityBin::Over: ++c.over; break;
      }
    }
    return c;
  }
};

inline std::array<std::uint8_t, 3> bin_color(QualityBin b) {
  switch (b) {
    case QualityBin::Blue: return {0, 0, 255};
    case QualityBin::Green: return {0, 255, 0};
    case QualityBin::Red: return {255, 0, 0};
    case QualityBin::Over: return {128, 128, 128};
  }
  return {0, 0, 0};
}

/// Uniform random points over the mesh surface, about `density` per mm^2
/// (at least one per face). Deterministic for a given seed.
inline std::vector<Vec3> sample_surface(const TriMesh& mesh, double density, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> out;
  for (std::size_t f = 0; f < mesh.triangle_count(); ++f) {
    const auto c = mesh.corners(f);
    const double area = triangle_area(c[0], c[1], c[2]);
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(area * density)));
    for (std::size_t i = 0; i < n; ++i) {
      double r1 = unit(rng), r2 = unit(rng);
      if (r1 + r2 > 1.0) {
        r1 = 1.0 - r1;
        r2 = 1.0 - r2;
      }
      out.push_back(c[0] + r1 * (c[1] - c[0]) + r2 * (c[2] - c[0]));
    }
  }
  return out;
}

/// Per-vertex distance from `mesh` to the nearest point of `reference`.
/// A positive `sample_density` (samples per mm^2) additionally measures the
/// one-sided Hausdorff distance from face samples to the reference.
inline QualityMap quality_map(const TriMesh& mesh, const PointCloud& reference, double sample_density = 0.0) {
  if (reference.empty()) throw QualityError("quality map needs a non-empty reference cloud");
  if (mesh.vertex_count() == 0) throw QualityError("quality map needs a non-empty mesh");
  if (!(sample_density >= 0.0)) throw QualityError("sample density must be non-negative");
  const KdTree tree(reference.points());
  QualityMap qm;
  qm.quality.resize(mesh.vertex_count());
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    qm.quality[i] = std::sqrt(tree.nearest(mesh.vertices()[i]).distance_sq);
  }
  qm.summary = evalkit::metrics(qm.quality);
  if (sample_density > 0.0 && !mesh.empty()) {
    double worst = 0.0;
    for (const Vec3& p : sample_surface(mesh, sample_density)) worst = std::max(worst, tree.nearest(p).distance_sq);
    qm.sampled_hausdorff_mm = std::sqrt(worst);
  }
  return qm;
}

/// Keeps vertices with quality <= cutoff, the faces whose three vertices
/// all survive, and no orphans. Vertex order is preserved.
inline TriMesh filter_by_cutoff(const TriMesh& mesh, const QualityMap& qmap, double cutoff) {
  if (qmap.quality.size() != mesh.vertex_count()) throw QualityError("quality map does not belong to this mesh");
  std::vector<char> keep(mesh.vertex_count());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = qmap.quality[i] <= cutoff;
  std::vector<char> used(mesh.vertex_count(), 0);
  std::vector<Triangle> faces;
  for (const Triangle& t : mesh.triangles()) {
    if (keep[t[0]] && keep[t[1]] && keep[t[2]]) {
      faces.push_back(t);
      used[t[0]] = used[t[1]] = used[t[2]] = 1;
    }
  }
  if (faces.empty()) throw QualityError("quality filter removed every face");
  std::vector<std::uint32_t> remap(mesh.vertex_count(), 0);
  std::vector<Vec3> verts;
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (!used[i]) continue;
    remap[i] = static_cast<std::uint32_t>(verts.size());
    verts.push_back(mesh.vertices()[i]);
  }
  for (Triangle& t : faces) t = {remap[t[0]], remap[t[1]], remap[t[2]]};
  return TriMesh(std::move(verts), std::move(faces));
}

inline double quality_cutoff(const QualityMap& qmap, double k = 3.0) { return k * qmap.summary.rmse_mm; }

/// Removes vertices whose quality exceeds k * RMSE, with their faces.
inline TriMesh filter_by_quality(const TriMesh& mesh, const QualityMap& qmap, double k = 3.0) {
  if (!(k > 0.0)) throw QualityError("filter multiplier must be positive");
  return filter_by_cutoff(mesh, qmap, quality_cutoff(qmap, k));
}

/// PLY with a float "quality" vertex property and uchar red/green/blue bin colors.
inline void write_quality_ply(std::ostream& out, const TriMesh& mesh, const QualityMap& qmap,
                              ply::Format format = ply::Format::BinaryLittleEndian) {
  if (qmap.quality.size() != mesh.vertex_count()) throw QualityError("quality map does not belong to this mesh");
  std::vector<ply::VertexProperty> extras = {{"quality", ply::VertexProperty::Type::Float32, qmap.quality},
                                             {"red", ply::VertexProperty::Type::UInt8, {}},
                                             {"green", ply::VertexProperty::Type::UInt8, {}},
                                             {"blue", ply::VertexProperty::Type::UInt8, {}}};
  for (double q : qmap.quality) {
    const auto rgb = bin_color(qmap.bin(q));
    for (int c = 0; c < 3; ++c) extras[1 + c].values.push_back(rgb[c]);
  }
  ply::write(out, mesh.vertices(), {}, mesh.triangles(), format, extras);
}

inline void write_quality_ply(const std::string& path, const TriMesh& mesh, const QualityMap& qmap,
                              ply::Format format = ply::Format::BinaryLittleEndian) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write_quality_ply(out, mesh, qmap, format);
}

inline nlohmann::json to_json(const QualityMap& q) {
  const BinCounts c = q.counts();
  nlohmann::json j = {{"summary", evalkit::to_json(q.summary)},
                      {"thresholds_mm", q.thresholds},
                      {"bins", {{"blue", c.blue}, {"green", c.green}, {"red", c.red}, {"over", c.over}}}};
  if (q.sampled_hausdorff_mm) j["sampled_hausdorff_mm"] = *q.sampled_hausdorff_mm;
  return j;
}

}  // namespace rtsim::surface
