#include <doctest.h>

#include <algorithm>

#include "support.hpp"

using namespace rtsim;
using namespace rtsim::surface;
using testing::Gen;

namespace {

double trilinear(const std::array<double, 8>& c, const Vec3& p) {
  double v = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double wx = (i & 1) ? p.x() : 1 - p.x();
    const double wy = (i & 2) ? p.y() : 1 - p.y();
    const double wz = (i & 4) ? p.z() : 1 - p.z();
    v += c[i] * wx * wy * wz;
  }
  return v;
}

ScalarVolume unit_cell(const std::array<double, 8>& c) {
  ScalarVolume v({2, 2, 2}, Vec3::Ones(), Vec3::Zero());
  for (int i = 0; i < 8; ++i) v.samples[v.index(i & 1, (i >> 1) & 1, (i >> 2) & 1)] = static_cast<float>(c[i]);
  return v;
}

/// Independent round-count oracle: each collapse on a closed manifold removes
/// two faces, so a quota q removes 2 * ceil(q / 2).
std::vector<std::size_t> expected_rounds(std::size_t n, std::size_t target, double fraction) {
  std::vector<std::size_t> out;
  while (n > target) {
    const auto q = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction));
    if (q == 0) break;
    n -= 2 * ((q + 1) / 2);
    out.push_back(n);
  }
  return out;
}

double sampled_hausdorff(const TriMesh& from, const TriMesh& to, double density) {
  const Bvh bvh(to);
  double worst = 0.0;
  for (const Vec3& p : sample_surface(from, density, 9)) worst = std::max(worst, bvh.closest_point(p).distance);
  for (const Vec3& p : from.vertices()) worst = std::max(worst, bvh.closest_point(p).distance);
  return worst;
}

}  // namespace

TEST_SUITE("surface") {

TEST_CASE("marching cubes sphere is watertight with the right area") {
  const TriMesh m = marching_cubes(testing::sphere_sdf(64, 50.0, 60.0), 0.0);
  const auto e = testing::edge_stats(m);
  CHECK(e.boundary == 0);
  CHECK(e.nonmanifold == 0);
  CHECK(testing::consistently_oriented(m));
  CHECK(testing::euler_characteristic(m) == 2);
  const double area = 4 * std::numbers::pi * 2500.0;
  CHECK(std::abs(m.surface_area() - area) / area < 0.02);
  CHECK(m.signed_volume() > 0.0);  // faces point outward, toward increasing distance
  for (const Vec3& v : m.vertices()) CHECK(std::abs(v.norm() - 50.0) < 0.5);
}

TEST_CASE("marching cubes trivial volumes") {
  ScalarVolume above({4, 4, 4}, Vec3::Ones(), Vec3::Zero(), 1.0f);
  CHECK(marching_cubes(above, 0.0).empty());
  CHECK(marching_cubes(above, 5.0).triangle_count() == 0);  // entirely inside: no surface either

  std::array<double, 8> c;
  c.fill(1.0);
  c[0] = -1.0;
  CHECK(marching_cubes(unit_cell(c), 0.0).triangle_count() == 1);
}

TEST_CASE("every cube configuration faces toward increasing values") {
  for (int cfg = 1; cfg < 255; ++cfg) {
    std::array<double, 8> c;
    for (int i = 0; i < 8; ++i) c[i] = (cfg >> i) & 1 ? -1.0 : 1.0;
    const TriMesh m = marching_cubes(unit_cell(c), 0.0);
    REQUIRE(!m.empty());
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
      const auto [a, b, d] = m.corners(t);
      const Vec3 n = (b - a).cross(d - a).normalized();
      const Vec3 g = (a + b + d) / 3.0;
      CHECK_MESSAGE(trilinear(c, g + 1e-3 * n) > trilinear(c, g - 1e-3 * n), "case " << cfg);
    }
  }
}

TEST_CASE("marching cubes closes random fields (property)") {
  Gen g(31);
  for (int trial = 0; trial < 10; ++trial) {
    // random blobs fully inside the grid: the surface must close
    const Vec3 c1 = g.point(8), c2 = g.point(8);
    const double r1 = g.uniform(3, 7), r2 = g.uniform(3, 7);
    const auto vol = ScalarVolume::from_function({33, 33, 33}, Vec3::Constant(1.0), Vec3::Constant(-16.0), [&](const Vec3& p) {
      return std::min((p - c1).norm() - r1, (p - c2).norm() - r2);
    });
    const TriMesh m = marching_cubes(vol, 0.0);
    CHECK(testing::edge_stats(m).boundary == 0);
    CHECK(testing::consistently_oriented(m));
    CHECK(m.signed_volume() > 0.0);
  }
}

TEST_CASE("inside_above flips the inside convention") {
  auto vol = testing::sphere_sdf(32, 10.0, 15.0);
  const TriMesh a = marching_cubes(vol, 0.0);
  for (float& s : vol.samples) s = -s;
  const TriMesh b = marching_cubes(vol, 0.0, {true});
  CHECK(b.triangle_count() == a.triangle_count());
  CHECK(b.signed_volume() == doctest::Approx(a.signed_volume()));
}

TEST_CASE("NaN samples") {
  auto vol = testing::sphere_sdf(16, 5.0, 8.0);
  vol.samples[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(marching_cubes(vol, 0.0), GeometryError);
  CHECK(mc::extract(vol, 0.0, true).triangle_count() == marching_cubes(testing::sphere_sdf(16, 5.0, 8.0), 0.0).triangle_count());
}

TEST_CASE("volume files round trip") {
  const auto dir = testing::scratch_dir("vol");
  const auto vol = testing::sphere_sdf(12, 4.0, 6.0);
  write_volume((dir / "v.json").string(), vol);
  const ScalarVolume back = read_volume((dir / "v.json").string());
  CHECK(back.dims == vol.dims);
  CHECK(back.samples == vol.samples);
  CHECK((back.origin - vol.origin).norm() < 1e-12);
  {
    std::ofstream h(dir / "bad.json");
    h << R"({"dims":[2,2,2],"spacing_mm":[1,1,1],"origin_mm":[0,0,0],"dtype":"f64","data":"v.raw"})";
  }
  CHECK_THROWS_AS(read_volume((dir / "bad.json").string()), FormatError);
  CHECK_THROWS_AS(read_volume((dir / "missing.json").string()), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("normal estimation") {
  Gen g(4);
  SUBCASE("plane, oriented toward the viewpoint") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 500; ++i) pts.push_back({g.uniform(-50, 50), g.uniform(-50, 50), 0.0});
    const auto n = estimate_normals(pts, 12, Vec3(0, 0, 100));
    for (const Vec3& v : n) CHECK(v.z() == doctest::Approx(1.0));
  }
  SUBCASE("sphere, consistently outward without a viewpoint") {
    const auto cloud = testing::sphere_cloud(3000, 40.0, 8);
    const auto n = estimate_normals(cloud.points(), 12, std::nullopt);
    std::size_t outward = 0;
    for (std::size_t i = 0; i < n.size(); ++i) outward += n[i].dot(cloud.points()[i]) > 0.0;
    CHECK(outward == n.size());
  }
  SUBCASE("degenerate neighborhoods") {
    std::vector<Vec3> line;
    for (int i = 0; i < 20; ++i) line.push_back({double(i), 0, 0});
    CHECK_THROWS_AS(estimate_normals(line, 5, std::nullopt), ReconstructionError);
  }
}

TEST_CASE("reconstruction of a sphere cloud") {
  const auto cloud = testing::sphere_cloud(30000, 50.0, 12);
  ReconParams p;
  p.grid_resolution = 128;
  const TriMesh m = reconstruct(cloud, p);
  CHECK(testing::edge_stats(m).boundary == 0);
  CHECK(m.signed_volume() > 0.0);
  const QualityMap q = quality_map(m, cloud);
  CHECK(q.summary.rmse_mm <= 1.4);
  double radial = 0.0;
  for (const Vec3& v : m.vertices()) radial = std::max(radial, std::abs(v.norm() - 50.0));
  CHECK(radial < 1.0);
}

TEST_CASE("reconstruction is invariant to duplicates and ordering") {
  const auto cloud = testing::sphere_cloud(5000, 30.0, 2);
  ReconParams p;
  p.grid_resolution = 48;
  const TriMesh base = reconstruct(cloud, p);

  std::vector<Vec3> pts = cloud.points(), nrm = cloud.normals();
  pts.insert(pts.end(), cloud.points().begin(), cloud.points().end());
  nrm.insert(nrm.end(), cloud.normals().begin(), cloud.normals().end());
  const TriMesh doubled = reconstruct(PointCloud(pts, nrm), p);

  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(3));
  std::vector<Vec3> sp, sn;
  for (std::size_t i : order) {
    sp.push_back(cloud.points()[i]);
    sn.push_back(cloud.normals()[i]);
  }
  const TriMesh shuffled = reconstruct(PointCloud(sp, sn), p);

  for (const TriMesh* other : {&doubled, &shuffled}) {
    REQUIRE(other->vertex_count() == base.vertex_count());
    CHECK(other->triangles() == base.triangles());
    double worst = 0.0;
    for (std::size_t i = 0; i < base.vertex_count(); ++i) {
      worst = std::max(worst, (other->vertices()[i] - base.vertices()[i]).norm());
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("reconstruction without normals estimates them") {
  const auto with = testing::sphere_cloud(8000, 40.0, 6);
  ReconParams p;
  p.grid_resolution = 64;
  const TriMesh m = reconstruct(PointCloud(with.points()), p);
  CHECK(m.signed_volume() > 0.0);
  CHECK(quality_map(m, with).summary.rmse_mm < 1.4);
}

TEST_CASE("reconstruction input checks") {
  CHECK_THROWS_AS(reconstruct(testing::sphere_cloud(50, 10.0, 1)), ReconstructionError);
  ReconParams p;
  p.grid_resolution = 4;
  CHECK_THROWS_AS(reconstruct(testing::sphere_cloud(500, 10.0, 1), p), ReconstructionError);
  std::vector<Vec3> same(200, Vec3(1, 2, 3));
  CHECK_THROWS_AS(reconstruct(PointCloud(same)), ReconstructionError);
}

TEST_CASE("decimation round schedule") {
  CHECK(static_cast<int>(std::ceil(std::log(0.1) / std::log(0.9))) == 22);
  const TriMesh torso = scan::torso_phantom();
  REQUIRE(torso.triangle_count() == 160000);
  const auto expected = expected_rounds(160000, 16000, 0.10);
  CHECK(expected.size() == 22);
  const DecimationResult r = decimate_logged(torso, {0.10, 16000});
  CHECK(r.rounds == 22);
  CHECK(r.round_counts == expected);
  CHECK(r.mesh.triangle_count() < 16000);
  CHECK(testing::consistently_oriented(r.mesh));
}

TEST_CASE("decimated icosphere stays close to the original") {
  const double radius = 100.0;
  const TriMesh s = shapes::icosphere(Vec3::Zero(), radius, 5);
  REQUIRE(s.triangle_count() == 20480);
  const DecimationResult r = decimate_logged(s, {0.10, 2048});
  CHECK(r.mesh.triangle_count() <= 2048);
  CHECK(r.round_counts == expected_rounds(20480, 2048, 0.10));
  CHECK(testing::consistently_oriented(r.mesh));
  CHECK(testing::euler_characteristic(r.mesh) == 2);
  CHECK(sampled_hausdorff(r.mesh, s, 0.05) <= 0.01 * radius);
}

TEST_CASE("decimation edge cases") {
  const TriMesh s = shapes::icosphere(Vec3::Zero(), 10.0, 2);
  const DecimationResult same = decimate_logged(s, {0.10, s.triangle_count()});
  CHECK(same.rounds == 0);
  CHECK(same.mesh.triangles() == s.triangles());
  CHECK(same.mesh.vertices() == s.vertices());

  // default target is a tenth of the input
  CHECK(decimate(s).triangle_count() <= s.triangle_count() / 10);

  CHECK_THROWS_AS(decimate(s, {1.5, 0}), GeometryError);
  CHECK_THROWS_AS(decimate(s, {0.1, 2}), GeometryError);

  // a box cannot get below 8 faces with 10% rounds
  const TriMesh box = shapes::box({0, 0, 0}, {1, 1, 1});
  try {
    decimate(box, {0.10, 4});
    FAIL("expected DecimationError");
  } catch (const DecimationError& e) {
    CHECK(e.partial().mesh.triangle_count() > 4);
    CHECK(testing::consistently_oriented(e.partial().mesh));
  }
}

TEST_CASE("decimation keeps random blobs manifold (property)") {
  Gen g(8);
  for (int trial = 0; trial < 6; ++trial) {
    const TriMesh b = g.blob(g.point(20), g.uniform(10, 40), 4);
    const DecimationResult r = decimate_logged(b, {0.10, 0});
    CHECK(r.mesh.triangle_count() <= b.triangle_count() / 10);
    CHECK(testing::consistently_oriented(r.mesh));
    CHECK(testing::euler_characteristic(r.mesh) == 2);
    CHECK(r.mesh.signed_volume() > 0.0);
  }
}

TEST_CASE("decimation of open surfaces keeps the boundary") {
  // square grid patch
  std::vector<Vec3> v;
  std::vector<Triangle> t;
  const int n = 40;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) v.push_back({double(i), double(j), 0.1 * std::sin(i * 0.3) * std::cos(j * 0.2)});
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const auto a = static_cast<std::uint32_t>(j * (n + 1) + i);
      t.push_back({a, a + 1, a + n + 2});
      t.push_back({a, a + n + 2, a + n + 1});
    }
  }
  const TriMesh patch(v, t);
  const TriMesh d = decimate(patch, {0.10, 400});
  CHECK(d.triangle_count() <= 400);
  CHECK(testing::edge_stats(d).nonmanifold == 0);
  const Aabb b = mesh_bounds(d);
  CHECK(std::abs(b.min.x()) < 1e-3);
  CHECK(std::abs(b.min.y()) < 1e-3);
  CHECK(std::abs(b.max.x() - n) < 1e-3);
  CHECK(std::abs(b.max.y() - n) < 1e-3);
  CHECK(d.surface_area() == doctest::Approx(patch.surface_area()).epsilon(0.01));
}

TEST_CASE("quality map against a brute-force oracle") {
  Gen g(14);
  const TriMesh m = g.blob(Vec3::Zero(), 20.0, 2);
  std::vector<Vec3> ref;
  for (int i = 0; i < 400; ++i) ref.push_back(g.point(30));
  const QualityMap q = quality_map(m, PointCloud(ref));
  REQUIRE(q.quality.size() == m.vertex_count());
  for (std::size_t i = 0; i < m.vertex_count(); ++i) {
    CHECK(q.quality[i] == doctest::Approx(testing::brute_nearest(m.vertices()[i], ref)));
  }
}

TEST_CASE("quality of vertices drawn from the reference is zero") {
  const TriMesh m = shapes::icosphere(Vec3::Zero(), 10.0, 2);
  std::vector<Vec3> ref = m.vertices();
  ref.push_back({100, 100, 100});
  const QualityMap q = quality_map(m, PointCloud(ref));
  for (double v : q.quality) CHECK(v == 0.0);
}

TEST_CASE("quality of a mesh offset from its own dense samples") {
  const TriMesh plane({{0, 0, 0}, {100, 0, 0}, {100, 100, 0}, {0, 100, 0}}, {{0, 1, 2}, {0, 2, 3}});
  const double density = 4.0;  // samples per mm^2
  const auto samples = sample_surface(plane, density, 1);
  const TriMesh lifted = transform_mesh(RigidTransform::translation({0, 0, 2}), plane);
  // interior query: sampled within density -> nearest in-plane gap well under 1 mm
  std::vector<Vec3> verts = {{50, 50, 2}, {25, 75, 2}, {60, 40, 2}};
  const TriMesh probe(verts, {{0, 1, 2}});
  const QualityMap q = quality_map(probe, PointCloud(samples));
  const double gap = 3.0 / std::sqrt(density);
  for (double v : q.quality) {
    CHECK(v >= 2.0 - 1e-9);
    CHECK(v <= std::sqrt(4.0 + gap * gap));
  }
  CHECK(quality_map(lifted, PointCloud(samples)).summary.max_mm >= 2.0);
}

TEST_CASE("quality bins and colors") {
  QualityMap q;
  q.quality = {0.5, 2.0, 4.0, 6.0};
  const BinCounts c = q.counts();
  CHECK(c.blue == 1);
  CHECK(c.green == 1);
  CHECK(c.red == 1);
  CHECK(c.over == 1);
  CHECK(bin_color(QualityBin::Blue) == std::array<std::uint8_t, 3>{0, 0, 255});
  CHECK(bin_color(QualityBin::Over) == std::array<std::uint8_t, 3>{128, 128, 128});
}

TEST_CASE("quality cutoff and filter") {
  QualityMap q;
  q.summary.rmse_mm = 1.4;
  CHECK(quality_cutoff(q) == doctest::Approx(4.2));

  const TriMesh m = shapes::icosphere(Vec3::Zero(), 10.0, 2);
  QualityMap flat;
  flat.quality.assign(m.vertex_count(), 0.7);
  flat.summary = evalkit::metrics(flat.quality);
  CHECK(filter_by_quality(m, flat).triangle_count() == m.triangle_count());
  CHECK_THROWS_AS(filter_by_cutoff(m, flat, 0.1), QualityError);
  QualityMap wrong;
  wrong.quality = {1.0};
  CHECK_THROWS_AS(filter_by_quality(m, wrong), QualityError);
}

TEST_CASE("filter output has no orphans and honors the cutoff (property)") {
  Gen g(27);
  for (int trial = 0; trial < 20; ++trial) {
    const TriMesh m = g.blob(Vec3::Zero(), 20.0, 3);
    QualityMap q;
    for (std::size_t i = 0; i < m.vertex_count(); ++i) q.quality.push_back(std::abs(g.normal(1.0)));
    q.summary = evalkit::metrics(q.quality);
    const double k = g.uniform(1.0, 3.0);
    TriMesh f;
    try {
      f = filter_by_quality(m, q, k);
    } catch (const QualityError&) {
      continue;
    }
    std::vector<char> used(f.vertex_count(), 0);
    for (const auto& t : f.triangles()) used[t[0]] = used[t[1]] = used[t[2]] = 1;
    CHECK(std::all_of(used.begin(), used.end(), [](char u) { return u != 0; }));
    // every surviving vertex is an original vertex within the cutoff
    const KdTree tree(m.vertices());
    for (const Vec3& v : f.vertices()) {
      const auto hit = tree.nearest(v);
      CHECK(hit.distance_sq == 0.0);
      CHECK(q.quality[hit.index] <= quality_cutoff(q, k));
    }
  }
}

TEST_CASE("filter removes the surface bridged over a hole") {
  // sphere cloud with a small polar cap punched out, narrow enough to bridge
  const double radius = 50.0, cap_deg = 8.0;
  const auto full = testing::sphere_cloud(40000, radius, 21);
  const double cap = std::cos(cap_deg * std::numbers::pi / 180.0);
  std::vector<Vec3> pts, nrm;
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (full.normals()[i].z() > cap) continue;
    pts.push_back(full.points()[i]);
    nrm.push_back(full.normals()[i]);
  }
  const PointCloud punched(pts, nrm);
  ReconParams p;
  p.grid_resolution = 96;
  p.truncation_mm = 8.0;
  const TriMesh baseline = reconstruct(full, p);
  const TriMesh bridged = reconstruct(punched, p);
  REQUIRE(testing::edge_stats(bridged).boundary == 0);

  const QualityMap q = quality_map(bridged, punched);
  const TriMesh kept = filter_by_quality(bridged, q);
  auto polar_deg = [](const Vec3& v) { return std::acos(v.normalized().z()) * 180.0 / std::numbers::pi; };
  // anything farther than the cutoff from the hole rim must be gone
  const double reach_deg = quality_cutoff(q) / radius * 180.0 / std::numbers::pi;
  std::size_t deep_before = 0, deep_after = 0;
  for (const Vec3& v : bridged.vertices()) deep_before += polar_deg(v) < cap_deg - reach_deg;
  for (const Vec3& v : kept.vertices()) deep_after += polar_deg(v) < cap_deg - reach_deg;
  CHECK(deep_before > 0);
  CHECK(deep_after == 0);

  std::size_t covered = 0;
  for (const Vec3& v : baseline.vertices()) covered += polar_deg(v) >= cap_deg;
  const double retained = static_cast<double>(kept.vertex_count());
  CHECK(std::abs(retained - static_cast<double>(covered)) / static_cast<double>(covered) <= 0.02);
}

TEST_CASE("quality PLY carries the scalar and bin colors") {
  const TriMesh m = shapes::icosphere(Vec3::Zero(), 10.0, 1);
  QualityMap q;
  for (std::size_t i = 0; i < m.vertex_count(); ++i) q.quality.push_back(static_cast<double>(i % 7));
  q.summary = evalkit::metrics(q.quality);
  std::ostringstream out;
  write_quality_ply(out, m, q, ply::Format::Ascii);
  const std::string s = out.str();
  CHECK(s.find("property float quality") != std::string::npos);
  CHECK(s.find("property uchar red") != std::string::npos);
  const TriMesh back = ply::mesh_from_string(s);
  CHECK(back.triangle_count() == m.triangle_count());
}

}  // TEST_SUITE
