#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "surs/field.hpp"
#include "surs/marching.hpp"
#include "surs/mesh.hpp"

using namespace surs;

namespace {

FieldGrid make_grid(int r, double span, const Vec3& center) {
  FieldGrid g;
  g.r = r;
  g.h = span / (r - 1);
  g.origin = center - 0.5 * span * Vec3::Ones();
  g.v.resize((size_t)r * r * r);
  return g;
}

// Sigmoid shell around a sphere; steepness tied to resolution so the
// transition stays a fixed number of voxels wide at every scale.
FieldGrid sphere_grid(int r, double radius = 0.35, double span = 1.1) {
  FieldGrid g = make_grid(r, span, Vec3::Zero());
  double k = 2.0 * r;
  for (int kk = 0; kk < r; ++kk)
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < r; ++i)
        g.v[g.idx(i, j, kk)] = (float)(1.0 / (1.0 + std::exp(-k * (radius - g.node(i, j, kk).norm()))));
  return g;
}

double mean_radial_error(const TriMesh& mesh, double radius) {
  double sum = 0;
  for (const Vec3& v : mesh.vertices) sum += std::abs(v.norm() - radius);
  return sum / (double)mesh.vertices.size();
}

double signed_volume(const TriMesh& mesh) {
  double vol = 0;
  for (const auto& f : mesh.faces) {
    const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]], &c = mesh.vertices[f[2]];
    vol += a.dot(b.cross(c)) / 6.0;
  }
  return vol;
}

bool vec_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

Image ramp_image(int n) {
  Image img;
  img.width = n;
  img.height = n;
  img.channels = 3;
  img.v.resize((size_t)n * n * 3);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = (float)(x + y * 0.5 + c * 3.0) / (float)(2 * n + 9);
  return img;
}

}  // namespace

TEST_SUITE("recon") {

TEST_CASE("sphere surface lands within 1.5 voxels of the true radius") {
  const int r = 64;
  const double radius = 0.35;
  FieldGrid g = sphere_grid(r, radius);
  TriMesh mesh = marching_cubes(g);

  REQUIRE(mesh.vertices.size() > 1000);
  double worst = 0;
  for (const Vec3& v : mesh.vertices) worst = std::max(worst, std::abs(v.norm() - radius));
  CHECK(worst < 1.5 * g.h);

  WatertightReport rep = check_watertight(mesh);
  CHECK(rep.watertight());
  // closed genus-0 surface: V - E + F = 2 with E = 3F/2
  CHECK((long)mesh.vertices.size() - (long)mesh.faces.size() / 2 == 2);

  double vol = signed_volume(mesh);
  double exact = 4.0 / 3.0 * M_PI * radius * radius * radius;
  CHECK(vol == doctest::Approx(exact).epsilon(0.02));
}

TEST_CASE("halving the voxel size shrinks the radial error accordingly") {
  const double radius = 0.35;
  double coarse = mean_radial_error(marching_cubes(sphere_grid(64, radius)), radius);
  double fine = mean_radial_error(marching_cubes(sphere_grid(128, radius)), radius);
  CHECK(coarse / fine > 1.5);
  CHECK(coarse / fine < 2.5);
}

TEST_CASE("a linear field meshes to a flat plane with normals toward lower values") {
  const int r = 16;
  const double plane_x = 0.1;
  FieldGrid g = make_grid(r, 1.1, Vec3::Zero());
  for (int k = 0; k < r; ++k)
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < r; ++i)
        g.v[g.idx(i, j, k)] = (float)(0.5 + (g.node(i, j, k).x() - plane_x));
  TriMesh mesh = marching_cubes(g);

  REQUIRE(!mesh.vertices.empty());
  for (const Vec3& v : mesh.vertices) CHECK(std::abs(v.x() - plane_x) < 1e-6);

  // occupied side is +x, so every face normal must point along -x
  int oriented = 0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    Vec3 n = mesh.face_normal((int)f);
    if (n.norm() < 0.5) continue;  // degenerate sliver
    CHECK(n.x() < -0.99);
    ++oriented;
  }
  CHECK(oriented > 50);
}

TEST_CASE("constant fields yield an empty mesh") {
  for (float level : {0.2f, 0.5f, 0.9f}) {
    FieldGrid g = make_grid(8, 1.0, Vec3::Zero());
    std::fill(g.v.begin(), g.v.end(), level);
    TriMesh mesh = marching_cubes(g);
    CHECK(mesh.vertices.empty());
    CHECK(mesh.faces.empty());
  }
}

TEST_CASE("a blobby union of two spheres is still watertight") {
  const int r = 48;
  FieldGrid g = make_grid(r, 1.1, Vec3::Zero());
  Vec3 c1(0.18, 0.05, -0.03), c2(-0.18, -0.02, 0.04);
  for (int k = 0; k < r; ++k)
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < r; ++i) {
        Vec3 p = g.node(i, j, k);
        double a = 1.0 / (1.0 + std::exp(-40.0 * (0.25 - (p - c1).norm())));
        double b = 1.0 / (1.0 + std::exp(-40.0 * (0.25 - (p - c2).norm())));
        g.v[g.idx(i, j, k)] = (float)std::max(a, b);
      }
  TriMesh mesh = marching_cubes(g);
  REQUIRE(!mesh.faces.empty());
  CHECK(check_watertight(mesh).watertight());
  CHECK((long)mesh.vertices.size() - (long)mesh.faces.size() / 2 == 2);
  CHECK(signed_volume(mesh) > 0);
}

TEST_CASE("complement fields mesh to the same surface with flipped orientation") {
  // quantize so the float complement 1 - v is exact, and keep 0.5 out of the
  // node values so inside/outside flips exactly
  FieldGrid g = sphere_grid(24);
  for (float& v : g.v) {
    v = std::round(v * 1024.0f) / 1024.0f;
    if (v == 0.5f) v += 1.0f / 1024.0f;
  }
  FieldGrid gc = g;
  for (float& v : gc.v) v = 1.0f - v;

  TriMesh a = marching_cubes(g);
  TriMesh b = marching_cubes(gc);
  REQUIRE(!a.faces.empty());
  REQUIRE(a.vertices.size() == b.vertices.size());
  REQUIRE(a.faces.size() == b.faces.size());

  std::vector<Vec3> va = a.vertices, vb = b.vertices;
  std::sort(va.begin(), va.end(), vec_less);
  std::sort(vb.begin(), vb.end(), vec_less);
  size_t exact = 0;
  for (size_t i = 0; i < va.size(); ++i)
    if (va[i].x() == vb[i].x() && va[i].y() == vb[i].y() && va[i].z() == vb[i].z()) ++exact;
  CHECK(exact == va.size());

  // same triangles as position sets
  auto face_keys = [](const TriMesh& m) {
    std::vector<std::array<double, 9>> keys;
    keys.reserve(m.faces.size());
    for (const auto& f : m.faces) {
      std::array<Vec3, 3> p = {m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]};
      std::sort(p.begin(), p.end(), vec_less);
      keys.push_back({p[0].x(), p[0].y(), p[0].z(), p[1].x(), p[1].y(), p[1].z(), p[2].x(),
                      p[2].y(), p[2].z()});
    }
    std::sort(keys.begin(), keys.end());
    return keys;
  };
  CHECK(face_keys(a) == face_keys(b));

  CHECK(check_watertight(a).watertight());
  CHECK(check_watertight(b).watertight());
  double vol_a = signed_volume(a), vol_b = signed_volume(b);
  CHECK(vol_a > 0);
  CHECK(vol_b < 0);
  CHECK(std::abs(vol_a + vol_b) < 1e-9 * std::abs(vol_a));
}

TEST_CASE("marching output does not depend on thread count") {
  FieldGrid g = sphere_grid(33);
  set_thread_count(1);
  TriMesh a = marching_cubes(g);
  set_thread_count(2);
  TriMesh b = marching_cubes(g);
  TriMesh c = marching_cubes(g);
  set_thread_count(1);

  REQUIRE(a.vertices.size() == b.vertices.size());
  REQUIRE(a.faces.size() == b.faces.size());
  size_t same_v = 0;
  for (size_t i = 0; i < a.vertices.size(); ++i)
    if (a.vertices[i] == b.vertices[i] && b.vertices[i] == c.vertices[i]) ++same_v;
  CHECK(same_v == a.vertices.size());
  size_t same_f = 0;
  for (size_t i = 0; i < a.faces.size(); ++i)
    if (a.faces[i] == b.faces[i] && b.faces[i] == c.faces[i]) ++same_f;
  CHECK(same_f == a.faces.size());
}

TEST_CASE("marching rejects malformed grids") {
  FieldGrid g = make_grid(8, 1.0, Vec3::Zero());
  g.v.pop_back();
  CHECK_THROWS_AS(marching_cubes(g), ValidationError);
  FieldGrid tiny = make_grid(1, 1.0, Vec3::Zero());
  CHECK_THROWS_AS(marching_cubes(tiny), ValidationError);
}

TEST_CASE("field evaluation matches a manual forward pass and masks the window") {
  for (ArchKind arch : {ArchKind::full, ArchKind::only_mr, ArchKind::only_sr}) {
    Model<float> model(make_tiny_model_config(arch), 5);
    const int n = model.cfg.enc.n_i;
    Image lr = ramp_image(n);
    OrthoCamera cam = front_camera(n, 1.2);

    Rng rng(42);
    std::vector<Vec3> pts;
    for (int i = 0; i < 20; ++i)
      pts.emplace_back(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    pts.emplace_back(10.0, 0.0, 0.0);   // far outside the camera window
    pts.emplace_back(0.0, -7.0, 0.0);

    std::vector<float> out = evaluate_field(model, lr, cam, pts);
    REQUIRE(out.size() == pts.size());
    CHECK(out[20] == 0.0f);
    CHECK(out[21] == 0.0f);

    EncoderState<float> st;
    model.encode(lr.v, n, 3, st);
    for (int i = 0; i < 20; ++i) {
      PixelDepth pd = cam.project(pts[i]);
      REQUIRE(pd.in_window);
      std::vector<float> feat;
      EmbedRecord<float> rec;
      model.index_embedding(st, (float)pd.pixel.x(), (float)pd.pixel.y(), feat, rec);
      REQUIRE(rec.in_window);
      float expect;
      MlpState<float> ms;
      if (model.cfg.has_sr()) {
        float s_mr = 0.0f;
        if (model.cfg.has_mr()) {
          MlpState<float> tmp;
          s_mr = model.mr_forward(feat, (float)pd.depth, tmp);
        }
        expect = model.sr_forward(feat, (float)pd.depth, s_mr, ms);
      } else {
        expect = model.mr_forward(feat, (float)pd.depth, ms);
      }
      CHECK(out[i] == expect);
      CHECK(out[i] > 0.0f);
      CHECK(out[i] < 1.0f);
    }
  }
}

TEST_CASE("field evaluation rejects bad cameras and non-finite weights") {
  Model<float> model(make_tiny_model_config(ArchKind::full), 5);
  const int n = model.cfg.enc.n_i;
  Image lr = ramp_image(n);
  std::vector<Vec3> pts = {Vec3(0, 0, 0)};

  OrthoCamera wrong = front_camera(2 * n, 1.2);
  CHECK_THROWS_AS(evaluate_field(model, lr, wrong, pts), ValidationError);

  OrthoCamera cam = front_camera(n, 1.2);
  CHECK_NOTHROW(evaluate_field(model, lr, cam, pts));
  int idx = model.params.index_of("mr.l1.w");
  model.params.at(idx).v[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(evaluate_field(model, lr, cam, pts), ValidationError);
}

TEST_CASE("grid evaluation checks bounds and reports exact geometry") {
  Model<float> model(make_tiny_model_config(ArchKind::full), 9);
  const int n = model.cfg.enc.n_i;
  Image lr = ramp_image(n);
  OrthoCamera cam = front_camera(n, 1.2);

  CHECK_THROWS_AS(evaluate_field_grid(model, lr, cam, 7), ValidationError);
  CHECK_THROWS_AS(evaluate_field_grid(model, lr, cam, 1025), ValidationError);
  CHECK_THROWS_AS(evaluate_field_grid(model, lr, cam, 32, 0.0), ValidationError);
  CHECK_THROWS_AS(evaluate_field_grid(model, lr, cam, 32, -1.0), ValidationError);

  Vec3 center(0.1, 0.0, -0.05);
  FieldGrid g = evaluate_field_grid(model, lr, cam, 9, 0.8, center);
  CHECK(g.r == 9);
  CHECK(g.h == doctest::Approx(0.1).epsilon(1e-12));
  CHECK((g.node(0, 0, 0) - (center - Vec3(0.4, 0.4, 0.4))).norm() < 1e-12);
  CHECK((g.node(8, 8, 8) - (center + Vec3(0.4, 0.4, 0.4))).norm() < 1e-12);
  REQUIRE(g.v.size() == 9u * 9u * 9u);

  // grid values are the plain field evaluated x-fastest
  std::vector<Vec3> pts;
  pts.reserve(g.v.size());
  for (int k = 0; k < 9; ++k)
    for (int j = 0; j < 9; ++j)
      for (int i = 0; i < 9; ++i) pts.push_back(g.node(i, j, k));
  std::vector<float> flat = evaluate_field(model, lr, cam, pts);
  size_t same = 0;
  for (size_t i = 0; i < flat.size(); ++i)
    if (flat[i] == g.v[i]) ++same;
  CHECK(same == flat.size());
}

TEST_CASE("chunked evaluation is exact across chunk seams and thread counts") {
  Model<float> model(make_tiny_model_config(ArchKind::full), 11);
  const int n = model.cfg.enc.n_i;
  Image lr = ramp_image(n);
  OrthoCamera cam = front_camera(n, 1.2);

  Rng rng(7);
  const size_t total = 70000;  // spills into a second 65536-point chunk
  std::vector<Vec3> pts;
  pts.reserve(total);
  for (size_t i = 0; i < total; ++i)
    pts.emplace_back(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));

  std::vector<float> full = evaluate_field(model, lr, cam, pts);

  std::vector<Vec3> head(pts.begin(), pts.begin() + 65536);
  std::vector<Vec3> tail(pts.begin() + 65536, pts.end());
  std::vector<float> a = evaluate_field(model, lr, cam, head);
  std::vector<float> b = evaluate_field(model, lr, cam, tail);
  a.insert(a.end(), b.begin(), b.end());
  REQUIRE(a.size() == full.size());
  size_t same = 0;
  for (size_t i = 0; i < full.size(); ++i)
    if (full[i] == a[i]) ++same;
  CHECK(same == full.size());

  set_thread_count(2);
  std::vector<float> threaded = evaluate_field(model, lr, cam, pts);
  set_thread_count(1);
  size_t same_t = 0;
  for (size_t i = 0; i < full.size(); ++i)
    if (full[i] == threaded[i]) ++same_t;
  CHECK(same_t == full.size());
}

}  // TEST_SUITE
