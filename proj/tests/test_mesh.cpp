#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "surs/mesh.hpp"

using namespace surs;

namespace {

std::filesystem::path tmp_dir() {
  auto p = std::filesystem::temp_directory_path() / "surs_mesh_tests";
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("mesh");

TEST_CASE("obj round trip preserves vertices and faces") {
  TriMesh cube = make_cube(Vec3(-0.3, -0.4, -0.5), Vec3(0.5, 0.4, 0.3));
  auto path = (tmp_dir() / "cube.obj").string();
  save_obj(path, cube);
  TriMesh back = load_mesh(path);
  REQUIRE(back.vertices.size() == cube.vertices.size());
  REQUIRE(back.faces.size() == cube.faces.size());
  for (size_t i = 0; i < cube.vertices.size(); ++i)
    CHECK((back.vertices[i] - cube.vertices[i]).norm() < 1e-6);
  for (size_t f = 0; f < cube.faces.size(); ++f) CHECK(back.faces[f] == cube.faces[f]);
}

TEST_CASE("obj parser handles quads, slashed indices, and negative indices") {
  auto path = (tmp_dir() / "mixed.obj").string();
  {
    std::ofstream out(path);
    out << "# comment\n"
        << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
        << "vn 0 0 1\nvt 0 0\n"
        << "f 1/1/1 2/1/1 3/1/1 4/1/1\n"   // quad, fan split
        << "f -4 -3 -2\n";                   // relative indices
  }
  TriMesh m = load_mesh(path);
  CHECK(m.vertices.size() == 4);
  CHECK(m.faces.size() == 3);
  CHECK(m.faces[0] == std::array<int, 3>{0, 1, 2});
  CHECK(m.faces[1] == std::array<int, 3>{0, 2, 3});
  CHECK(m.faces[2] == std::array<int, 3>{0, 1, 2});
}

TEST_CASE("obj parse errors carry the line number") {
  auto path = (tmp_dir() / "bad.obj").string();
  {
    std::ofstream out(path);
    out << "v 0 0 0\nv 1 0 0\nf 1 2 99\n";
  }
  try {
    load_mesh(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line_number == 3);
  }
}

TEST_CASE("non-finite vertex is rejected") {
  auto path = (tmp_dir() / "nan.obj").string();
  {
    std::ofstream out(path);
    out << "v 0 0 nan\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
  }
  CHECK_THROWS_AS(load_mesh(path), FormatError);
}

TEST_CASE("ply ascii and binary little-endian load the same mesh") {
  TriMesh cube = make_cube(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
  auto ascii_path = (tmp_dir() / "cube_ascii.ply").string();
  {
    std::ofstream out(ascii_path);
    out << "ply\nformat ascii 1.0\n"
        << "element vertex " << cube.vertices.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "element face " << cube.faces.size() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    for (const auto& v : cube.vertices) out << v.x() << " " << v.y() << " " << v.z() << "\n";
    for (const auto& f : cube.faces) out << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";
  }
  auto bin_path = (tmp_dir() / "cube_bin.ply").string();
  {
    std::ofstream out(bin_path, std::ios::binary);
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << cube.vertices.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "element face " << cube.faces.size() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    for (const auto& v : cube.vertices) {
      float xyz[3] = {(float)v.x(), (float)v.y(), (float)v.z()};
      out.write((const char*)xyz, sizeof xyz);
    }
    for (const auto& f : cube.faces) {
      unsigned char n = 3;
      out.write((const char*)&n, 1);
      int idx[3] = {f[0], f[1], f[2]};
      out.write((const char*)idx, sizeof idx);
    }
  }
  TriMesh a = load_mesh(ascii_path);
  TriMesh b = load_mesh(bin_path);
  REQUIRE(a.vertices.size() == cube.vertices.size());
  REQUIRE(b.vertices.size() == cube.vertices.size());
  REQUIRE(a.faces.size() == cube.faces.size());
  REQUIRE(b.faces.size() == cube.faces.size());
  for (size_t i = 0; i < cube.vertices.size(); ++i) {
    CHECK((a.vertices[i] - cube.vertices[i]).norm() < 1e-6);
    CHECK((b.vertices[i] - cube.vertices[i]).norm() < 1e-6);
  }
}

TEST_CASE("normalize_to_unit centers and scales the longest axis to 1") {
  TriMesh m = make_cube(Vec3(2, 3, 4), Vec3(6, 4, 5));  // extents 4, 1, 1
  m.units_per_cm = 1.0;
  UnitizeTransform tf = normalize_to_unit(m);
  Aabb box = m.bounds();
  CHECK(box.extent().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(box.center().norm() < 1e-12);
  CHECK(tf.scale == doctest::Approx(0.25));
  // metric distances preserved: a 4-unit edge was 4 cm and still is
  Vec3 a(2, 3, 4), b(6, 3, 4);
  double before_cm = (b - a).norm() / 1.0;
  double after_cm = (tf.apply(b) - tf.apply(a)).norm() / m.units_per_cm;
  CHECK(after_cm == doctest::Approx(before_cm).epsilon(1e-12));
}

TEST_CASE("normalize_to_unit on an already normalized mesh is the identity") {
  TriMesh m = make_cube(Vec3(-0.5, -0.25, -0.25), Vec3(0.5, 0.25, 0.25));
  UnitizeTransform tf = normalize_to_unit(m);
  CHECK(tf.scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tf.translation.norm() < 1e-12);
}

TEST_CASE("normalize_to_unit rejects degenerate input") {
  TriMesh m;
  m.vertices = {Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(1, 1, 1)};
  m.faces = {{0, 1, 2}};
  CHECK_THROWS_AS(normalize_to_unit(m), ValidationError);
  TriMesh empty;
  CHECK_THROWS_AS(normalize_to_unit(empty), ValidationError);
}

TEST_CASE("face normals are unit length and outward for primitives") {
  for (const TriMesh& m : {make_cube(Vec3(-1, -1, -1), Vec3(1, 1, 1)), make_icosphere(2, 0.5)}) {
    for (int f = 0; f < (int)m.faces.size(); ++f) {
      Vec3 n = m.face_normal(f);
      CHECK(std::abs(n.norm() - 1.0) < 1e-6);
      const auto& t = m.faces[f];
      Vec3 centroid = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
      CHECK(n.dot(centroid) > 0.0);  // primitives are centered at the origin
    }
  }
}

TEST_CASE("watertight check accepts closed primitives and flags open meshes") {
  CHECK(check_watertight(make_cube(Vec3(-1, -1, -1), Vec3(1, 1, 1))).watertight());
  CHECK(check_watertight(make_icosphere(3, 1.0)).watertight());

  TriMesh open_quad = make_quad(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0));
  WatertightReport rep = check_watertight(open_quad);
  CHECK_FALSE(rep.watertight());
  CHECK(rep.boundary_edges == 4);

  // flip one face: still closed but inconsistently oriented
  TriMesh bad = make_cube(Vec3(-1, -1, -1), Vec3(1, 1, 1));
  std::swap(bad.faces[0][0], bad.faces[0][1]);
  WatertightReport rep2 = check_watertight(bad);
  CHECK(rep2.closed);
  CHECK_FALSE(rep2.oriented);
}

TEST_CASE("icosphere has the expected vertex count and radius") {
  // 10 * 4^s + 2 vertices
  CHECK(make_icosphere(0, 1.0).vertices.size() == 12);
  CHECK(make_icosphere(2, 1.0).vertices.size() == 162);
  TriMesh s = make_icosphere(4, 0.5);
  CHECK(s.vertices.size() == 2562);
  CHECK(s.faces.size() == 5120);
  for (const Vec3& v : s.vertices) CHECK(std::abs(v.norm() - 0.5) < 1e-12);
}

TEST_CASE("surface sampling is deterministic and area weighted") {
  TriMesh sphere = make_icosphere(3, 0.5);
  Rng r1(42), r2(42);
  auto a = sample_on_surface(sphere, 500, r1);
  auto b = sample_on_surface(sphere, 500, r2);
  REQUIRE(a.size() == 500);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  // every sample lies on the mesh (dist 0 up to fp noise)
  for (const Vec3& p : a) CHECK(p.norm() <= 0.5 + 1e-9);

  // area weighting: the two hemispheres receive about half the samples each
  int north = 0;
  Rng r3(7);
  for (const Vec3& p : sample_on_surface(sphere, 4000, r3))
    if (p.z() > 0) north++;
  CHECK(north > 1800);
  CHECK(north < 2200);
}

TEST_SUITE_END();
