#include "doctest.h"
#include "surs/bvh.hpp"
#include "surs/decimate.hpp"
#include "surs/winding.hpp"

using namespace surs;

namespace {

// symmetric sampled chamfer used only by these tests (the metrics module has
// the production version)
double rough_chamfer(const TriMesh& a, const TriMesh& b, int n) {
  Bvh ba(a), bb(b);
  Rng r1(17), r2(17);
  auto pa = sample_on_surface(a, n, r1);
  auto pb = sample_on_surface(b, n, r2);
  double d1 = 0, d2 = 0;
  for (const Vec3& p : pa) d1 += point_to_surface(bb, p).distance;
  for (const Vec3& p : pb) d2 += point_to_surface(ba, p).distance;
  return 0.5 * (d1 / n + d2 / n);
}

}  // namespace

TEST_SUITE_BEGIN("decimate");

TEST_CASE("target at or above the input is the identity") {
  TriMesh sphere = make_icosphere(2, 0.5);
  for (long target : {(long)sphere.faces.size(), (long)sphere.faces.size() + 100}) {
    DecimateResult r = decimate(sphere, target);
    CHECK(r.reached_target);
    CHECK(r.collapses == 0);
    REQUIRE(r.mesh.vertices.size() == sphere.vertices.size());
    REQUIRE(r.mesh.faces.size() == sphere.faces.size());
    for (size_t i = 0; i < sphere.vertices.size(); ++i)
      CHECK(r.mesh.vertices[i] == sphere.vertices[i]);
  }
}

TEST_CASE("decimation reaches the requested face count and stays watertight") {
  TriMesh sphere = make_icosphere(3, 0.5);  // 1280 faces
  for (long target : {640L, 320L, 80L}) {
    DecimateResult r = decimate(sphere, target);
    CHECK(r.reached_target);
    CHECK((long)r.mesh.faces.size() <= target);
    CHECK(r.mesh.faces.size() >= 4);
    CHECK(check_watertight(r.mesh).watertight());
  }
}

TEST_CASE("icosphere 1280 to 320 faces keeps chamfer under 2 percent of the diagonal") {
  TriMesh sphere = make_icosphere(3, 0.5);
  DecimateResult r = decimate(sphere, 320);
  REQUIRE(r.reached_target);
  double diag = sphere.bounds().extent().norm();
  double cd = rough_chamfer(sphere, r.mesh, 4000);
  CHECK(cd < 0.02 * diag);
}

TEST_CASE("ladder targets produce monotonically increasing chamfer error") {
  TriMesh sphere = make_icosphere(3, 0.5);
  std::vector<long> targets = {640, 320, 160, 80};
  auto ladder = make_lr_ladder(sphere, targets);
  REQUIRE(ladder.size() == targets.size());
  double prev = -1.0;
  for (size_t i = 0; i < ladder.size(); ++i) {
    CHECK(ladder[i].reached_target);
    double cd = rough_chamfer(sphere, ladder[i].mesh, 4000);
    CHECK(cd > prev);
    prev = cd;
  }
}

TEST_CASE("decimating a sphere keeps vertices near the sphere") {
  TriMesh sphere = make_icosphere(3, 0.5);
  DecimateResult r = decimate(sphere, 200);
  for (const Vec3& v : r.mesh.vertices) {
    CHECK(v.norm() < 0.55);
    CHECK(v.norm() > 0.38);
  }
}

TEST_CASE("decimation preserves winding-number occupancy at the center") {
  TriMesh sphere = make_icosphere(3, 0.5);
  DecimateResult r = decimate(sphere, 100);
  CHECK(occupancy(r.mesh, Vec3(0, 0, 0)));
  CHECK_FALSE(occupancy(r.mesh, Vec3(0.9, 0, 0)));
}

TEST_CASE("decimation is deterministic") {
  TriMesh sphere = make_icosphere(3, 0.5);
  DecimateResult a = decimate(sphere, 150);
  DecimateResult b = decimate(sphere, 150);
  REQUIRE(a.mesh.vertices.size() == b.mesh.vertices.size());
  REQUIRE(a.mesh.faces.size() == b.mesh.faces.size());
  for (size_t i = 0; i < a.mesh.vertices.size(); ++i)
    CHECK(a.mesh.vertices[i] == b.mesh.vertices[i]);
  for (size_t i = 0; i < a.mesh.faces.size(); ++i) CHECK(a.mesh.faces[i] == b.mesh.faces[i]);
}

TEST_CASE("a tetrahedron cannot go below four faces but does not break") {
  TriMesh tet;
  tet.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  tet.faces = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
  DecimateResult r = decimate(tet, 2);
  CHECK_FALSE(r.reached_target);  // best effort with the warning flag set
  CHECK(r.mesh.faces.size() == 4);
}

TEST_SUITE_END();
