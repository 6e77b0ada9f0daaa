#include <cstring>

#include "doctest.h"
#include "surs/bvh.hpp"
#include "surs/winding.hpp"

using namespace surs;

TEST_SUITE_BEGIN("bvh_winding");

TEST_CASE("winding number inside and outside a cube") {
  TriMesh cube = make_cube(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
  CHECK(winding_number(cube, Vec3(0, 0, 0)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(winding_number(cube, Vec3(2, 0, 0)) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(occupancy(cube, Vec3(0.49, 0.49, 0.49)));
  CHECK_FALSE(occupancy(cube, Vec3(0.51, 0, 0)));
}

TEST_CASE("winding number near 0.5 on the surface is flagged as boundary") {
  TriMesh cube = make_cube(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
  double w = winding_number(cube, Vec3(0.5, 0.1, 0.1));  // on a face
  CHECK(near_surface_boundary(w));
  CHECK_FALSE(near_surface_boundary(0.9));
  // exactly 0.5 labels outside
  CHECK_FALSE(0.5 > 0.5);
}

TEST_CASE("orientation flip negates the winding number") {
  TriMesh cube = make_cube(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
  TriMesh flipped = cube;
  for (auto& f : flipped.faces) std::swap(f[1], f[2]);
  Vec3 p(0.1, -0.2, 0.3);
  CHECK(winding_number(flipped, p) == doctest::Approx(-winding_number(cube, p)).epsilon(1e-12));
}

TEST_CASE("winding agrees with ray parity on random points around an icosphere") {
  TriMesh sphere = make_icosphere(3, 0.4);
  Bvh bvh(sphere);
  Rng rng(123);
  int checked = 0, agree = 0;
  for (int i = 0; i < 800; ++i) {
    Vec3 p(rng.uniform(-0.55, 0.55), rng.uniform(-0.55, 0.55), rng.uniform(-0.55, 0.55));
    if (point_to_surface(bvh, p).distance < 1e-4) continue;  // skip the surface band
    bool w = occupancy(sphere, p);
    bool r = ref::occupancy_ray_parity(sphere, p, 1000 + i);
    checked++;
    if (w == r) agree++;
  }
  REQUIRE(checked > 700);
  CHECK(agree == checked);
}

TEST_CASE("batch winding matches the serial scan exactly") {
  TriMesh sphere = make_icosphere(2, 0.4);
  Rng rng(5);
  std::vector<Vec3> pts;
  for (int i = 0; i < 500; ++i)
    pts.emplace_back(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
  auto par = winding_number_batch(sphere, pts);
  auto ser = ref::winding_number_serial(sphere, pts);
  REQUIRE(par.size() == ser.size());
  for (size_t i = 0; i < par.size(); ++i) {
    CHECK(std::memcmp(&par[i], &ser[i], sizeof(double)) == 0);
  }
}

TEST_CASE("closest point on triangle covers every Voronoi region") {
  Vec3 a(0, 0, 0), b(2, 0, 0), c(0, 2, 0);
  // interior
  CHECK((closest_point_on_triangle(Vec3(0.5, 0.5, 1), a, b, c) - Vec3(0.5, 0.5, 0)).norm() < 1e-12);
  // vertex regions
  CHECK((closest_point_on_triangle(Vec3(-1, -1, 0), a, b, c) - a).norm() < 1e-12);
  CHECK((closest_point_on_triangle(Vec3(3, -1, 0), a, b, c) - b).norm() < 1e-12);
  CHECK((closest_point_on_triangle(Vec3(-1, 3, 0), a, b, c) - c).norm() < 1e-12);
  // edge regions
  CHECK((closest_point_on_triangle(Vec3(1, -1, 0), a, b, c) - Vec3(1, 0, 0)).norm() < 1e-12);
  CHECK((closest_point_on_triangle(Vec3(-1, 1, 0), a, b, c) - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK((closest_point_on_triangle(Vec3(2, 2, 0), a, b, c) - Vec3(1, 1, 0)).norm() < 1e-12);
}

TEST_CASE("bvh closest distance equals brute force bit for bit") {
  TriMesh sphere = make_icosphere(3, 0.45);
  Bvh bvh(sphere);
  Rng rng(99);
  for (int i = 0; i < 2000; ++i) {
    Vec3 p(rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7));
    SurfaceHit h1 = point_to_surface(bvh, p);
    SurfaceHit h2 = ref::point_to_surface_bruteforce(sphere, p);
    CHECK(std::memcmp(&h1.distance, &h2.distance, sizeof(double)) == 0);
  }
}

TEST_CASE("bvh batch queries match single queries") {
  TriMesh sphere = make_icosphere(2, 0.45);
  Bvh bvh(sphere);
  Rng rng(7);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i)
    pts.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  auto hits = point_to_surface_batch(bvh, pts);
  for (size_t i = 0; i < pts.size(); ++i)
    CHECK(hits[i].distance == point_to_surface(bvh, pts[i]).distance);
}

TEST_CASE("distance to a sphere mesh approximates |r - |p||") {
  TriMesh sphere = make_icosphere(4, 0.5);
  Bvh bvh(sphere);
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    Vec3 dir(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    double r = rng.uniform(0.05, 0.95);
    double expected = std::abs(r - 0.5);
    double got = point_to_surface(bvh, dir * r).distance;
    CHECK(std::abs(got - expected) < 2e-3);  // icosphere facet error
  }
}

TEST_CASE("surface samples have zero distance to their mesh") {
  TriMesh sphere = make_icosphere(3, 0.5);
  Bvh bvh(sphere);
  Rng rng(21);
  for (const Vec3& p : sample_on_surface(sphere, 300, rng))
    CHECK(point_to_surface(bvh, p).distance < 1e-10);
}

TEST_SUITE_END();
