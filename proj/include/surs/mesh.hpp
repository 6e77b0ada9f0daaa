#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "surs/common.hpp"

namespace surs {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

struct Aabb {
  Vec3 lo{0, 0, 0};
  Vec3 hi{0, 0, 0};
  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return 0.5 * (lo + hi); }
  void expand(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
};

// Indexed triangle mesh. Faces are CCW when viewed from outside.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  double units_per_cm = 0.01;  // model units per centimetre

  Vec3 face_normal(int f) const;       // unit length; zero vector for degenerate faces
  double face_area(int f) const;
  double total_area() const;
  Aabb bounds() const;

  // Throws ValidationError on out-of-range indices or non-finite vertices.
  void validate() const;
};

struct WatertightReport {
  bool closed = false;              // every edge shared by exactly two faces
  bool oriented = false;            // the two faces traverse the edge in opposite directions
  bool edge_manifold = false;       // no edge with more than two faces
  long boundary_edges = 0;
  long nonmanifold_edges = 0;
  bool watertight() const { return closed && oriented && edge_manifold; }
};

WatertightReport check_watertight(const TriMesh& mesh);

// Maps a mesh into the unit cube: v' = (v - translation) * scale.
struct UnitizeTransform {
  double scale = 1.0;
  Vec3 translation{0, 0, 0};
  Vec3 apply(const Vec3& v) const { return (v - translation) * scale; }
  Vec3 invert(const Vec3& v) const { return v / scale + translation; }
};

// Uniformly scales and translates so the longest bbox axis spans exactly 1,
// centered at the origin. units_per_cm is rescaled so metric distances are
// preserved. Throws ValidationError on empty or zero-extent input.
UnitizeTransform normalize_to_unit(TriMesh& mesh);

// OBJ (ASCII v/f) or PLY (ASCII or binary little-endian), chosen by extension.
// Polygons are fan-split. Throws FormatError with a line number on bad input.
TriMesh load_mesh(const std::string& path);
void save_obj(const std::string& path, const TriMesh& mesh);

// Procedural primitives (deterministic vertex ordering).
TriMesh make_cube(const Vec3& lo, const Vec3& hi);
TriMesh make_icosphere(int subdivisions, double radius);
// Two-triangle rectangle centered at `center`, edges along `u` and `v`.
TriMesh make_quad(const Vec3& center, const Vec3& u, const Vec3& v);

// Area-weighted surface points, reproducible for a given rng state.
std::vector<Vec3> sample_on_surface(const TriMesh& mesh, int count, Rng& rng);

}  // namespace surs
