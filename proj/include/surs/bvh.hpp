#pragma once

#include <vector>

#include "surs/mesh.hpp"

namespace surs {

struct SurfaceHit {
  double distance = 0.0;
  Vec3 point{0, 0, 0};
  int face = -1;
};

// Exact closest point on a triangle (Ericson's region walk).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Static median-split BVH over triangles for closest-point queries.
// Distances match the brute-force scan bit for bit: both run the identical
// per-triangle arithmetic and only a lower-bound prune separates them.
class Bvh {
 public:
  explicit Bvh(const TriMesh& mesh);

  SurfaceHit closest(const Vec3& p) const;

  const TriMesh& mesh() const { return *mesh_; }

 private:
  struct Node {
    Aabb box;
    int left = -1, right = -1;  // internal children, or
    int first = 0, count = 0;   // leaf range into order_
  };
  const TriMesh* mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;

  int build(std::vector<int>& items, int begin, int end, std::vector<Vec3>& centroids);
};

SurfaceHit point_to_surface(const Bvh& bvh, const Vec3& p);

// Parallel over query points.
std::vector<SurfaceHit> point_to_surface_batch(const Bvh& bvh, const std::vector<Vec3>& pts);

namespace ref {
// Exhaustive scan; the testing oracle for the BVH path.
SurfaceHit point_to_surface_bruteforce(const TriMesh& mesh, const Vec3& p);
}  // namespace ref

}  // namespace surs
