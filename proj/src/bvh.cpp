#include "surs/bvh.hpp"

#include <algorithm>
#include <limits>

namespace surs {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

namespace {

// Shared by BVH and brute force so their distances agree bit for bit.
inline void consider_face(const TriMesh& mesh, int f, const Vec3& p, double& best_sq,
                          SurfaceHit& best) {
  const auto& t = mesh.faces[f];
  Vec3 q = closest_point_on_triangle(p, mesh.vertices[t[0]], mesh.vertices[t[1]],
                                     mesh.vertices[t[2]]);
  double d2 = (p - q).squaredNorm();
  if (d2 < best_sq) {
    best_sq = d2;
    best.point = q;
    best.face = f;
  }
}

inline double aabb_dist_sq(const Aabb& box, const Vec3& p) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    double v = p[k];
    if (v < box.lo[k]) {
      double d = box.lo[k] - v;
      d2 += d * d;
    } else if (v > box.hi[k]) {
      double d = v - box.hi[k];
      d2 += d * d;
    }
  }
  return d2;
}

}  // namespace

Bvh::Bvh(const TriMesh& mesh) : mesh_(&mesh) {
  if (mesh.faces.empty()) throw ValidationError("Bvh: mesh has no faces");
  std::vector<int> items(mesh.faces.size());
  std::vector<Vec3> centroids(mesh.faces.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    items[f] = (int)f;
    const auto& t = mesh.faces[f];
    centroids[f] =
        (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
  }
  nodes_.reserve(mesh.faces.size() * 2);
  build(items, 0, (int)items.size(), centroids);
}

int Bvh::build(std::vector<int>& items, int begin, int end, std::vector<Vec3>& centroids) {
  int node_idx = (int)nodes_.size();
  nodes_.emplace_back();
  Aabb box;
  {
    const auto& t0 = mesh_->faces[items[begin]];
    box.lo = box.hi = mesh_->vertices[t0[0]];
  }
  for (int i = begin; i < end; ++i)
    for (int k = 0; k < 3; ++k) box.expand(mesh_->vertices[mesh_->faces[items[i]][k]]);

  const int kLeafSize = 4;
  if (end - begin <= kLeafSize) {
    Node& n = nodes_[node_idx];
    n.box = box;
    n.first = (int)order_.size();
    n.count = end - begin;
    for (int i = begin; i < end; ++i) order_.push_back(items[i]);
    return node_idx;
  }

  Aabb cbox;
  cbox.lo = cbox.hi = centroids[items[begin]];
  for (int i = begin; i < end; ++i) cbox.expand(centroids[items[i]]);
  int axis = 0;
  Vec3 ext = cbox.extent();
  if (ext.y() > ext.x()) axis = 1;
  if (ext.z() > ext[axis]) axis = 2;

  int mid = (begin + end) / 2;
  std::nth_element(items.begin() + begin, items.begin() + mid, items.begin() + end,
                   [&](int a, int b) {
                     if (centroids[a][axis] != centroids[b][axis])
                       return centroids[a][axis] < centroids[b][axis];
                     return a < b;  // stable under duplicate centroids
                   });

  int left = build(items, begin, mid, centroids);
  int right = build(items, mid, end, centroids);
  Node& n = nodes_[node_idx];
  n.box = box;
  n.left = left;
  n.right = right;
  return node_idx;
}

SurfaceHit Bvh::closest(const Vec3& p) const {
  SurfaceHit best;
  double best_sq = std::numeric_limits<double>::infinity();
  // manual stack; near child first for tight pruning
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    int ni = stack[--top];
    const Node& n = nodes_[ni];
    if (aabb_dist_sq(n.box, p) > best_sq) continue;
    if (n.left < 0) {
      for (int i = 0; i < n.count; ++i) consider_face(*mesh_, order_[n.first + i], p, best_sq, best);
    } else {
      double dl = aabb_dist_sq(nodes_[n.left].box, p);
      double dr = aabb_dist_sq(nodes_[n.right].box, p);
      if (dl < dr) {
        stack[top++] = n.right;
        stack[top++] = n.left;
      } else {
        stack[top++] = n.left;
        stack[top++] = n.right;
      }
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

SurfaceHit point_to_surface(const Bvh& bvh, const Vec3& p) { return bvh.closest(p); }

std::vector<SurfaceHit> point_to_surface_batch(const Bvh& bvh, const std::vector<Vec3>& pts) {
  std::vector<SurfaceHit> out(pts.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < (long)pts.size(); ++i) out[i] = bvh.closest(pts[i]);
  return out;
}

namespace ref {

SurfaceHit point_to_surface_bruteforce(const TriMesh& mesh, const Vec3& p) {
  if (mesh.faces.empty()) throw ValidationError("point_to_surface: mesh has no faces");
  SurfaceHit best;
  double best_sq = std::numeric_limits<double>::infinity();
  for (int f = 0; f < (int)mesh.faces.size(); ++f) consider_face(mesh, f, p, best_sq, best);
  best.distance = std::sqrt(best_sq);
  return best;
}

}  // namespace ref

}  // namespace surs
