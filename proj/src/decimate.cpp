#include "surs/decimate.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <unordered_set>

#include <Eigen/Dense>

namespace surs {

namespace {

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

Mat4 plane_quadric(const Vec3& n, double d) {
  Vec4 p(n.x(), n.y(), n.z(), d);
  return p * p.transpose();
}

double quadric_cost(const Mat4& q, const Vec3& v) {
  Vec4 h(v.x(), v.y(), v.z(), 1.0);
  return h.dot(q * h);
}

constexpr double kBoundaryWeight = 1000.0;
constexpr double kMaxCondition = 1e8;

struct PendingEdge {
  double cost;
  int a, b;            // a < b
  long gen_a, gen_b;   // vertex generations at push time
  Vec3 placement;
  bool operator<(const PendingEdge& o) const { return cost > o.cost; }  // min-heap
};

struct Working {
  std::vector<Vec3> pos;
  std::vector<Mat4> quadric;
  std::vector<long> gen;                       // bumped on any local change
  std::vector<bool> vertex_alive;
  std::vector<std::array<int, 3>> faces;
  std::vector<bool> face_alive;
  std::vector<std::vector<int>> vertex_faces;  // incidence, lazily compacted
  long alive_faces = 0;
};

Vec3 face_normal(const Working& w, int f) {
  const auto& t = w.faces[f];
  Vec3 n = (w.pos[t[1]] - w.pos[t[0]]).cross(w.pos[t[2]] - w.pos[t[0]]);
  double len = n.norm();
  return len < 1e-30 ? Vec3::Zero() : Vec3(n / len);
}

// Optimal placement if the pooled quadric is well conditioned, else midpoint.
Vec3 placement_for(const Mat4& q, const Vec3& va, const Vec3& vb) {
  Eigen::Matrix3d a = q.topLeftCorner<3, 3>();
  Eigen::Vector3d b = q.topRightCorner<3, 1>();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(a);
  double lmin = eig.eigenvalues()(0);  // ascending; PSD so all >= 0 up to fp noise
  double lmax = eig.eigenvalues()(2);
  if (lmin <= 0.0 || lmax / lmin >= kMaxCondition) return 0.5 * (va + vb);
  Eigen::Vector3d x = a.ldlt().solve(-b);
  if (!x.allFinite()) return 0.5 * (va + vb);
  return x;
}

void push_edge(std::priority_queue<PendingEdge>& heap, const Working& w, int a, int b) {
  if (a > b) std::swap(a, b);
  Mat4 q = w.quadric[a] + w.quadric[b];
  Vec3 v = placement_for(q, w.pos[a], w.pos[b]);
  double cost = std::max(0.0, quadric_cost(q, v));
  heap.push(PendingEdge{cost, a, b, w.gen[a], w.gen[b], v});
}

// Vertices opposite to the edge (a,b) across its shared faces, plus the count
// of those shared faces.
void shared_faces(const Working& w, int a, int b, std::vector<int>& faces_out) {
  faces_out.clear();
  for (int f : w.vertex_faces[a]) {
    if (!w.face_alive[f]) continue;
    const auto& t = w.faces[f];
    bool has_b = t[0] == b || t[1] == b || t[2] == b;
    if (has_b) faces_out.push_back(f);
  }
}

}  // namespace

DecimateResult decimate(const TriMesh& mesh, long target_faces) {
  mesh.validate();
  if (target_faces < 0) throw ValidationError("decimate: negative target");
  DecimateResult result;
  if (target_faces >= (long)mesh.faces.size()) {
    result.mesh = mesh;
    return result;
  }

  Working w;
  w.pos = mesh.vertices;
  w.quadric.assign(mesh.vertices.size(), Mat4::Zero());
  w.gen.assign(mesh.vertices.size(), 0);
  w.vertex_alive.assign(mesh.vertices.size(), true);
  w.faces = mesh.faces;
  w.face_alive.assign(mesh.faces.size(), true);
  w.vertex_faces.resize(mesh.vertices.size());
  w.alive_faces = (long)mesh.faces.size();

  for (int f = 0; f < (int)w.faces.size(); ++f) {
    const auto& t = w.faces[f];
    for (int k = 0; k < 3; ++k) w.vertex_faces[t[k]].push_back(f);
    Vec3 n = face_normal(w, f);
    if (n.isZero()) continue;
    double d = -n.dot(w.pos[t[0]]);
    Mat4 q = plane_quadric(n, d);
    for (int k = 0; k < 3; ++k) w.quadric[t[k]] += q;
  }

  // collect unique edges; add boundary constraints while we're at it
  std::map<std::pair<int, int>, int> edge_face_count;
  for (int f = 0; f < (int)w.faces.size(); ++f) {
    const auto& t = w.faces[f];
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      edge_face_count[{a, b}]++;
    }
  }
  for (const auto& [e, cnt] : edge_face_count) {
    if (cnt != 1) continue;
    // boundary edge: find its face, penalize movement off the edge plane
    for (int f : w.vertex_faces[e.first]) {
      const auto& t = w.faces[f];
      bool has_b = t[0] == e.second || t[1] == e.second || t[2] == e.second;
      if (!has_b) continue;
      Vec3 edge_dir = (w.pos[e.second] - w.pos[e.first]).normalized();
      Vec3 fn = face_normal(w, f);
      Vec3 n = edge_dir.cross(fn);
      double len = n.norm();
      if (len < 1e-12) continue;
      n /= len;
      Mat4 q = kBoundaryWeight * plane_quadric(n, -n.dot(w.pos[e.first]));
      w.quadric[e.first] += q;
      w.quadric[e.second] += q;
      break;
    }
  }

  std::priority_queue<PendingEdge> heap;
  for (const auto& [e, cnt] : edge_face_count) push_edge(heap, w, e.first, e.second);

  std::vector<int> dying;
  std::vector<int> neighbor_scratch;
  while (w.alive_faces > target_faces && !heap.empty()) {
    PendingEdge e = heap.top();
    heap.pop();
    int a = e.a, b = e.b;
    if (!w.vertex_alive[a] || !w.vertex_alive[b]) continue;
    if (w.gen[a] != e.gen_a || w.gen[b] != e.gen_b) continue;  // stale entry

    shared_faces(w, a, b, dying);
    if (dying.empty()) continue;  // no longer an edge

    // link condition: the common neighbours of a and b must be exactly the
    // vertices opposite the shared faces, otherwise the collapse pinches
    std::set<int> opposite;
    for (int f : dying) {
      for (int v : w.faces[f])
        if (v != a && v != b) opposite.insert(v);
    }
    std::unordered_set<int> ring_a;
    for (int f : w.vertex_faces[a]) {
      if (!w.face_alive[f]) continue;
      for (int v : w.faces[f])
        if (v != a) ring_a.insert(v);
    }
    bool pinch = false;
    std::set<int> common;
    for (int f : w.vertex_faces[b]) {
      if (!w.face_alive[f]) continue;
      for (int v : w.faces[f]) {
        if (v == b || v == a) continue;
        if (ring_a.count(v)) common.insert(v);
      }
    }
    if (common != opposite) pinch = true;
    if (pinch) continue;

    // degenerate-sandwich guard: the merged vertex must not own two faces
    // with identical vertex sets (all three edges shared)
    {
      std::set<std::array<int, 3>> seen;
      bool duplicate = false;
      for (int vid : {a, b}) {
        for (int f : w.vertex_faces[vid]) {
          if (!w.face_alive[f]) continue;
          if (std::find(dying.begin(), dying.end(), f) != dying.end()) continue;
          std::array<int, 3> key = w.faces[f];
          for (int& v : key)
            if (v == b) v = a;
          std::sort(key.begin(), key.end());
          if (!seen.insert(key).second) duplicate = true;
        }
      }
      if (duplicate) continue;
    }

    // foldover guard: every surviving face keeps its normal within 90 degrees
    bool flips = false;
    for (int vid : {a, b}) {
      for (int f : w.vertex_faces[vid]) {
        if (!w.face_alive[f] || flips) continue;
        if (std::find(dying.begin(), dying.end(), f) != dying.end()) continue;
        Vec3 before = face_normal(w, f);
        const auto& t = w.faces[f];
        Vec3 p[3];
        for (int k = 0; k < 3; ++k)
          p[k] = (t[k] == a || t[k] == b) ? e.placement : w.pos[t[k]];
        Vec3 after = (p[1] - p[0]).cross(p[2] - p[0]);
        double len = after.norm();
        if (len < 1e-18 || before.dot(after / len) < 0.0) flips = true;
      }
      if (flips) break;
    }
    if (flips) continue;

    // commit: b collapses into a
    w.pos[a] = e.placement;
    w.quadric[a] += w.quadric[b];
    w.vertex_alive[b] = false;
    for (int f : dying) {
      if (w.face_alive[f]) {
        w.face_alive[f] = false;
        w.alive_faces--;
      }
    }
    for (int f : w.vertex_faces[b]) {
      if (!w.face_alive[f]) continue;
      for (int& v : w.faces[f])
        if (v == b) v = a;
      w.vertex_faces[a].push_back(f);
    }
    w.vertex_faces[b].clear();
    // compact a's incidence list
    auto& fa = w.vertex_faces[a];
    fa.erase(std::remove_if(fa.begin(), fa.end(), [&](int f) { return !w.face_alive[f]; }),
             fa.end());
    std::sort(fa.begin(), fa.end());
    fa.erase(std::unique(fa.begin(), fa.end()), fa.end());

    w.gen[a]++;
    result.collapses++;

    // refresh candidate edges around the new vertex
    neighbor_scratch.clear();
    for (int f : fa)
      for (int v : w.faces[f])
        if (v != a) neighbor_scratch.push_back(v);
    std::sort(neighbor_scratch.begin(), neighbor_scratch.end());
    neighbor_scratch.erase(std::unique(neighbor_scratch.begin(), neighbor_scratch.end()),
                           neighbor_scratch.end());
    for (int v : neighbor_scratch) push_edge(heap, w, a, v);
  }

  result.reached_target = w.alive_faces <= target_faces;

  // compact into the output mesh
  std::vector<int> remap(w.pos.size(), -1);
  TriMesh& out = result.mesh;
  out.units_per_cm = mesh.units_per_cm;
  for (int f = 0; f < (int)w.faces.size(); ++f) {
    if (!w.face_alive[f]) continue;
    std::array<int, 3> tri;
    for (int k = 0; k < 3; ++k) {
      int v = w.faces[f][k];
      if (remap[v] < 0) {
        remap[v] = (int)out.vertices.size();
        out.vertices.push_back(w.pos[v]);
      }
      tri[k] = remap[v];
    }
    out.faces.push_back(tri);
  }
  out.validate();
  return result;
}

std::vector<DecimateResult> make_lr_ladder(const TriMesh& mesh,
                                           const std::vector<long>& targets) {
  std::vector<DecimateResult> out(targets.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < (long)targets.size(); ++i) out[i] = decimate(mesh, targets[i]);
  return out;
}

}  // namespace surs
