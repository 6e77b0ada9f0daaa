#include "surs/marching.hpp"

#include <array>
#include <cstdint>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace surs {

namespace {

// Six tetrahedra around the cell diagonal from corner 0 to corner 7; corner
// i sits at ((i & 1), (i >> 1) & 1, (i >> 2) & 1). Neighboring cells use the
// same split, so shared faces carry matching diagonals.
constexpr int kTets[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7},
                             {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};

struct CaseTri {
  // three crossing edges, each as a pair of cell corner ids
  int e[3][2];
};

struct TetTable {
  // tris[t][mask]: triangles for tet t when mask bit i marks corner
  // kTets[t][i] as inside
  std::vector<CaseTri> tris[6][16];
};

Vec3 corner_pos(int c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); }

TetTable build_table() {
  TetTable table;
  for (int t = 0; t < 6; ++t) {
    for (int mask = 1; mask < 15; ++mask) {
      std::vector<int> in, out;
      for (int i = 0; i < 4; ++i) (mask >> i & 1 ? in : out).push_back(kTets[t][i]);

      std::vector<CaseTri> tris;
      std::vector<std::array<int, 2>> loop;  // crossing edges in cycle order
      if (in.size() == 1) {
        loop = {{in[0], out[0]}, {in[0], out[1]}, {in[0], out[2]}};
        tris.push_back({{{loop[0][0], loop[0][1]},
                         {loop[1][0], loop[1][1]},
                         {loop[2][0], loop[2][1]}}});
      } else if (in.size() == 3) {
        loop = {{in[0], out[0]}, {in[1], out[0]}, {in[2], out[0]}};
        tris.push_back({{{loop[0][0], loop[0][1]},
                         {loop[1][0], loop[1][1]},
                         {loop[2][0], loop[2][1]}}});
      } else {  // 2 in, 2 out: a quad, walked so consecutive points share a face
        loop = {{in[0], out[0]}, {in[0], out[1]}, {in[1], out[1]}, {in[1], out[0]}};
        tris.push_back({{{loop[0][0], loop[0][1]},
                         {loop[1][0], loop[1][1]},
                         {loop[2][0], loop[2][1]}}});
        tris.push_back({{{loop[0][0], loop[0][1]},
                         {loop[2][0], loop[2][1]},
                         {loop[3][0], loop[3][1]}}});
      }

      // orient outward: normals point from the inside corners toward the
      // outside ones, using edge midpoints as representative geometry
      Vec3 d = Vec3::Zero();
      for (int c : out) d += corner_pos(c) / (double)out.size();
      for (int c : in) d -= corner_pos(c) / (double)in.size();
      for (CaseTri& tri : tris) {
        Vec3 p[3];
        for (int v = 0; v < 3; ++v)
          p[v] = 0.5 * (corner_pos(tri.e[v][0]) + corner_pos(tri.e[v][1]));
        if ((p[1] - p[0]).cross(p[2] - p[0]).dot(d) < 0) {
          std::swap(tri.e[1][0], tri.e[2][0]);
          std::swap(tri.e[1][1], tri.e[2][1]);
        }
      }
      table.tris[t][mask] = std::move(tris);
    }
  }
  return table;
}

const TetTable& tet_table() {
  static const TetTable table = build_table();
  return table;
}

}  // namespace

TriMesh marching_cubes(const FieldGrid& grid, float iso) {
  const int r = grid.r;
  if (r < 2) throw ValidationError("marching cubes needs at least a 2x2x2 grid");
  if (grid.v.size() != (size_t)r * r * r)
    throw ValidationError("grid value count does not match its resolution");
  if (r > 1024) throw ValidationError("grid resolution above 1024 is not supported");
  const TetTable& table = tet_table();

  // Per-slab extraction; the weld below runs serially in slab order, so the
  // mesh is identical for any thread count.
  struct Slab {
    std::vector<std::pair<std::uint64_t, Vec3>> points;  // first-seen order
    std::vector<std::array<std::uint64_t, 3>> tris;
  };
  const int slabs = r - 1;
  std::vector<Slab> out(slabs);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int k = 0; k < slabs; ++k) {
    Slab& slab = out[k];
    std::unordered_map<std::uint64_t, int> seen;
    auto edge_key = [&](std::uint64_t a, std::uint64_t b) {
      return a < b ? (a << 32 | b) : (b << 32 | a);
    };
    std::uint64_t nid[8];
    float val[8];
    for (int j = 0; j < r - 1; ++j)
      for (int i = 0; i < r - 1; ++i) {
        bool any_in = false, any_out = false;
        for (int c = 0; c < 8; ++c) {
          nid[c] = grid.idx(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
          val[c] = grid.v[nid[c]];
          (val[c] > iso ? any_in : any_out) = true;
        }
        if (!any_in || !any_out) continue;
        for (int t = 0; t < 6; ++t) {
          int mask = 0;
          for (int c = 0; c < 4; ++c)
            if (val[kTets[t][c]] > iso) mask |= 1 << c;
          for (const CaseTri& tri : table.tris[t][mask]) {
            std::array<std::uint64_t, 3> keys;
            for (int v = 0; v < 3; ++v) {
              std::uint64_t ka = nid[tri.e[v][0]], kb = nid[tri.e[v][1]];
              std::uint64_t key = edge_key(ka, kb);
              keys[v] = key;
              if (seen.emplace(key, (int)slab.points.size()).second) {
                // canonical endpoint order keeps t bit-identical across slabs
                std::uint64_t a = std::min(ka, kb), b = std::max(ka, kb);
                double va = grid.v[a], vb = grid.v[b];
                double tt = ((double)iso - va) / (vb - va);
                Vec3 pa((double)(a % r), (double)(a / r % r), (double)(a / r / r));
                Vec3 pb((double)(b % r), (double)(b / r % r), (double)(b / r / r));
                Vec3 p = grid.origin + (pa + tt * (pb - pa)) * grid.h;
                slab.points.emplace_back(key, p);
              }
            }
            slab.tris.push_back(keys);
          }
        }
      }
  }

  TriMesh mesh;
  std::unordered_map<std::uint64_t, int> index;
  for (const Slab& slab : out) {
    for (const auto& [key, p] : slab.points)
      if (index.emplace(key, (int)mesh.vertices.size()).second) mesh.vertices.push_back(p);
    for (const auto& keys : slab.tris) {
      int a = index.at(keys[0]), b = index.at(keys[1]), c = index.at(keys[2]);
      if (a == b || b == c || a == c) continue;  // collapsed by the weld
      mesh.faces.push_back({a, b, c});
    }
  }
  return mesh;
}

}  // namespace surs
