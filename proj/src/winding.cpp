#include "surs/winding.hpp"

#include <cmath>

namespace surs {

namespace {

// Van Oosterom-Strackee signed solid angle of triangle (a,b,c) seen from the origin.
inline double solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  double la = a.norm(), lb = b.norm(), lc = c.norm();
  double numer = a.dot(b.cross(c));
  double denom = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
  return 2.0 * std::atan2(numer, denom);
}

}  // namespace

double winding_number(const TriMesh& mesh, const Vec3& p) {
  double sum = 0.0;
  for (const auto& t : mesh.faces)
    sum += solid_angle(mesh.vertices[t[0]] - p, mesh.vertices[t[1]] - p,
                       mesh.vertices[t[2]] - p);
  return sum / (4.0 * M_PI);
}

bool occupancy(const TriMesh& mesh, const Vec3& p) { return winding_number(mesh, p) > 0.5; }

bool near_surface_boundary(double winding) { return std::abs(winding - 0.5) < 1e-3; }

std::vector<double> winding_number_batch(const TriMesh& mesh, const std::vector<Vec3>& pts) {
  std::vector<double> out(pts.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < (long)pts.size(); ++i) out[i] = winding_number(mesh, pts[i]);
  return out;
}

std::vector<std::uint8_t> occupancy_batch(const TriMesh& mesh, const std::vector<Vec3>& pts) {
  std::vector<std::uint8_t> out(pts.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < (long)pts.size(); ++i)
    out[i] = winding_number(mesh, pts[i]) > 0.5 ? 1 : 0;
  return out;
}

namespace ref {

std::vector<double> winding_number_serial(const TriMesh& mesh, const std::vector<Vec3>& pts) {
  std::vector<double> out(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) out[i] = winding_number(mesh, pts[i]);
  return out;
}

namespace {

// 0 = miss, 1 = clean hit, -1 = degenerate (graze); t must exceed eps
int ray_triangle(const Vec3& orig, const Vec3& dir, const Vec3& a, const Vec3& b,
                 const Vec3& c) {
  const double eps = 1e-12;
  Vec3 ab = b - a, ac = c - a;
  Vec3 pvec = dir.cross(ac);
  double det = ab.dot(pvec);
  if (std::abs(det) < eps) return 0;  // parallel; treated as miss, parity vote covers it
  double inv = 1.0 / det;
  Vec3 tvec = orig - a;
  double u = tvec.dot(pvec) * inv;
  const double edge_eps = 1e-9;
  if (u < -edge_eps || u > 1.0 + edge_eps) return 0;
  Vec3 qvec = tvec.cross(ab);
  double v = dir.dot(qvec) * inv;
  if (v < -edge_eps || u + v > 1.0 + edge_eps) return 0;
  double t = ac.dot(qvec) * inv;
  if (t <= 1e-10) return 0;
  if (u < edge_eps || v < edge_eps || u + v > 1.0 - edge_eps) return -1;  // grazing
  return 1;
}

}  // namespace

bool occupancy_ray_parity(const TriMesh& mesh, const Vec3& p, std::uint64_t seed) {
  Rng rng(seed);
  int votes_inside = 0, votes = 0;
  int attempts = 0;
  while (votes < 3 && attempts < 64) {
    attempts++;
    // uniform direction on the sphere
    double z = rng.uniform(-1.0, 1.0);
    double phi = rng.uniform(0.0, 2.0 * M_PI);
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    Vec3 dir(r * std::cos(phi), r * std::sin(phi), z);

    long crossings = 0;
    bool clean = true;
    for (const auto& t : mesh.faces) {
      int h = ray_triangle(p, dir, mesh.vertices[t[0]], mesh.vertices[t[1]],
                           mesh.vertices[t[2]]);
      if (h < 0) {
        clean = false;
        break;
      }
      crossings += h;
    }
    if (!clean) continue;  // grazed an edge; redraw direction
    votes++;
    if (crossings % 2 == 1) votes_inside++;
  }
  if (votes < 3) throw ValidationError("occupancy_ray_parity: no clean ray after 64 tries");
  return votes_inside >= 2;
}

}  // namespace ref

}  // namespace surs
