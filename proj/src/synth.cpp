#include "surs/synth.hpp"

#include <cmath>

namespace surs {

TriMesh make_bump_icosphere(std::uint64_t seed, int subdivisions, double radius,
                            double amplitude) {
  if (radius <= 0 || amplitude < 0 || amplitude >= 0.5)
    throw ValidationError("bump icosphere: need radius > 0 and amplitude in [0, 0.5)");
  TriMesh mesh = make_icosphere(subdivisions, 1.0);
  Rng rng(seed);

  constexpr int kLobes = 5;
  struct Lobe {
    Vec3 u, v;
    double wu, wv, pu, pv, a;
  };
  auto unit_dir = [&rng]() {
    double z = rng.uniform(-1.0, 1.0);
    double t = rng.uniform(0.0, 2.0 * M_PI);
    double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3(s * std::cos(t), s * std::sin(t), z);
  };

  Lobe lobes[kLobes];
  double total = 0;
  for (Lobe& l : lobes) {
    l.u = unit_dir();
    l.v = unit_dir();
    l.wu = rng.uniform(4.0, 12.0);
    l.wv = rng.uniform(4.0, 12.0);
    l.pu = rng.uniform(0.0, 2.0 * M_PI);
    l.pv = rng.uniform(0.0, 2.0 * M_PI);
    l.a = rng.uniform(0.5, 1.0);
    total += l.a;
  }
  for (Lobe& l : lobes) l.a *= amplitude / total;

  for (Vec3& vert : mesh.vertices) {
    Vec3 d = vert.normalized();
    double bump = 0;
    for (const Lobe& l : lobes)
      bump += l.a * std::sin(l.wu * d.dot(l.u) + l.pu) * std::sin(l.wv * d.dot(l.v) + l.pv);
    vert = d * (radius * (1.0 + bump));
  }
  return mesh;
}

std::vector<TriMesh> make_corpus(int count, std::uint64_t base_seed, int subdivisions,
                                 double radius, double amplitude) {
  if (count < 0) throw ValidationError("corpus: count must be non-negative");
  std::vector<TriMesh> shapes;
  shapes.reserve(count);
  for (int i = 0; i < count; ++i)
    shapes.push_back(make_bump_icosphere(Rng::splitmix(base_seed + 0x9e3779b97f4a7c15ull * (i + 1)),
                                        subdivisions, radius, amplitude));
  return shapes;
}

}  // namespace surs
