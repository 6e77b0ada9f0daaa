#pragma once

#include <vector>

#include "surs/mesh.hpp"

namespace surs {

// Generalized winding number: exact signed-solid-angle sum over every
// triangle, no spatial approximation. Near 1 inside a closed outward-oriented
// mesh, near 0 outside.
double winding_number(const TriMesh& mesh, const Vec3& p);

// Inside test at threshold 1/2; exactly 0.5 counts as outside.
bool occupancy(const TriMesh& mesh, const Vec3& p);

// |w - 0.5| < 1e-3: too close to the surface for a trustworthy label.
bool near_surface_boundary(double winding);

// Parallel over query points; per-point triangle sums stay serial, so the
// result is identical for any thread count.
std::vector<double> winding_number_batch(const TriMesh& mesh, const std::vector<Vec3>& pts);
std::vector<std::uint8_t> occupancy_batch(const TriMesh& mesh, const std::vector<Vec3>& pts);

namespace ref {
// Single-threaded winding scan (benchmark baseline for the batch kernel).
std::vector<double> winding_number_serial(const TriMesh& mesh, const std::vector<Vec3>& pts);

// Independent inside/outside oracle: parity of ray crossings along three
// seeded random directions, majority vote. Directions that graze an edge or
// vertex are re-drawn.
bool occupancy_ray_parity(const TriMesh& mesh, const Vec3& p, std::uint64_t seed);
}  // namespace ref

}  // namespace surs
