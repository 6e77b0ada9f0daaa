#pragma once

#include <cstdint>
#include <vector>

#include "surs/mesh.hpp"

namespace surs {

// Icosphere with seeded multi-frequency radial bumps. The displacement is
// purely radial, so the mesh stays star-shaped and watertight; `amplitude`
// bounds the total relative radius modulation.
TriMesh make_bump_icosphere(std::uint64_t seed, int subdivisions = 4, double radius = 0.46,
                            double amplitude = 0.07);

// Deterministic family of bump shapes for the synthetic corpus.
std::vector<TriMesh> make_corpus(int count, std::uint64_t base_seed, int subdivisions = 4,
                                 double radius = 0.46, double amplitude = 0.07);

}  // namespace surs
