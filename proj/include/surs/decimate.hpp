#pragma once

#include <vector>

#include "surs/mesh.hpp"

namespace surs {

struct DecimateResult {
  TriMesh mesh;
  bool reached_target = true;  // false: ran out of legal collapses first
  long collapses = 0;
};

// Greedy quadric edge collapse down to `target_faces`. Edge contractions
// only; collapses that would flip a neighbouring face normal by more than 90
// degrees or pinch the surface into a non-manifold configuration are
// rejected. Boundary edges are anchored by a heavily weighted perpendicular
// plane quadric. A target at or above the current face count returns the
// input unchanged.
DecimateResult decimate(const TriMesh& mesh, long target_faces);

// Independent decimations of the same source, one per target.
std::vector<DecimateResult> make_lr_ladder(const TriMesh& mesh,
                                           const std::vector<long>& targets);

}  // namespace surs
