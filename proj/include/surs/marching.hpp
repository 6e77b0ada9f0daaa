#pragma once

#include "surs/field.hpp"
#include "surs/mesh.hpp"

namespace surs {

// Extracts the iso-surface of a scalar grid as a welded triangle mesh.
// Each cell splits into the six tetrahedra sharing the main diagonal, which
// tile space consistently, so the result is crack-free and watertight
// whenever the surface stays inside the grid. Inside means value > iso;
// triangles wind with outward normals (toward lower values). A grid that
// never crosses iso yields an empty mesh.
TriMesh marching_cubes(const FieldGrid& grid, float iso = 0.5f);

}  // namespace surs
