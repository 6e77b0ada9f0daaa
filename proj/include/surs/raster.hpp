#pragma once

#include "surs/camera.hpp"
#include "surs/image.hpp"

namespace surs {

// Output of one rasterization pass. Background: color black, normal zero,
// depth +infinity, mask 0.
struct Raster {
  Image color;   // 3 channels, flat-shaded Lambertian
  Image normal;  // 3 channels, unit face normal of the front-most face
  Image depth;   // 1 channel, camera-space depth
  Image mask;    // 1 channel, 0 or 1
};

// Deterministic z-buffered rasterization. Ties keep the lower face index, so
// the image is a pure function of mesh and camera. Parallelism is over row
// bands with candidate order preserved, which keeps the output bit-identical
// to the serial reference for any thread count.
Raster rasterize(const TriMesh& mesh, const OrthoCamera& cam);

namespace ref {
Raster rasterize_serial(const TriMesh& mesh, const OrthoCamera& cam);
}  // namespace ref

// One training view: ground-truth render at 2*N_I and its degraded input.
struct ImageTriple {
  Image gt;   // color at 2*N_I
  Image lr;   // bicubic factor-2 degradation of gt, at N_I
  Raster hr;  // full raster bundle at 2*N_I (normals, depth, mask)
};

// Renders each mesh at twice the target resolution and degrades the color
// image down to N_I. The camera's image_size field is overridden.
std::vector<ImageTriple> render_dataset(const std::vector<TriMesh>& meshes,
                                        const OrthoCamera& cam, int n_i);

}  // namespace surs
