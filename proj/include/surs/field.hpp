#pragma once

#include <vector>

#include "surs/camera.hpp"
#include "surs/image.hpp"
#include "surs/net.hpp"

namespace surs {

// Regular scalar grid. Node (i, j, k) sits at origin + (i, j, k) * h; values
// are stored x-fastest.
struct FieldGrid {
  int r = 0;
  double h = 0;
  Vec3 origin = Vec3::Zero();
  std::vector<float> v;

  size_t idx(int i, int j, int k) const { return ((size_t)k * r + j) * r + i; }
  Vec3 node(int i, int j, int k) const { return origin + Vec3(i, j, k) * h; }
};

// Occupancy of world points under the implicit field defined by the model,
// one input image, and its camera. Points outside the camera window score 0.
// Evaluation runs in fixed 65536-point chunks so thread count never changes
// the result. Uses the finest available head; a model without one falls back
// to its coarse head.
std::vector<float> evaluate_field(const Model<float>& model, const Image& lr,
                                  const OrthoCamera& cam, const std::vector<Vec3>& points);

// Same field sampled on an axis-aligned cube of side `span` centered on
// `center`, with resolution nodes per axis (>= 8), h = span / (resolution-1).
FieldGrid evaluate_field_grid(const Model<float>& model, const Image& lr, const OrthoCamera& cam,
                              int resolution, double span = 1.1, Vec3 center = Vec3::Zero());

}  // namespace surs
