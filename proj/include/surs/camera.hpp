#pragma once

#include "surs/mesh.hpp"

namespace surs {

struct PixelDepth {
  Vec2 pixel{0, 0};   // continuous pixel coordinates, origin top-left
  double depth = 0;   // signed distance along the view direction
  bool in_window = false;
};

// Fixed-window orthographic camera. The image covers a square world window of
// side `window` centered on `center`; +up maps to decreasing row index.
struct OrthoCamera {
  Vec3 view{0, 0, -1};  // unit view direction
  Vec3 up{0, 1, 0};     // unit up, perpendicular to view
  Vec3 center{0, 0, 0};
  int image_size = 64;  // pixels per side, even, >= 8
  double window = 1.2;  // world units per side

  Vec3 right() const { return view.cross(up); }

  void validate() const;
  PixelDepth project(const Vec3& x) const;
};

OrthoCamera front_camera(int image_size, double window);

}  // namespace surs
