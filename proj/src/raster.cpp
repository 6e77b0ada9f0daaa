#include "surs/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace surs {

void OrthoCamera::validate() const {
  if (std::abs(view.norm() - 1.0) > 1e-6) throw ValidationError("camera: view not unit length");
  if (std::abs(up.norm() - 1.0) > 1e-6) throw ValidationError("camera: up not unit length");
  if (std::abs(view.dot(up)) > 1e-6) throw ValidationError("camera: view and up not perpendicular");
  if (image_size < 8 || image_size % 2 != 0)
    throw ValidationError("camera: image_size must be even and at least 8");
  if (!(window > 0.0)) throw ValidationError("camera: window must be positive");
}

PixelDepth OrthoCamera::project(const Vec3& x) const {
  Vec3 rel = x - center;
  PixelDepth out;
  double u = rel.dot(right()) / window;
  double v = rel.dot(up) / window;
  out.pixel = Vec2((u + 0.5) * image_size, (0.5 - v) * image_size);
  out.depth = rel.dot(view);
  out.in_window = out.pixel.x() >= 0.0 && out.pixel.x() <= image_size &&
                  out.pixel.y() >= 0.0 && out.pixel.y() <= image_size;
  return out;
}

OrthoCamera front_camera(int image_size, double window) {
  OrthoCamera cam;
  cam.image_size = image_size;
  cam.window = window;
  cam.validate();
  return cam;
}

namespace {

// fixed two-light Lambertian setup; grayscale albedo
const Vec3 kLight1 = Vec3(0.45, 0.52, 0.9).normalized();
const Vec3 kLight2 = Vec3(-0.62, -0.35, 0.45).normalized();
constexpr double kIntensity1 = 0.72;
constexpr double kIntensity2 = 0.28;
constexpr double kAmbient = 0.14;
constexpr double kAlbedo = 0.85;

inline double shade(const Vec3& n) {
  double s = kAmbient + kIntensity1 * std::max(0.0, n.dot(kLight1)) +
             kIntensity2 * std::max(0.0, n.dot(kLight2));
  return std::clamp(kAlbedo * s, 0.0, 1.0);
}

inline double edge_fn(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

struct ProjectedTri {
  double x[3], y[3], z[3];
  double area;        // signed
  int ymin, ymax;     // inclusive pixel row range
  int xmin, xmax;
  float color;
  Vec3 normal;
};

// Rasterizes rows [row_begin, row_end) of every triangle, in face order.
// Candidate order per pixel is therefore ascending face index regardless of
// how rows are split across threads.
void raster_rows(const std::vector<ProjectedTri>& tris, int row_begin, int row_end,
                 Raster& out) {
  for (const ProjectedTri& t : tris) {
    int y0 = std::max(t.ymin, row_begin);
    int y1 = std::min(t.ymax, row_end - 1);
    double sign = t.area > 0 ? 1.0 : -1.0;
    double inv_area = 1.0 / t.area;
    for (int y = y0; y <= y1; ++y) {
      double py = y + 0.5;
      for (int x = t.xmin; x <= t.xmax; ++x) {
        double px = x + 0.5;
        double w0 = edge_fn(t.x[1], t.y[1], t.x[2], t.y[2], px, py);
        double w1 = edge_fn(t.x[2], t.y[2], t.x[0], t.y[0], px, py);
        double w2 = edge_fn(t.x[0], t.y[0], t.x[1], t.y[1], px, py);
        if (w0 * sign < 0 || w1 * sign < 0 || w2 * sign < 0) continue;
        double z = (w0 * t.z[0] + w1 * t.z[1] + w2 * t.z[2]) * inv_area;
        float& zbuf = out.depth.at(x, y, 0);
        if (z < zbuf) {
          zbuf = (float)z;
          out.mask.at(x, y, 0) = 1.f;
          for (int c = 0; c < 3; ++c) {
            out.color.at(x, y, c) = t.color;
            out.normal.at(x, y, c) = (float)t.normal[c];
          }
        }
      }
    }
  }
}

Raster raster_common(const TriMesh& mesh, const OrthoCamera& cam, bool parallel) {
  cam.validate();
  mesh.validate();
  const int size = cam.image_size;
  Raster out;
  out.color = Image(size, size, 3);
  out.normal = Image(size, size, 3);
  out.depth = Image(size, size, 1);
  out.mask = Image(size, size, 1);
  std::fill(out.depth.v.begin(), out.depth.v.end(), std::numeric_limits<float>::infinity());

  std::vector<ProjectedTri> tris;
  tris.reserve(mesh.faces.size());
  for (int f = 0; f < (int)mesh.faces.size(); ++f) {
    const auto& tri = mesh.faces[f];
    ProjectedTri t;
    double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
    for (int k = 0; k < 3; ++k) {
      PixelDepth pd = cam.project(mesh.vertices[tri[k]]);
      t.x[k] = pd.pixel.x();
      t.y[k] = pd.pixel.y();
      t.z[k] = pd.depth;
      xmin = std::min(xmin, t.x[k]);
      xmax = std::max(xmax, t.x[k]);
      ymin = std::min(ymin, t.y[k]);
      ymax = std::max(ymax, t.y[k]);
    }
    t.area = edge_fn(t.x[0], t.y[0], t.x[1], t.y[1], t.x[2], t.y[2]);
    if (t.area == 0.0) continue;
    t.xmin = std::max(0, (int)std::floor(xmin - 0.5));
    t.xmax = std::min(size - 1, (int)std::ceil(xmax - 0.5));
    t.ymin = std::max(0, (int)std::floor(ymin - 0.5));
    t.ymax = std::min(size - 1, (int)std::ceil(ymax - 0.5));
    if (t.xmin > t.xmax || t.ymin > t.ymax) continue;
    t.normal = mesh.face_normal(f);
    t.color = (float)shade(t.normal);
    tris.push_back(t);
  }

  if (!parallel) {
    raster_rows(tris, 0, size, out);
  } else {
    const int band = 16;
    const int n_bands = (size + band - 1) / band;
#pragma omp parallel for schedule(dynamic)
    for (int b = 0; b < n_bands; ++b)
      raster_rows(tris, b * band, std::min(size, (b + 1) * band), out);
  }
  return out;
}

}  // namespace

Raster rasterize(const TriMesh& mesh, const OrthoCamera& cam) {
  return raster_common(mesh, cam, true);
}

namespace ref {
Raster rasterize_serial(const TriMesh& mesh, const OrthoCamera& cam) {
  return raster_common(mesh, cam, false);
}
}  // namespace ref

std::vector<ImageTriple> render_dataset(const std::vector<TriMesh>& meshes,
                                        const OrthoCamera& cam, int n_i) {
  if (n_i < 8 || n_i % 2 != 0) throw ValidationError("render_dataset: N_I must be even, >= 8");
  OrthoCamera hr_cam = cam;
  hr_cam.image_size = 2 * n_i;
  hr_cam.validate();
  std::vector<ImageTriple> out(meshes.size());
  for (size_t i = 0; i < meshes.size(); ++i) {
    out[i].hr = rasterize(meshes[i], hr_cam);
    out[i].gt = out[i].hr.color;
    out[i].lr = bicubic_downscale2(out[i].gt);
  }
  return out;
}

}  // namespace surs
