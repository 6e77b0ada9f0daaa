#pragma once

#include <string>
#include <vector>

#include "surs/common.hpp"

namespace surs {

// Dense float image, row-major, channel-interleaved, values nominally [0, 1]
// for color. Row 0 is the top of the image.
struct Image {
  int width = 0, height = 0, channels = 0;
  std::vector<float> v;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c), v((size_t)w * h * c, 0.f) {}

  float& at(int x, int y, int c) { return v[((size_t)y * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return v[((size_t)y * width + x) * channels + c]; }
};

// Factor-2 antialiased bicubic (Catmull-Rom, a = -0.5) downscale, separable
// passes, mirrored borders, output clamped to [0, 1].
Image bicubic_downscale2(const Image& img);

namespace ref {
// Direct per-pixel 2D kernel sum; oracle for the separable implementation.
Image bicubic_downscale2_direct(const Image& img);
}  // namespace ref

// Factor-2 bicubic interpolation. Border taps are linearly extrapolated so
// images that are linear in x and y are reproduced exactly, including edges.
Image bicubic_upscale2(const Image& img);

// 8-bit PNG with the sRGB transfer function applied on write and inverted on
// read. 1 or 3 channels.
void write_png_srgb8(const std::string& path, const Image& img);

// 16-bit linear PNG, used for normal maps encoded as (n + 1) / 2.
void write_png_linear16(const std::string& path, const Image& img);

// Reads either depth; returns linear float values in [0, 1].
Image read_png(const std::string& path);

// Raw little-endian f32 depth sidecar.
void write_depth_raw(const std::string& path, const Image& depth);  // 1 channel
Image read_depth_raw(const std::string& path);

}  // namespace surs
