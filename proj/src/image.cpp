#include "surs/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include <png.h>

namespace surs {

namespace {

// Catmull-Rom kernel, a = -0.5
double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * a;
  return 0.0;
}

inline int mirror_index(int i, int n) {
  if (i < 0) i = -i - 1;
  if (i >= n) i = 2 * n - 1 - i;
  return std::clamp(i, 0, n - 1);
}

// 8 taps of the factor-2 antialiased kernel for output index i, normalized.
struct Taps {
  int idx[8];
  double w[8];
};

Taps make_taps(int i, int n_src) {
  Taps t;
  double center = 2.0 * i + 1.0;  // source-pixel units, pixel j has center j + 0.5
  double sum = 0.0;
  for (int k = 0; k < 8; ++k) {
    int j = 2 * i - 3 + k;
    t.idx[k] = mirror_index(j, n_src);
    t.w[k] = cubic_weight((j + 0.5 - center) / 2.0);
    sum += t.w[k];
  }
  for (int k = 0; k < 8; ++k) t.w[k] /= sum;
  return t;
}

void require_even(const Image& img) {
  if (img.width % 2 != 0 || img.height % 2 != 0 || img.width < 2 || img.height < 2)
    throw ValidationError("bicubic_downscale2: dimensions must be even and positive");
}

}  // namespace

Image bicubic_downscale2(const Image& img) {
  require_even(img);
  const int ow = img.width / 2, oh = img.height / 2, ch = img.channels;

  std::vector<Taps> xtaps(ow), ytaps(oh);
  for (int i = 0; i < ow; ++i) xtaps[i] = make_taps(i, img.width);
  for (int i = 0; i < oh; ++i) ytaps[i] = make_taps(i, img.height);

  // horizontal pass, unclamped intermediate
  std::vector<double> mid((size_t)img.height * ow * ch, 0.0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < ow; ++x) {
      const Taps& t = xtaps[x];
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 8; ++k) acc += t.w[k] * img.at(t.idx[k], y, c);
        mid[((size_t)y * ow + x) * ch + c] = acc;
      }
    }
  }

  Image out(ow, oh, ch);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < oh; ++y) {
    const Taps& t = ytaps[y];
    for (int x = 0; x < ow; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 8; ++k) acc += t.w[k] * mid[((size_t)t.idx[k] * ow + x) * ch + c];
        out.at(x, y, c) = (float)std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

Image bicubic_upscale2(const Image& img) {
  if (img.width < 4 || img.height < 4)
    throw ValidationError("bicubic_upscale2: image too small");
  const int ow = img.width * 2, oh = img.height * 2, ch = img.channels;

  // Tap value with linear extrapolation outside [0, n).
  auto fetch = [](const Image& im, int x, int y, int c) -> double {
    auto axis = [](int i, int n, int& a, int& b, double& da, double& db) {
      if (i < 0) {
        a = 0;
        b = 1;
        da = 1.0 - i;
        db = (double)i;
      } else if (i >= n) {
        a = n - 2;
        b = n - 1;
        da = (double)(n - 1 - i);
        db = (double)(i - (n - 2));
      } else {
        a = b = i;
        da = 1.0;
        db = 0.0;
      }
    };
    int xa, xb, ya, yb;
    double wxa, wxb, wya, wyb;
    axis(x, im.width, xa, xb, wxa, wxb);
    axis(y, im.height, ya, yb, wya, wyb);
    double vx_a = wxa * im.at(xa, ya, c) + wxb * im.at(xb, ya, c);
    double vx_b = wxa * im.at(xa, yb, c) + wxb * im.at(xb, yb, c);
    return wya * vx_a + wyb * vx_b;
  };

  // Output pixel i sits at coarse coordinate i/2 - 0.25; two interleaved
  // phases at offsets 0.25 and 0.75 from the base sample.
  auto taps_1d = [](int i, int& base, double w[4]) {
    double c = 0.5 * i - 0.25;
    base = (int)std::floor(c);
    double f = c - base;
    for (int k = 0; k < 4; ++k) w[k] = cubic_weight(f - (k - 1));
    double sum = w[0] + w[1] + w[2] + w[3];
    for (int k = 0; k < 4; ++k) w[k] /= sum;
  };

  Image out(ow, oh, ch);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < oh; ++y) {
    int by;
    double wy[4];
    taps_1d(y, by, wy);
    for (int x = 0; x < ow; ++x) {
      int bx;
      double wx[4];
      taps_1d(x, bx, wx);
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int ky = 0; ky < 4; ++ky)
          for (int kx = 0; kx < 4; ++kx)
            acc += wy[ky] * wx[kx] * fetch(img, bx - 1 + kx, by - 1 + ky, c);
        out.at(x, y, c) = (float)std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

namespace ref {

Image bicubic_downscale2_direct(const Image& img) {
  require_even(img);
  const int ow = img.width / 2, oh = img.height / 2, ch = img.channels;
  Image out(ow, oh, ch);
  for (int y = 0; y < oh; ++y) {
    Taps ty = make_taps(y, img.height);
    for (int x = 0; x < ow; ++x) {
      Taps tx = make_taps(x, img.width);
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int ky = 0; ky < 8; ++ky)
          for (int kx = 0; kx < 8; ++kx)
            acc += ty.w[ky] * tx.w[kx] * img.at(tx.idx[kx], ty.idx[ky], c);
        out.at(x, y, c) = (float)std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace ref

// ------------------------------------------------------------------- PNG

namespace {

double srgb_encode(double c) {
  c = std::clamp(c, 0.0, 1.0);
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double srgb_decode(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s <= 0.04045 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
}

struct PngCloser {
  FILE* f = nullptr;
  ~PngCloser() {
    if (f) std::fclose(f);
  }
};

void write_png_impl(const std::string& path, const Image& img, int bit_depth, bool srgb) {
  if (img.channels != 1 && img.channels != 3)
    throw ValidationError("png write: need 1 or 3 channels");
  if (img.width <= 0 || img.height <= 0) throw ValidationError("png write: empty image");

  PngCloser fc;
  fc.f = std::fopen(path.c_str(), "wb");
  if (!fc.f) throw FormatError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("libpng write failure for " + path);
  }
  png_init_io(png, fc.f);
  int color_type = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, img.width, img.height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  if (bit_depth == 8) {
    std::vector<png_byte> row((size_t)img.width * img.channels);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < img.channels; ++c) {
          double v = srgb ? srgb_encode(img.at(x, y, c)) : std::clamp((double)img.at(x, y, c), 0.0, 1.0);
          row[(size_t)x * img.channels + c] = (png_byte)std::lround(v * 255.0);
        }
      png_write_row(png, row.data());
    }
  } else {
    png_set_swap(png);  // rows below are little-endian
    std::vector<png_uint_16> row((size_t)img.width * img.channels);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < img.channels; ++c) {
          double v = std::clamp((double)img.at(x, y, c), 0.0, 1.0);
          row[(size_t)x * img.channels + c] = (png_uint_16)std::lround(v * 65535.0);
        }
      png_write_row(png, (png_bytep)row.data());
    }
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_srgb8(const std::string& path, const Image& img) {
  write_png_impl(path, img, 8, true);
}

void write_png_linear16(const std::string& path, const Image& img) {
  write_png_impl(path, img, 16, false);
}

Image read_png(const std::string& path) {
  PngCloser fc;
  fc.f = std::fopen(path.c_str(), "rb");
  if (!fc.f) throw FormatError("cannot open " + path);
  png_byte header[8];
  if (std::fread(header, 1, 8, fc.f) != 8 || png_sig_cmp(header, 0, 8))
    throw FormatError("not a png file: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("libpng read failure for " + path);
  }
  png_init_io(png, fc.f);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  int width = png_get_image_width(png, info);
  int height = png_get_image_height(png, info);
  int channels = png_get_channels(png, info);
  bit_depth = png_get_bit_depth(png, info);

  Image out(width, height, channels);
  if (bit_depth == 8) {
    std::vector<png_byte> row((size_t)width * channels);
    for (int y = 0; y < height; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (int x = 0; x < width; ++x)
        for (int c = 0; c < channels; ++c)
          out.at(x, y, c) = (float)srgb_decode(row[(size_t)x * channels + c] / 255.0);
    }
  } else if (bit_depth == 16) {
    std::vector<png_uint_16> row((size_t)width * channels);
    for (int y = 0; y < height; ++y) {
      png_read_row(png, (png_bytep)row.data(), nullptr);
      for (int x = 0; x < width; ++x)
        for (int c = 0; c < channels; ++c)
          out.at(x, y, c) = (float)(row[(size_t)x * channels + c] / 65535.0);
    }
  } else {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported png bit depth in " + path);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

// ------------------------------------------------------------- depth raw

static const char kDepthMagic[8] = {'S', 'U', 'R', 'S', 'D', 'E', 'P', 'T'};

void write_depth_raw(const std::string& path, const Image& depth) {
  if (depth.channels != 1) throw ValidationError("depth sidecar: need 1 channel");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw FormatError("cannot write " + path);
  std::fwrite(kDepthMagic, 1, 8, f);
  std::uint32_t wh[2] = {(std::uint32_t)depth.width, (std::uint32_t)depth.height};
  std::fwrite(wh, 4, 2, f);
  std::fwrite(depth.v.data(), 4, depth.v.size(), f);
  std::fclose(f);
}

Image read_depth_raw(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw FormatError("cannot open " + path);
  char magic[8];
  std::uint32_t wh[2];
  if (std::fread(magic, 1, 8, f) != 8 || std::memcmp(magic, kDepthMagic, 8) != 0) {
    std::fclose(f);
    throw FormatError("bad depth sidecar magic in " + path);
  }
  if (std::fread(wh, 4, 2, f) != 2 || wh[0] == 0 || wh[1] == 0 || wh[0] > 1 << 20 ||
      wh[1] > 1 << 20) {
    std::fclose(f);
    throw FormatError("bad depth sidecar header in " + path);
  }
  Image out((int)wh[0], (int)wh[1], 1);
  size_t n = std::fread(out.v.data(), 4, out.v.size(), f);
  std::fclose(f);
  if (n != out.v.size()) throw FormatError("truncated depth sidecar " + path);
  return out;
}

}  // namespace surs
