#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "surs/common.hpp"
#include "surs/mesh.hpp"

namespace surs {

// ------------------------------------------------------------------ tensors

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> v;

  size_t size() const { return v.size(); }
};

template <typename T>
class ParamStore {
 public:
  int add(const std::string& name, std::vector<int> shape) {
    if (by_name_.count(name)) throw ValidationError("duplicate parameter name " + name);
    size_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw ValidationError("bad shape for parameter " + name);
      n *= (size_t)d;
    }
    Tensor<T> t;
    t.shape = std::move(shape);
    t.v.assign(n, T(0));
    offsets_.push_back(total_);
    total_ += n;
    names_.push_back(name);
    by_name_[name] = (int)tensors_.size();
    tensors_.push_back(std::move(t));
    return (int)tensors_.size() - 1;
  }

  int index_of(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? -1 : it->second;
  }
  Tensor<T>& at(int i) { return tensors_[i]; }
  const Tensor<T>& at(int i) const { return tensors_[i]; }
  const std::string& name(int i) const { return names_[i]; }
  int count() const { return (int)tensors_.size(); }
  size_t total() const { return total_; }
  size_t offset(int i) const { return offsets_[i]; }

 private:
  std::vector<Tensor<T>> tensors_;
  std::vector<std::string> names_;
  std::vector<size_t> offsets_;
  std::map<std::string, int> by_name_;
  size_t total_ = 0;
};

// Flat gradient buffer aligned with a ParamStore's registration layout.
// Per-image buffers are reduced in a fixed image order, which keeps training
// bit-identical for any thread count.
template <typename T>
struct GradBuffer {
  std::vector<T> g;

  explicit GradBuffer(size_t n = 0) : g(n, T(0)) {}
  void reset(size_t n) { g.assign(n, T(0)); }
  T* span(const ParamStore<T>& store, int tensor_idx) { return g.data() + store.offset(tensor_idx); }
  void accumulate(const GradBuffer& other) {
    for (size_t i = 0; i < g.size(); ++i) g[i] += other.g[i];
  }
  void scale(T s) {
    for (T& x : g) x *= s;
  }
};

// ------------------------------------------------------------- feature maps

template <typename T>
struct FMap {
  int w = 0, h = 0, c = 0;
  std::vector<T> v;

  FMap() = default;
  FMap(int w_, int h_, int c_) : w(w_), h(h_), c(c_), v((size_t)w_ * h_ * c_, T(0)) {}
  void reset(int w_, int h_, int c_) {
    w = w_;
    h = h_;
    c = c_;
    v.assign((size_t)w_ * h_ * c_, T(0));
  }
  void zero() { std::fill(v.begin(), v.end(), T(0)); }
  T& at(int x, int y, int ch) { return v[((size_t)y * w + x) * c + ch]; }
  T at(int x, int y, int ch) const { return v[((size_t)y * w + x) * c + ch]; }
};

// --------------------------------------------------------------- primitives

template <typename T>
inline T lrelu(T x) {
  return x > T(0) ? x : T(0.01) * x;
}
template <typename T>
inline T lrelu_grad(T pre) {
  return pre > T(0) ? T(1) : T(0.01);
}
template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// 3x3 convolution, zero padding 1, stride 1 or 2. Weight shape {co,3,3,ci}.
template <typename T>
void conv3x3_forward(const FMap<T>& in, const Tensor<T>& w, const Tensor<T>& b, int stride,
                     FMap<T>& out) {
  const int co = w.shape[0], ci = w.shape[3];
  out.reset(in.w / stride, in.h / stride, co);
  for (int oy = 0; oy < out.h; ++oy)
    for (int ox = 0; ox < out.w; ++ox)
      for (int k = 0; k < co; ++k) {
        T acc = b.v[k];
        const T* wk = w.v.data() + (size_t)k * 9 * ci;
        for (int ky = 0; ky < 3; ++ky) {
          int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= in.h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            int ix = ox * stride + kx - 1;
            if (ix < 0 || ix >= in.w) continue;
            const T* src = &in.v[((size_t)iy * in.w + ix) * ci];
            const T* wp = wk + ((size_t)ky * 3 + kx) * ci;
            for (int c = 0; c < ci; ++c) acc += src[c] * wp[c];
          }
        }
        out.at(ox, oy, k) = acc;
      }
}

// d_in may be null for the first layer; d_w/d_b point into a GradBuffer.
template <typename T>
void conv3x3_backward(const FMap<T>& in, const Tensor<T>& w, int stride, const FMap<T>& d_out,
                      FMap<T>* d_in, T* d_w, T* d_b) {
  const int co = w.shape[0], ci = w.shape[3];
  for (int oy = 0; oy < d_out.h; ++oy)
    for (int ox = 0; ox < d_out.w; ++ox)
      for (int k = 0; k < co; ++k) {
        T g = d_out.at(ox, oy, k);
        if (g == T(0)) continue;
        d_b[k] += g;
        const T* wk = w.v.data() + (size_t)k * 9 * ci;
        T* dwk = d_w + (size_t)k * 9 * ci;
        for (int ky = 0; ky < 3; ++ky) {
          int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= in.h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            int ix = ox * stride + kx - 1;
            if (ix < 0 || ix >= in.w) continue;
            const T* src = &in.v[((size_t)iy * in.w + ix) * ci];
            T* dwp = dwk + ((size_t)ky * 3 + kx) * ci;
            for (int c = 0; c < ci; ++c) dwp[c] += g * src[c];
            if (d_in) {
              T* dst = &d_in->v[((size_t)iy * in.w + ix) * ci];
              const T* wp = wk + ((size_t)ky * 3 + kx) * ci;
              for (int c = 0; c < ci; ++c) dst[c] += g * wp[c];
            }
          }
        }
      }
}

template <typename T>
void lrelu_forward(const FMap<T>& pre, FMap<T>& act) {
  act.reset(pre.w, pre.h, pre.c);
  for (size_t i = 0; i < pre.v.size(); ++i) act.v[i] = lrelu(pre.v[i]);
}

template <typename T>
void lrelu_backward(const FMap<T>& pre, const FMap<T>& d_act, FMap<T>& d_pre) {
  d_pre.reset(pre.w, pre.h, pre.c);
  for (size_t i = 0; i < pre.v.size(); ++i) d_pre.v[i] = d_act.v[i] * lrelu_grad(pre.v[i]);
}

template <typename T>
void upsample2_forward(const FMap<T>& in, FMap<T>& out) {
  out.reset(in.w * 2, in.h * 2, in.c);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      for (int c = 0; c < in.c; ++c) out.at(x, y, c) = in.at(x / 2, y / 2, c);
}

template <typename T>
void upsample2_backward(const FMap<T>& d_out, FMap<T>& d_in) {
  d_in.reset(d_out.w / 2, d_out.h / 2, d_out.c);
  for (int y = 0; y < d_out.h; ++y)
    for (int x = 0; x < d_out.w; ++x)
      for (int c = 0; c < d_out.c; ++c) d_in.at(x / 2, y / 2, c) += d_out.at(x, y, c);
}

template <typename T>
void concat_channels(const FMap<T>& a, const FMap<T>& b, FMap<T>& out) {
  if (a.w != b.w || a.h != b.h) throw ValidationError("concat: map sizes disagree");
  out.reset(a.w, a.h, a.c + b.c);
  for (int y = 0; y < a.h; ++y)
    for (int x = 0; x < a.w; ++x) {
      for (int c = 0; c < a.c; ++c) out.at(x, y, c) = a.at(x, y, c);
      for (int c = 0; c < b.c; ++c) out.at(x, y, a.c + c) = b.at(x, y, c);
    }
}

template <typename T>
void split_channels_backward(const FMap<T>& d_cat, FMap<T>& d_a, FMap<T>& d_b, int ca, int cb) {
  d_a.reset(d_cat.w, d_cat.h, ca);
  d_b.reset(d_cat.w, d_cat.h, cb);
  for (int y = 0; y < d_cat.h; ++y)
    for (int x = 0; x < d_cat.w; ++x) {
      for (int c = 0; c < ca; ++c) d_a.at(x, y, c) = d_cat.at(x, y, c);
      for (int c = 0; c < cb; ++c) d_b.at(x, y, c) = d_cat.at(x, y, ca + c);
    }
}

// ------------------------------------------------------------------ configs

enum class ArchKind { full, no_unet, only_mr, only_sr, no_ldiff };

ArchKind arch_from_string(const std::string& s);
std::string arch_to_string(ArchKind a);

struct EncoderConfig {
  int n_i = 64;   // input image side
  int c_hi = 8;   // detail-feature channels
  int c_lo = 16;  // context-feature channels
  int stacks = 2; // residual blocks on the lo branch
};

struct MlpConfig {
  std::vector<int> widths;  // widths[0] = input dim, widths.back() = 1
  std::vector<int> skips;   // 1-based layers whose input re-concatenates the raw input
};

struct ModelConfig {
  EncoderConfig enc;
  MlpConfig mr, sr;
  ArchKind arch = ArchKind::full;

  bool has_mr() const { return arch != ArchKind::only_sr; }
  bool has_sr() const { return arch != ArchKind::only_mr; }
  bool sr_takes_mr() const { return has_mr() && has_sr(); }
  bool with_unet() const { return arch != ArchKind::no_unet; }
  bool with_recon() const { return with_unet(); }
  int hi_scale() const { return with_unet() ? 2 : 1; }
  int feature_dim() const { return enc.c_hi + enc.c_lo; }

  void validate() const;
};

// Hidden widths shared by both heads; input widths derived from the encoder.
ModelConfig make_model_config(ArchKind arch, int n_i, int c_hi, int c_lo, int stacks,
                              const std::vector<int>& hidden, const std::vector<int>& skips);
ModelConfig make_desk_model_config(ArchKind arch = ArchKind::full);
ModelConfig make_tiny_model_config(ArchKind arch = ArchKind::full);  // gradient-check scale

// ------------------------------------------------------------------- states

template <typename T>
struct EncoderState {
  FMap<T> input;                                  // n x n x 3
  FMap<T> stem_pre, stem, down_pre, down, mid_pre, mid;
  FMap<T> up1, cat, fuse_pre, fuse, up2, hi;      // hi branch
  FMap<T> lo_pre, lo0;                            // lo stem
  std::vector<FMap<T>> blk_c1_pre, blk_c1, blk_c2_pre, blk_sum_pre, blk_out;
  FMap<T> recon;                                  // 2n x 2n x 3, linear head
  const FMap<T>& lo_out() const { return blk_out.empty() ? lo0 : blk_out.back(); }
};

template <typename T>
struct MlpState {
  std::vector<std::vector<T>> layer_in;  // concatenated input per layer
  std::vector<std::vector<T>> pre;       // pre-activation per layer
  T out = T(0);
};

// Bilinear taps into one feature grid; indices are node offsets, weights sum
// to 1. Out-of-window samples carry zero taps and in_window = false.
template <typename T>
struct TapRecord {
  int node[4] = {0, 0, 0, 0};
  T w[4] = {T(0), T(0), T(0), T(0)};
};

template <typename T>
struct EmbedRecord {
  TapRecord<T> hi, lo;
  bool in_window = false;
};

// ------------------------------------------------------------------- model

template <typename T>
class Model {
 public:
  ModelConfig cfg;
  ParamStore<T> params;

  Model(const ModelConfig& config, std::uint64_t seed);

  // Forward pieces. encode validates the image shape against the config.
  void encode(const std::vector<float>& image, int image_side, int image_channels,
              EncoderState<T>& st) const;
  void decode_recon(EncoderState<T>& st) const;

  // Bilinear pixel-aligned feature: hi grid at p*hi_scale, lo at p/2,
  // concatenated hi then lo. p is in input-image pixel coordinates.
  void index_embedding(const EncoderState<T>& st, T px, T py, std::vector<T>& feature,
                       EmbedRecord<T>& rec) const;

  T mr_forward(const std::vector<T>& feature, T z, MlpState<T>& st) const;
  T sr_forward(const std::vector<T>& feature, T z, T s_mr, MlpState<T>& st) const;

  // Backward pieces; gradients accumulate into grad (ParamStore layout).
  // mlp_backward returns via d_raw the gradient w.r.t. the raw input vector.
  void mr_backward(const MlpState<T>& st, T d_out, GradBuffer<T>& grad,
                   std::vector<T>& d_raw) const;
  void sr_backward(const MlpState<T>& st, T d_out, GradBuffer<T>& grad,
                   std::vector<T>& d_raw) const;
  void embedding_backward(const EmbedRecord<T>& rec, const std::vector<T>& d_feature,
                          FMap<T>& d_hi, FMap<T>& d_lo) const;
  void recon_backward(const EncoderState<T>& st, const FMap<T>& d_recon, GradBuffer<T>& grad,
                      FMap<T>& d_hi) const;
  void encoder_backward(const EncoderState<T>& st, FMap<T>& d_hi, FMap<T>& d_lo,
                        GradBuffer<T>& grad) const;

  // Parameter-tensor handles (indices into params).
  struct Handles {
    int stem_w, stem_b, down_w, down_b, mid_w, mid_b, fuse_w, fuse_b, hi_w, hi_b, lo_w, lo_b;
    std::vector<int> blk_c1_w, blk_c1_b, blk_c2_w, blk_c2_b;
    int recon_w = -1, recon_b = -1;
    std::vector<int> mr_w, mr_b, sr_w, sr_b;
  };
  const Handles& handles() const { return h_; }

 private:
  Handles h_;

  void register_params();
  void he_init(std::uint64_t seed);
  T mlp_run(const std::vector<int>& w_idx, const std::vector<int>& b_idx, const MlpConfig& mc,
            const std::vector<T>& raw, MlpState<T>& st) const;
  void mlp_back(const std::vector<int>& w_idx, const std::vector<int>& b_idx, const MlpConfig& mc,
                const MlpState<T>& st, T d_out, GradBuffer<T>& grad, std::vector<T>& d_raw) const;
};

using ModelF = Model<float>;
using ModelD = Model<double>;

// ------------------------------------------------------------ serialization

void save_checkpoint(const std::string& path, const Model<float>& model, std::uint64_t seed);
Model<float> load_checkpoint(const std::string& path, std::uint64_t* seed_out = nullptr);

// All parameter values finite?
template <typename T>
bool params_finite(const Model<T>& model) {
  for (int i = 0; i < model.params.count(); ++i)
    for (T x : model.params.at(i).v)
      if (!std::isfinite((double)x)) return false;
  return true;
}

extern template class Model<float>;
extern template class Model<double>;

}  // namespace surs
