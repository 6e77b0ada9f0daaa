#include "surs/net.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>

#include "json.hpp"

namespace surs {

using nlohmann::json;

// ------------------------------------------------------------------ configs

ArchKind arch_from_string(const std::string& s) {
  if (s == "full") return ArchKind::full;
  if (s == "no_unet") return ArchKind::no_unet;
  if (s == "only_mr") return ArchKind::only_mr;
  if (s == "only_sr") return ArchKind::only_sr;
  if (s == "no_ldiff") return ArchKind::no_ldiff;
  throw ValidationError("unknown arch kind: " + s);
}

std::string arch_to_string(ArchKind a) {
  switch (a) {
    case ArchKind::full: return "full";
    case ArchKind::no_unet: return "no_unet";
    case ArchKind::only_mr: return "only_mr";
    case ArchKind::only_sr: return "only_sr";
    case ArchKind::no_ldiff: return "no_ldiff";
  }
  throw ValidationError("bad arch enum");
}

static void validate_mlp(const MlpConfig& m, int expected_in, const char* which) {
  std::string w(which);
  if (m.widths.size() < 2) throw ValidationError(w + " mlp needs at least one layer");
  for (int d : m.widths)
    if (d <= 0) throw ValidationError(w + " mlp has non-positive width");
  if (m.widths.front() != expected_in)
    throw ValidationError(w + " mlp input width " + std::to_string(m.widths.front()) +
                          " does not match feature width " + std::to_string(expected_in));
  if (m.widths.back() != 1) throw ValidationError(w + " mlp must end in one unit");
  int layers = (int)m.widths.size() - 1;
  std::set<int> seen;
  for (int s : m.skips) {
    if (s < 2 || s > layers) throw ValidationError(w + " mlp skip layer out of range");
    if (!seen.insert(s).second) throw ValidationError(w + " mlp has duplicate skip");
  }
}

void ModelConfig::validate() const {
  if (enc.n_i < 8 || enc.n_i % 2 != 0)
    throw ValidationError("encoder input side must be even and at least 8");
  if (enc.c_hi < 1 || enc.c_lo < 1) throw ValidationError("feature channel counts must be positive");
  if (enc.stacks < 0) throw ValidationError("negative residual stack count");
  if (has_mr()) validate_mlp(mr, feature_dim() + 1, "mr");
  if (has_sr()) validate_mlp(sr, feature_dim() + 1 + (sr_takes_mr() ? 1 : 0), "sr");
}

ModelConfig make_model_config(ArchKind arch, int n_i, int c_hi, int c_lo, int stacks,
                              const std::vector<int>& hidden, const std::vector<int>& skips) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.enc = {n_i, c_hi, c_lo, stacks};
  auto widths = [&](int in) {
    std::vector<int> w{in};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(1);
    return w;
  };
  int feat = c_hi + c_lo;
  cfg.mr.widths = widths(feat + 1);
  cfg.mr.skips = skips;
  cfg.sr.widths = widths(feat + 1 + (cfg.sr_takes_mr() ? 1 : 0));
  cfg.sr.skips = skips;
  cfg.validate();
  return cfg;
}

ModelConfig make_desk_model_config(ArchKind arch) {
  return make_model_config(arch, 64, 8, 16, 2, {64, 32, 16, 8}, {3, 4, 5});
}

ModelConfig make_tiny_model_config(ArchKind arch) {
  return make_model_config(arch, 16, 4, 8, 1, {16, 8}, {3});
}

// ------------------------------------------------------------------- model

template <typename T>
Model<T>::Model(const ModelConfig& config, std::uint64_t seed) : cfg(config) {
  cfg.validate();
  register_params();
  he_init(seed);
}

template <typename T>
void Model<T>::register_params() {
  const int F = cfg.enc.c_hi;
  auto conv = [&](const std::string& base, int co, int ci, int& wi, int& bi) {
    wi = params.add(base + ".w", {co, 3, 3, ci});
    bi = params.add(base + ".b", {co});
  };
  conv("enc.stem", F, 3, h_.stem_w, h_.stem_b);
  conv("enc.down", 2 * F, F, h_.down_w, h_.down_b);
  conv("enc.mid", 2 * F, 2 * F, h_.mid_w, h_.mid_b);
  conv("enc.fuse", F, 3 * F, h_.fuse_w, h_.fuse_b);
  conv("enc.hi", cfg.enc.c_hi, F, h_.hi_w, h_.hi_b);
  conv("enc.lo", cfg.enc.c_lo, 2 * F, h_.lo_w, h_.lo_b);
  for (int k = 0; k < cfg.enc.stacks; ++k) {
    std::string base = "enc.blk" + std::to_string(k);
    int w, b;
    conv(base + ".c1", cfg.enc.c_lo, cfg.enc.c_lo, w, b);
    h_.blk_c1_w.push_back(w);
    h_.blk_c1_b.push_back(b);
    conv(base + ".c2", cfg.enc.c_lo, cfg.enc.c_lo, w, b);
    h_.blk_c2_w.push_back(w);
    h_.blk_c2_b.push_back(b);
  }
  if (cfg.with_recon()) conv("recon.head", 3, cfg.enc.c_hi, h_.recon_w, h_.recon_b);

  auto mlp = [&](const std::string& base, const MlpConfig& mc, std::vector<int>& ws,
                 std::vector<int>& bs) {
    int layers = (int)mc.widths.size() - 1;
    for (int l = 1; l <= layers; ++l) {
      int in = mc.widths[l - 1];
      if (std::count(mc.skips.begin(), mc.skips.end(), l)) in += mc.widths[0];
      ws.push_back(params.add(base + ".l" + std::to_string(l) + ".w", {mc.widths[l], in}));
      bs.push_back(params.add(base + ".l" + std::to_string(l) + ".b", {mc.widths[l]}));
    }
  };
  if (cfg.has_mr()) mlp("mr", cfg.mr, h_.mr_w, h_.mr_b);
  if (cfg.has_sr()) mlp("sr", cfg.sr, h_.sr_w, h_.sr_b);
}

template <typename T>
void Model<T>::he_init(std::uint64_t seed) {
  Rng rng(seed);
  for (int i = 0; i < params.count(); ++i) {
    Tensor<T>& t = params.at(i);
    const std::string& name = params.name(i);
    bool is_weight = name.size() > 2 && name.compare(name.size() - 2, 2, ".w") == 0;
    if (!is_weight) continue;  // biases stay zero
    size_t fan_in = 1;
    for (size_t d = 1; d < t.shape.size(); ++d) fan_in *= (size_t)t.shape[d];
    double std_dev = std::sqrt(2.0 / (double)fan_in);
    for (T& x : t.v) x = (T)rng.normal(0.0, std_dev);
  }
}

template <typename T>
void Model<T>::encode(const std::vector<float>& image, int image_side, int image_channels,
                      EncoderState<T>& st) const {
  const int n = cfg.enc.n_i;
  if (image_side != n || image_channels != 3 ||
      image.size() != (size_t)n * n * 3)
    throw ValidationError("encoder input must be " + std::to_string(n) + "x" +
                          std::to_string(n) + "x3");
  st.input.reset(n, n, 3);
  for (size_t i = 0; i < image.size(); ++i) st.input.v[i] = (T)image[i];

  const auto& P = params;
  conv3x3_forward(st.input, P.at(h_.stem_w), P.at(h_.stem_b), 1, st.stem_pre);
  lrelu_forward(st.stem_pre, st.stem);
  conv3x3_forward(st.stem, P.at(h_.down_w), P.at(h_.down_b), 2, st.down_pre);
  lrelu_forward(st.down_pre, st.down);
  conv3x3_forward(st.down, P.at(h_.mid_w), P.at(h_.mid_b), 1, st.mid_pre);
  lrelu_forward(st.mid_pre, st.mid);

  upsample2_forward(st.mid, st.up1);
  concat_channels(st.up1, st.stem, st.cat);
  conv3x3_forward(st.cat, P.at(h_.fuse_w), P.at(h_.fuse_b), 1, st.fuse_pre);
  lrelu_forward(st.fuse_pre, st.fuse);
  if (cfg.with_unet()) {
    upsample2_forward(st.fuse, st.up2);
    conv3x3_forward(st.up2, P.at(h_.hi_w), P.at(h_.hi_b), 1, st.hi);
  } else {
    conv3x3_forward(st.fuse, P.at(h_.hi_w), P.at(h_.hi_b), 1, st.hi);
  }

  conv3x3_forward(st.mid, P.at(h_.lo_w), P.at(h_.lo_b), 1, st.lo_pre);
  lrelu_forward(st.lo_pre, st.lo0);
  st.blk_c1_pre.resize(cfg.enc.stacks);
  st.blk_c1.resize(cfg.enc.stacks);
  st.blk_c2_pre.resize(cfg.enc.stacks);
  st.blk_sum_pre.resize(cfg.enc.stacks);
  st.blk_out.resize(cfg.enc.stacks);
  for (int k = 0; k < cfg.enc.stacks; ++k) {
    const FMap<T>& prev = k == 0 ? st.lo0 : st.blk_out[k - 1];
    conv3x3_forward(prev, P.at(h_.blk_c1_w[k]), P.at(h_.blk_c1_b[k]), 1, st.blk_c1_pre[k]);
    lrelu_forward(st.blk_c1_pre[k], st.blk_c1[k]);
    conv3x3_forward(st.blk_c1[k], P.at(h_.blk_c2_w[k]), P.at(h_.blk_c2_b[k]), 1,
                    st.blk_c2_pre[k]);
    st.blk_sum_pre[k].reset(prev.w, prev.h, prev.c);
    for (size_t i = 0; i < prev.v.size(); ++i)
      st.blk_sum_pre[k].v[i] = prev.v[i] + st.blk_c2_pre[k].v[i];
    lrelu_forward(st.blk_sum_pre[k], st.blk_out[k]);
  }
  st.recon.reset(0, 0, 0);
}

template <typename T>
void Model<T>::decode_recon(EncoderState<T>& st) const {
  if (!cfg.with_recon()) throw ValidationError("this architecture has no image head");
  conv3x3_forward(st.hi, params.at(h_.recon_w), params.at(h_.recon_b), 1, st.recon);
}

// --------------------------------------------------------------- embedding

template <typename T>
static void bilinear_taps(T qx, T qy, int gw, int gh, TapRecord<T>& rec) {
  T ux = qx - T(0.5), uy = qy - T(0.5);
  int ix = (int)std::floor((double)ux), iy = (int)std::floor((double)uy);
  T tx = ux - (T)ix, ty = uy - (T)iy;
  int x0 = std::clamp(ix, 0, gw - 1), x1 = std::clamp(ix + 1, 0, gw - 1);
  int y0 = std::clamp(iy, 0, gh - 1), y1 = std::clamp(iy + 1, 0, gh - 1);
  rec.node[0] = y0 * gw + x0;
  rec.node[1] = y0 * gw + x1;
  rec.node[2] = y1 * gw + x0;
  rec.node[3] = y1 * gw + x1;
  rec.w[0] = (T(1) - tx) * (T(1) - ty);
  rec.w[1] = tx * (T(1) - ty);
  rec.w[2] = (T(1) - tx) * ty;
  rec.w[3] = tx * ty;
}

template <typename T>
static void gather_taps(const FMap<T>& grid, const TapRecord<T>& rec, T* out) {
  for (int c = 0; c < grid.c; ++c) out[c] = T(0);
  for (int t = 0; t < 4; ++t) {
    const T* src = grid.v.data() + (size_t)rec.node[t] * grid.c;
    for (int c = 0; c < grid.c; ++c) out[c] += rec.w[t] * src[c];
  }
}

template <typename T>
void Model<T>::index_embedding(const EncoderState<T>& st, T px, T py, std::vector<T>& feature,
                               EmbedRecord<T>& rec) const {
  const int n = cfg.enc.n_i;
  feature.assign(cfg.feature_dim(), T(0));
  rec = EmbedRecord<T>{};
  if (!((double)px >= 0.0 && (double)px <= (double)n && (double)py >= 0.0 &&
        (double)py <= (double)n))
    return;  // out of window: zero feature, flag stays false
  rec.in_window = true;
  const FMap<T>& hi = st.hi;
  const FMap<T>& lo = st.lo_out();
  T hs = T(hi.w) / T(n), ls = T(lo.w) / T(n);
  bilinear_taps(px * hs, py * hs, hi.w, hi.h, rec.hi);
  bilinear_taps(px * ls, py * ls, lo.w, lo.h, rec.lo);
  gather_taps(hi, rec.hi, feature.data());
  gather_taps(lo, rec.lo, feature.data() + hi.c);
}

template <typename T>
void Model<T>::embedding_backward(const EmbedRecord<T>& rec, const std::vector<T>& d_feature,
                                  FMap<T>& d_hi, FMap<T>& d_lo) const {
  if (!rec.in_window) return;
  for (int t = 0; t < 4; ++t) {
    T* dst = d_hi.v.data() + (size_t)rec.hi.node[t] * d_hi.c;
    for (int c = 0; c < d_hi.c; ++c) dst[c] += rec.hi.w[t] * d_feature[c];
  }
  for (int t = 0; t < 4; ++t) {
    T* dst = d_lo.v.data() + (size_t)rec.lo.node[t] * d_lo.c;
    for (int c = 0; c < d_lo.c; ++c) dst[c] += rec.lo.w[t] * d_feature[d_hi.c + c];
  }
}

// --------------------------------------------------------------------- mlp

template <typename T>
T Model<T>::mlp_run(const std::vector<int>& w_idx, const std::vector<int>& b_idx,
                    const MlpConfig& mc, const std::vector<T>& raw, MlpState<T>& st) const {
  if ((int)raw.size() != mc.widths[0])
    throw ValidationError("mlp input width mismatch: got " + std::to_string(raw.size()) +
                          ", expected " + std::to_string(mc.widths[0]));
  int layers = (int)mc.widths.size() - 1;
  st.layer_in.assign(layers, {});
  st.pre.assign(layers, {});
  std::vector<T> x = raw;
  for (int l = 1; l <= layers; ++l) {
    std::vector<T>& in = st.layer_in[l - 1];
    in = x;
    if (std::count(mc.skips.begin(), mc.skips.end(), l))
      in.insert(in.end(), raw.begin(), raw.end());
    const Tensor<T>& W = params.at(w_idx[l - 1]);
    const Tensor<T>& B = params.at(b_idx[l - 1]);
    int out_n = W.shape[0], in_n = W.shape[1];
    std::vector<T>& pre = st.pre[l - 1];
    pre.assign(out_n, T(0));
    for (int o = 0; o < out_n; ++o) {
      T acc = B.v[o];
      const T* wr = W.v.data() + (size_t)o * in_n;
      for (int i = 0; i < in_n; ++i) acc += wr[i] * in[i];
      pre[o] = acc;
    }
    if (l < layers) {
      x.assign(out_n, T(0));
      for (int o = 0; o < out_n; ++o) x[o] = lrelu(pre[o]);
    }
  }
  st.out = sigmoid(st.pre.back()[0]);
  return st.out;
}

template <typename T>
void Model<T>::mlp_back(const std::vector<int>& w_idx, const std::vector<int>& b_idx,
                        const MlpConfig& mc, const MlpState<T>& st, T d_out, GradBuffer<T>& grad,
                        std::vector<T>& d_raw) const {
  int layers = (int)mc.widths.size() - 1;
  d_raw.assign(mc.widths[0], T(0));
  T s = st.out;
  std::vector<T> d_pre{d_out * s * (T(1) - s)};
  for (int l = layers; l >= 1; --l) {
    const Tensor<T>& W = params.at(w_idx[l - 1]);
    int out_n = W.shape[0], in_n = W.shape[1];
    const std::vector<T>& in = st.layer_in[l - 1];
    T* dW = grad.span(params, w_idx[l - 1]);
    T* dB = grad.span(params, b_idx[l - 1]);
    std::vector<T> d_in(in_n, T(0));
    for (int o = 0; o < out_n; ++o) {
      T g = d_pre[o];
      dB[o] += g;
      const T* wr = W.v.data() + (size_t)o * in_n;
      T* dwr = dW + (size_t)o * in_n;
      for (int i = 0; i < in_n; ++i) {
        dwr[i] += g * in[i];
        d_in[i] += g * wr[i];
      }
    }
    int main_n = mc.widths[l - 1];
    bool skip = std::count(mc.skips.begin(), mc.skips.end(), l) > 0;
    if (skip)
      for (int i = 0; i < mc.widths[0]; ++i) d_raw[i] += d_in[main_n + i];
    if (l == 1) {
      for (int i = 0; i < main_n; ++i) d_raw[i] += d_in[i];
      break;
    }
    const std::vector<T>& prev_pre = st.pre[l - 2];
    d_pre.assign(main_n, T(0));
    for (int i = 0; i < main_n; ++i) d_pre[i] = d_in[i] * lrelu_grad(prev_pre[i]);
  }
}

template <typename T>
T Model<T>::mr_forward(const std::vector<T>& feature, T z, MlpState<T>& st) const {
  if (!cfg.has_mr()) throw ValidationError("this architecture has no mr head");
  std::vector<T> raw = feature;
  raw.push_back(z);
  return mlp_run(h_.mr_w, h_.mr_b, cfg.mr, raw, st);
}

template <typename T>
T Model<T>::sr_forward(const std::vector<T>& feature, T z, T s_mr, MlpState<T>& st) const {
  if (!cfg.has_sr()) throw ValidationError("this architecture has no sr head");
  std::vector<T> raw = feature;
  raw.push_back(z);
  if (cfg.sr_takes_mr()) raw.push_back(s_mr);
  return mlp_run(h_.sr_w, h_.sr_b, cfg.sr, raw, st);
}

template <typename T>
void Model<T>::mr_backward(const MlpState<T>& st, T d_out, GradBuffer<T>& grad,
                           std::vector<T>& d_raw) const {
  mlp_back(h_.mr_w, h_.mr_b, cfg.mr, st, d_out, grad, d_raw);
}

template <typename T>
void Model<T>::sr_backward(const MlpState<T>& st, T d_out, GradBuffer<T>& grad,
                           std::vector<T>& d_raw) const {
  mlp_back(h_.sr_w, h_.sr_b, cfg.sr, st, d_out, grad, d_raw);
}

// ---------------------------------------------------------------- backward

template <typename T>
void Model<T>::recon_backward(const EncoderState<T>& st, const FMap<T>& d_recon,
                              GradBuffer<T>& grad, FMap<T>& d_hi) const {
  if (!cfg.with_recon()) throw ValidationError("this architecture has no image head");
  conv3x3_backward(st.hi, params.at(h_.recon_w), 1, d_recon, &d_hi,
                   grad.span(params, h_.recon_w), grad.span(params, h_.recon_b));
}

template <typename T>
void Model<T>::encoder_backward(const EncoderState<T>& st, FMap<T>& d_hi, FMap<T>& d_lo,
                                GradBuffer<T>& grad) const {
  const auto& P = params;
  auto back = [&](const FMap<T>& in, int wi, int bi, int stride, const FMap<T>& d_out,
                  FMap<T>* d_in) {
    conv3x3_backward(in, P.at(wi), stride, d_out, d_in, grad.span(P, wi), grad.span(P, bi));
  };

  // detail branch head back to the fused map
  FMap<T> d_fuse;
  if (cfg.with_unet()) {
    FMap<T> d_up2(st.up2.w, st.up2.h, st.up2.c);
    back(st.up2, h_.hi_w, h_.hi_b, 1, d_hi, &d_up2);
    upsample2_backward(d_up2, d_fuse);
  } else {
    d_fuse.reset(st.fuse.w, st.fuse.h, st.fuse.c);
    back(st.fuse, h_.hi_w, h_.hi_b, 1, d_hi, &d_fuse);
  }
  FMap<T> d_fuse_pre;
  lrelu_backward(st.fuse_pre, d_fuse, d_fuse_pre);
  FMap<T> d_cat(st.cat.w, st.cat.h, st.cat.c);
  back(st.cat, h_.fuse_w, h_.fuse_b, 1, d_fuse_pre, &d_cat);
  FMap<T> d_up1, d_stem_acc;
  split_channels_backward(d_cat, d_up1, d_stem_acc, st.up1.c, st.stem.c);
  FMap<T> d_mid_acc;
  upsample2_backward(d_up1, d_mid_acc);

  // context branch: residual blocks in reverse, then the stem conv
  FMap<T> d_prev = std::move(d_lo);
  for (int k = cfg.enc.stacks - 1; k >= 0; --k) {
    const FMap<T>& prev = k == 0 ? st.lo0 : st.blk_out[k - 1];
    FMap<T> d_sum_pre;
    lrelu_backward(st.blk_sum_pre[k], d_prev, d_sum_pre);
    FMap<T> d_c1_act(st.blk_c1[k].w, st.blk_c1[k].h, st.blk_c1[k].c);
    back(st.blk_c1[k], h_.blk_c2_w[k], h_.blk_c2_b[k], 1, d_sum_pre, &d_c1_act);
    FMap<T> d_c1_pre;
    lrelu_backward(st.blk_c1_pre[k], d_c1_act, d_c1_pre);
    FMap<T> d_prev_new(prev.w, prev.h, prev.c);
    back(prev, h_.blk_c1_w[k], h_.blk_c1_b[k], 1, d_c1_pre, &d_prev_new);
    for (size_t i = 0; i < d_prev_new.v.size(); ++i) d_prev_new.v[i] += d_sum_pre.v[i];
    d_prev = std::move(d_prev_new);
  }
  FMap<T> d_lo_pre;
  lrelu_backward(st.lo_pre, d_prev, d_lo_pre);
  back(st.mid, h_.lo_w, h_.lo_b, 1, d_lo_pre, &d_mid_acc);

  // trunk
  FMap<T> d_mid_pre;
  lrelu_backward(st.mid_pre, d_mid_acc, d_mid_pre);
  FMap<T> d_down(st.down.w, st.down.h, st.down.c);
  back(st.down, h_.mid_w, h_.mid_b, 1, d_mid_pre, &d_down);
  FMap<T> d_down_pre;
  lrelu_backward(st.down_pre, d_down, d_down_pre);
  back(st.stem, h_.down_w, h_.down_b, 2, d_down_pre, &d_stem_acc);
  FMap<T> d_stem_pre;
  lrelu_backward(st.stem_pre, d_stem_acc, d_stem_pre);
  back(st.input, h_.stem_w, h_.stem_b, 1, d_stem_pre, nullptr);
}

// ------------------------------------------------------------ serialization

static json config_to_json(const ModelConfig& cfg) {
  json j;
  j["arch"] = arch_to_string(cfg.arch);
  j["n_i"] = cfg.enc.n_i;
  j["c_hi"] = cfg.enc.c_hi;
  j["c_lo"] = cfg.enc.c_lo;
  j["stacks"] = cfg.enc.stacks;
  j["mr_widths"] = cfg.mr.widths;
  j["mr_skips"] = cfg.mr.skips;
  j["sr_widths"] = cfg.sr.widths;
  j["sr_skips"] = cfg.sr.skips;
  return j;
}

static ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.arch = arch_from_string(j.at("arch").get<std::string>());
  cfg.enc.n_i = j.at("n_i").get<int>();
  cfg.enc.c_hi = j.at("c_hi").get<int>();
  cfg.enc.c_lo = j.at("c_lo").get<int>();
  cfg.enc.stacks = j.at("stacks").get<int>();
  cfg.mr.widths = j.at("mr_widths").get<std::vector<int>>();
  cfg.mr.skips = j.at("mr_skips").get<std::vector<int>>();
  cfg.sr.widths = j.at("sr_widths").get<std::vector<int>>();
  cfg.sr.skips = j.at("sr_skips").get<std::vector<int>>();
  cfg.validate();
  return cfg;
}

static const char kCkptMagic[8] = {'S', 'U', 'R', 'S', 'C', 'K', 'P', 'T'};

void save_checkpoint(const std::string& path, const Model<float>& model, std::uint64_t seed) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint for writing: " + path);
  json j = config_to_json(model.cfg);
  j["seed"] = seed;
  std::string cfg_text = j.dump();
  f.write(kCkptMagic, 8);
  auto w32 = [&](std::uint32_t x) { f.write(reinterpret_cast<const char*>(&x), 4); };
  w32(1);  // version
  w32((std::uint32_t)cfg_text.size());
  f.write(cfg_text.data(), (std::streamsize)cfg_text.size());
  w32((std::uint32_t)model.params.count());
  for (int i = 0; i < model.params.count(); ++i) {
    const std::string& name = model.params.name(i);
    const Tensor<float>& t = model.params.at(i);
    std::uint16_t nl = (std::uint16_t)name.size();
    f.write(reinterpret_cast<const char*>(&nl), 2);
    f.write(name.data(), nl);
    std::uint8_t rank = (std::uint8_t)t.shape.size();
    f.write(reinterpret_cast<const char*>(&rank), 1);
    for (int d : t.shape) w32((std::uint32_t)d);
    f.write(reinterpret_cast<const char*>(t.v.data()), (std::streamsize)(t.v.size() * 4));
  }
  if (!f) throw FormatError("short write while saving checkpoint: " + path);
}

Model<float> load_checkpoint(const std::string& path, std::uint64_t* seed_out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw FormatError("not a checkpoint file: " + path);
  auto r32 = [&]() {
    std::uint32_t x = 0;
    f.read(reinterpret_cast<char*>(&x), 4);
    return x;
  };
  std::uint32_t version = r32();
  if (version != 1) throw FormatError("unsupported checkpoint version");
  std::uint32_t cfg_len = r32();
  if (!f || cfg_len > (1u << 20)) throw FormatError("corrupt checkpoint header");
  std::string cfg_text(cfg_len, '\0');
  f.read(cfg_text.data(), cfg_len);
  if (!f) throw FormatError("truncated checkpoint header");
  json j;
  try {
    j = json::parse(cfg_text);
  } catch (const json::exception&) {
    throw FormatError("checkpoint config is not valid json");
  }
  ModelConfig cfg;
  std::uint64_t seed = 0;
  try {
    cfg = config_from_json(j);
    seed = j.value("seed", std::uint64_t(0));
  } catch (const json::exception&) {
    throw FormatError("checkpoint config is missing fields");
  }
  if (seed_out) *seed_out = seed;

  Model<float> model(cfg, 0);
  std::uint32_t count = r32();
  if (!f || count != (std::uint32_t)model.params.count())
    throw FormatError("checkpoint tensor count does not match its config");
  std::vector<bool> filled(model.params.count(), false);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t nl = 0;
    f.read(reinterpret_cast<char*>(&nl), 2);
    if (!f || nl == 0 || nl > 256) throw FormatError("corrupt tensor name");
    std::string name(nl, '\0');
    f.read(name.data(), nl);
    std::uint8_t rank = 0;
    f.read(reinterpret_cast<char*>(&rank), 1);
    if (!f || rank == 0 || rank > 8) throw FormatError("corrupt tensor rank");
    std::vector<int> shape(rank);
    for (int d = 0; d < rank; ++d) shape[d] = (int)r32();
    int idx = model.params.index_of(name);
    if (idx < 0) throw FormatError("unknown tensor in checkpoint: " + name);
    if (filled[idx]) throw FormatError("duplicate tensor in checkpoint: " + name);
    Tensor<float>& t = model.params.at(idx);
    if (shape != t.shape) throw FormatError("tensor shape mismatch for " + name);
    f.read(reinterpret_cast<char*>(t.v.data()), (std::streamsize)(t.v.size() * 4));
    if (!f) throw FormatError("truncated tensor data for " + name);
    filled[idx] = true;
  }
  for (int i = 0; i < model.params.count(); ++i)
    if (!filled[i]) throw FormatError("checkpoint is missing tensor " + model.params.name(i));
  return model;
}

template class Model<float>;
template class Model<double>;

}  // namespace surs
