#include "surs/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace surs {

// ------------------------------------------------------------ loss helpers

double loss_mean_l1(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("mean l1: size mismatch");
  double acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs((double)a[i] - (double)b[i]);
  return acc / (double)a.size();
}

double loss_mse_to_labels(const std::vector<double>& pred,
                          const std::vector<std::uint8_t>& labels) {
  if (pred.size() != labels.size() || pred.empty())
    throw ValidationError("mse: size mismatch");
  double acc = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - (double)labels[i];
    acc += d * d;
  }
  return acc / (double)pred.size();
}

double loss_diff_indexed(const std::vector<double>& f_hr, const std::vector<double>& f_sr,
                         const std::vector<double>& s_mr, const std::vector<double>& s_sr) {
  size_t n = f_hr.size();
  if (f_sr.size() != n || s_mr.size() != n || s_sr.size() != n || n == 0)
    throw ValidationError("difference loss: size mismatch");
  double acc = 0;
  for (size_t i = 0; i < n; ++i) {
    double e = (f_hr[i] - f_sr[i]) - (s_mr[i] - s_sr[i]);
    acc += e * e;
  }
  return acc / (double)n;
}

// ----------------------------------------------------------------- schedule

Schedule schedule_from_string(const std::string& s) {
  if (s == "end_to_end") return Schedule::end_to_end;
  if (s == "sep_all") return Schedule::sep_all;
  if (s == "rec_then_mlps") return Schedule::rec_then_mlps;
  if (s == "recmr_then_sr") return Schedule::recmr_then_sr;
  throw ValidationError("unknown schedule: " + s);
}

std::string schedule_to_string(Schedule s) {
  switch (s) {
    case Schedule::end_to_end: return "end_to_end";
    case Schedule::sep_all: return "sep_all";
    case Schedule::rec_then_mlps: return "rec_then_mlps";
    case Schedule::recmr_then_sr: return "recmr_then_sr";
  }
  throw ValidationError("bad schedule enum");
}

DiffPairing pairing_from_string(const std::string& s) {
  if (s == "indexed") return DiffPairing::indexed;
  if (s == "lr_colocated") return DiffPairing::lr_colocated;
  throw ValidationError("unknown difference pairing: " + s);
}

std::string pairing_to_string(DiffPairing p) {
  return p == DiffPairing::indexed ? "indexed" : "lr_colocated";
}

std::vector<Phase> schedule_phases(Schedule s, const ModelConfig& cfg) {
  bool rec = cfg.with_recon(), mr = cfg.has_mr(), sr = cfg.has_sr();
  bool diff = cfg.sr_takes_mr() && cfg.arch != ArchKind::no_ldiff;
  auto mk = [&](bool lrec, bool lmr, bool lsr, bool ldiff, bool te, bool tr, bool tm, bool ts) {
    Phase p;
    p.rec = lrec && rec;
    p.mr = lmr && mr;
    p.sr = lsr && sr;
    p.diff = ldiff && diff;
    p.t_enc = te;
    p.t_recon = tr && rec;
    p.t_mr = tm && mr;
    p.t_sr = ts && sr;
    return p;
  };
  switch (s) {
    case Schedule::end_to_end:
      return {mk(1, 1, 1, 1, 1, 1, 1, 1)};
    case Schedule::sep_all:
      return {mk(1, 0, 0, 0, 1, 1, 0, 0), mk(0, 1, 0, 0, 0, 0, 1, 0),
              mk(0, 0, 1, 1, 0, 0, 0, 1)};
    case Schedule::rec_then_mlps:
      return {mk(1, 0, 0, 0, 1, 1, 0, 0), mk(0, 1, 1, 1, 0, 0, 1, 1)};
    case Schedule::recmr_then_sr:
      return {mk(1, 1, 0, 0, 1, 1, 1, 0), mk(0, 0, 1, 1, 0, 0, 0, 1)};
  }
  throw ValidationError("bad schedule enum");
}

std::vector<int> phase_epoch_counts(int epochs, int phases) {
  if (epochs < 1 || phases < 1) throw ValidationError("bad epoch or phase count");
  std::vector<int> counts(phases, epochs / phases);
  counts.back() = epochs - (epochs / phases) * (phases - 1);
  return counts;
}

// ----------------------------------------------------------- per-image step

template <typename T>
LossBreakdown step_image(const Model<T>& model, const Image& lr, const Image& gt,
                         const SampleSet& samples, const StepOptions& opt, GradBuffer<T>* grad) {
  const ModelConfig& cfg = model.cfg;
  const bool rec_on = opt.w_rec > 0 && cfg.with_recon();
  const bool mr_on = opt.w_mr > 0 && cfg.has_mr();
  const bool sr_on = opt.w_sr > 0 && cfg.has_sr();
  const bool diff_on =
      opt.w_diff > 0 && cfg.sr_takes_mr() && cfg.arch != ArchKind::no_ldiff;

  EncoderState<T> st;
  model.encode(lr.v, lr.width, lr.channels, st);

  LossBreakdown out;
  FMap<T> d_recon;
  if (rec_on) {
    model.decode_recon(st);
    if (gt.width != st.recon.w || gt.height != st.recon.h || gt.channels != 3)
      throw ValidationError("image head target has the wrong shape");
    const size_t n = st.recon.v.size();
    if (grad && opt.g_enc) d_recon.reset(st.recon.w, st.recon.h, 3);
    double acc = 0;
    for (size_t i = 0; i < n; ++i) {
      double d = (double)st.recon.v[i] - (double)gt.v[i];
      acc += std::abs(d);
      if (grad && opt.g_enc)
        d_recon.v[i] = (T)(opt.w_rec * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / (double)n);
    }
    out.rec = opt.w_rec * acc / (double)n;
  }

  const int n_hr = (int)samples.hr.size(), n_lr = (int)samples.lr.size();
  const bool need_hr = (mr_on || (diff_on && opt.pairing == DiffPairing::indexed)) && n_hr > 0;
  const bool need_lr = (sr_on || diff_on) && n_lr > 0;
  const bool mr_at_lr = cfg.sr_takes_mr();

  std::vector<MlpState<T>> mr_states, mrlr_states, sr_states;
  std::vector<EmbedRecord<T>> hr_recs, lr_recs;
  std::vector<double> s_mr_hr(n_hr, 0), s_mr_lr(n_lr, 0), s_sr_lr(n_lr, 0);
  std::vector<T> feat;

  if (need_hr) {
    mr_states.resize(n_hr);
    hr_recs.resize(n_hr);
    double acc = 0;
    for (int i = 0; i < n_hr; ++i) {
      const FieldSample& s = samples.hr[i];
      model.index_embedding(st, (T)s.pixel.x(), (T)s.pixel.y(), feat, hr_recs[i]);
      s_mr_hr[i] = (double)model.mr_forward(feat, (T)s.depth, mr_states[i]);
      double d = s_mr_hr[i] - (double)s.label;
      acc += d * d;
    }
    if (mr_on) out.mr = opt.w_mr * acc / (double)n_hr;
  }

  if (need_lr) {
    sr_states.resize(n_lr);
    lr_recs.resize(n_lr);
    if (mr_at_lr) mrlr_states.resize(n_lr);
    double acc = 0;
    for (int j = 0; j < n_lr; ++j) {
      const FieldSample& s = samples.lr[j];
      model.index_embedding(st, (T)s.pixel.x(), (T)s.pixel.y(), feat, lr_recs[j]);
      T smr = T(0);
      if (mr_at_lr) smr = model.mr_forward(feat, (T)s.depth, mrlr_states[j]);
      s_mr_lr[j] = (double)smr;
      s_sr_lr[j] = (double)model.sr_forward(feat, (T)s.depth, smr, sr_states[j]);
      double d = s_sr_lr[j] - (double)s.label;
      acc += d * d;
    }
    if (sr_on) out.sr = opt.w_sr * acc / (double)n_lr;
  }

  int n_diff = 0;
  std::vector<double> e;
  if (diff_on) {
    if (opt.pairing == DiffPairing::indexed) {
      n_diff = std::min(n_hr, n_lr);
      e.resize(n_diff);
      for (int i = 0; i < n_diff; ++i) {
        double gap_target = (double)samples.hr[i].label - (double)samples.lr[i].label;
        e[i] = gap_target - (s_mr_hr[i] - s_sr_lr[i]);
      }
    } else {
      // co-located pairing: both targets live on the same points, so the
      // target gap vanishes and only the predicted gap is penalized
      n_diff = n_lr;
      e.resize(n_diff);
      for (int j = 0; j < n_diff; ++j) e[j] = -(s_mr_lr[j] - s_sr_lr[j]);
    }
    if (n_diff > 0) {
      double acc = 0;
      for (double x : e) acc += x * x;
      out.diff = opt.w_diff * acc / (double)n_diff;
    }
  }

  if (!grad) return out;

  FMap<T> d_hi, d_lo;
  if (opt.g_enc) {
    d_hi.reset(st.hi.w, st.hi.h, st.hi.c);
    const FMap<T>& lo = st.lo_out();
    d_lo.reset(lo.w, lo.h, lo.c);
    if (rec_on) model.recon_backward(st, d_recon, *grad, d_hi);
  }

  std::vector<T> d_raw, d_raw2;
  if (need_hr && (opt.g_mr || opt.g_enc)) {
    for (int i = 0; i < n_hr; ++i) {
      double d = 0;
      if (mr_on) d += opt.w_mr * 2.0 * (s_mr_hr[i] - (double)samples.hr[i].label) / n_hr;
      if (diff_on && opt.pairing == DiffPairing::indexed && i < n_diff)
        d -= opt.w_diff * 2.0 * e[i] / n_diff;
      if (d == 0) continue;
      model.mr_backward(mr_states[i], (T)d, *grad, d_raw);
      if (opt.g_enc) model.embedding_backward(hr_recs[i], d_raw, d_hi, d_lo);
    }
  }

  if (need_lr && (opt.g_sr || opt.g_enc || (opt.g_mr && mr_at_lr))) {
    for (int j = 0; j < n_lr; ++j) {
      double dsr = 0;
      if (sr_on) dsr += opt.w_sr * 2.0 * (s_sr_lr[j] - (double)samples.lr[j].label) / n_lr;
      if (diff_on && j < n_diff) dsr += opt.w_diff * 2.0 * e[j] / n_diff;
      double dmr = 0;
      if (diff_on && opt.pairing == DiffPairing::lr_colocated && j < n_diff)
        dmr -= opt.w_diff * 2.0 * e[j] / n_diff;
      if (dsr != 0) {
        model.sr_backward(sr_states[j], (T)dsr, *grad, d_raw);
        if (mr_at_lr) dmr += (double)d_raw.back();
        if (opt.g_enc) model.embedding_backward(lr_recs[j], d_raw, d_hi, d_lo);
      }
      if (mr_at_lr && dmr != 0 && (opt.g_mr || opt.g_enc)) {
        model.mr_backward(mrlr_states[j], (T)dmr, *grad, d_raw2);
        if (opt.g_enc) model.embedding_backward(lr_recs[j], d_raw2, d_hi, d_lo);
      }
    }
  }

  if (opt.g_enc) model.encoder_backward(st, d_hi, d_lo, *grad);
  return out;
}

template LossBreakdown step_image<float>(const Model<float>&, const Image&, const Image&,
                                         const SampleSet&, const StepOptions&,
                                         GradBuffer<float>*);
template LossBreakdown step_image<double>(const Model<double>&, const Image&, const Image&,
                                          const SampleSet&, const StepOptions&,
                                          GradBuffer<double>*);

// -------------------------------------------------------------------- adam

void Adam::step(ParamStore<float>& params, const GradBuffer<float>& grad,
                const std::vector<std::uint8_t>& tensor_mask) {
  ++t_;
  const double b1c = 1.0 - std::pow(0.9, (double)t_);
  const double b2c = 1.0 - std::pow(0.999, (double)t_);
  for (int i = 0; i < params.count(); ++i) {
    if (!tensor_mask[i]) continue;
    auto& v = params.at(i).v;
    const size_t off = params.offset(i);
    for (size_t k = 0; k < v.size(); ++k) {
      const float g = grad.g[off + k];
      float& m = m_[off + k];
      float& w = v_[off + k];
      m = 0.9f * m + 0.1f * g;
      w = 0.999f * w + 0.001f * g * g;
      const double mhat = (double)m / b1c;
      const double vhat = (double)w / b2c;
      v[k] -= (float)(lr_ * mhat / (std::sqrt(vhat) + 1e-8));
    }
  }
}

// ------------------------------------------------------------------- train

namespace {

std::vector<std::uint8_t> phase_tensor_mask(const ParamStore<float>& params, const Phase& ph) {
  std::vector<std::uint8_t> mask(params.count(), 0);
  auto group_on = [&](const std::string& name) {
    if (name.rfind("enc.", 0) == 0) return ph.t_enc;
    if (name.rfind("recon.", 0) == 0) return ph.t_recon;
    if (name.rfind("mr.", 0) == 0) return ph.t_mr;
    if (name.rfind("sr.", 0) == 0) return ph.t_sr;
    return false;
  };
  for (int i = 0; i < params.count(); ++i) mask[i] = group_on(params.name(i)) ? 1 : 0;
  return mask;
}

std::vector<std::vector<float>> snapshot_params(const ParamStore<float>& params) {
  std::vector<std::vector<float>> s;
  s.reserve(params.count());
  for (int i = 0; i < params.count(); ++i) s.push_back(params.at(i).v);
  return s;
}

void restore_params(ParamStore<float>& params, const std::vector<std::vector<float>>& s) {
  for (int i = 0; i < params.count(); ++i) params.at(i).v = s[i];
}

std::string first_bad_param(const ParamStore<float>& params) {
  for (int i = 0; i < params.count(); ++i)
    for (float x : params.at(i).v)
      if (!std::isfinite(x)) return params.name(i);
  return "";
}

}  // namespace

TrainResult train(Model<float>& model, const std::vector<TrainImage>& images,
                  const TrainConfig& cfg) {
  if (images.empty()) throw ValidationError("train: image list is empty");
  if (cfg.epochs < 1) throw ValidationError("train: epochs must be positive");
  if (cfg.batch_size < 1) throw ValidationError("train: batch size must be positive");
  if (!(cfg.lr > 0)) throw ValidationError("train: learning rate must be positive");
  const int n_i = model.cfg.enc.n_i;
  const bool wants_gt = model.cfg.with_recon() && cfg.w_rec > 0;
  for (const TrainImage& im : images) {
    if (im.lr.width != n_i || im.lr.height != n_i || im.lr.channels != 3)
      throw ValidationError("train: network input image has the wrong shape");
    if (wants_gt) {
      int hn = n_i * model.cfg.hi_scale();
      if (im.gt.width != hn || im.gt.height != hn || im.gt.channels != 3)
        throw ValidationError("train: target image has the wrong shape");
    }
  }

  const auto phases = schedule_phases(cfg.schedule, model.cfg);
  const auto counts = phase_epoch_counts(cfg.epochs, (int)phases.size());
  Adam adam(model.params.total(), cfg.lr);
  auto last_good = snapshot_params(model.params);

  std::ofstream csv;
  if (!cfg.log_path.empty()) {
    csv.open(cfg.log_path);
    if (!csv) throw ValidationError("train: cannot open log file " + cfg.log_path);
    csv << "epoch,l_rec,l_mr,l_sr,l_diff,total,wall_seconds\n";
  }

  auto diverge = [&](const std::string& what) {
    restore_params(model.params, last_good);
    if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, model, cfg.seed);
    throw DivergenceError(what);
  };

  TrainResult res;
  const auto t0 = std::chrono::steady_clock::now();
  int epoch = 0;
  for (size_t pi = 0; pi < phases.size(); ++pi) {
    const Phase& ph = phases[pi];
    StepOptions opt;
    opt.w_rec = ph.rec ? cfg.w_rec : 0;
    opt.w_mr = ph.mr ? cfg.w_mr : 0;
    opt.w_sr = ph.sr ? cfg.w_sr : 0;
    opt.w_diff = ph.diff ? cfg.w_diff : 0;
    opt.pairing = cfg.diff_pairing;
    opt.g_enc = ph.t_enc || ph.t_recon;
    opt.g_mr = ph.t_mr;
    opt.g_sr = ph.t_sr;
    const auto mask = phase_tensor_mask(model.params, ph);

    for (int pe = 0; pe < counts[pi]; ++pe) {
      ++epoch;
      LossBreakdown epoch_sum;
      for (size_t b0 = 0; b0 < images.size(); b0 += (size_t)cfg.batch_size) {
        const size_t b1 = std::min(b0 + (size_t)cfg.batch_size, images.size());
        const int nb = (int)(b1 - b0);
        std::vector<GradBuffer<float>> bufs(nb, GradBuffer<float>(model.params.total()));
        std::vector<LossBreakdown> parts(nb);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int k = 0; k < nb; ++k) {
          const TrainImage& im = images[b0 + k];
          parts[k] = step_image(model, im.lr, im.gt, im.samples, opt, &bufs[k]);
        }
        GradBuffer<float> g(model.params.total());
        for (int k = 0; k < nb; ++k) {
          if (!std::isfinite(parts[k].total()))
            diverge("loss became non-finite at epoch " + std::to_string(epoch));
          g.accumulate(bufs[k]);
          epoch_sum += parts[k];
        }
        g.scale(1.0f / (float)nb);
        adam.step(model.params, g, mask);
        std::string bad = first_bad_param(model.params);
        if (!bad.empty())
          diverge("parameter " + bad + " became non-finite at epoch " + std::to_string(epoch));
      }
      epoch_sum.scale(1.0 / (double)images.size());
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      res.rows.push_back({epoch, epoch_sum, wall});
      if (csv.is_open()) {
        char line[256];
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n", epoch,
                      epoch_sum.rec, epoch_sum.mr, epoch_sum.sr, epoch_sum.diff,
                      epoch_sum.total(), wall);
        csv << line;
        csv.flush();
      }
      last_good = snapshot_params(model.params);
    }
  }

  if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, model, cfg.seed);
  return res;
}

// -------------------------------------------------------------- grad check

GradCheckReport run_gradcheck(const std::string& mode, std::uint64_t seed) {
  StepOptions opt;
  if (mode == "full") {
  } else if (mode == "rec") {
    opt.w_mr = opt.w_sr = opt.w_diff = 0;
  } else if (mode == "mr") {
    opt.w_rec = opt.w_sr = opt.w_diff = 0;
  } else if (mode == "sr") {
    opt.w_rec = opt.w_mr = opt.w_diff = 0;
  } else if (mode == "diff") {
    opt.w_rec = opt.w_mr = opt.w_sr = 0;
  } else if (mode == "zero") {
    opt.w_rec = opt.w_mr = opt.w_sr = opt.w_diff = 0;
  } else {
    throw ValidationError("unknown gradient check mode: " + mode);
  }

  ModelD model(make_tiny_model_config(), seed);
  const int n = model.cfg.enc.n_i;
  Rng rng(Rng::splitmix(seed) ^ 0x5bd1e995u);
  Image lr(n, n, 3), gt(2 * n, 2 * n, 3);
  for (float& x : lr.v) x = (float)rng.uniform();
  for (float& x : gt.v) x = (float)rng.uniform();
  SampleSet ss;
  ss.seed = seed;
  auto fill = [&](std::vector<FieldSample>& dst, int count) {
    for (int i = 0; i < count; ++i) {
      FieldSample s;
      s.position = Vec3::Zero();
      s.pixel = Vec2(rng.uniform(1.0, n - 1.0), rng.uniform(1.0, n - 1.0));
      s.depth = rng.uniform(-0.4, 0.4);
      s.label = (std::uint8_t)(rng.next_u64() & 1);
      dst.push_back(s);
    }
  };
  fill(ss.hr, 8);
  fill(ss.lr, 8);

  auto loss = [&]() { return step_image<double>(model, lr, gt, ss, opt, nullptr).total(); };

  GradBuffer<double> grad(model.params.total());
  step_image<double>(model, lr, gt, ss, opt, &grad);

  // coordinates bucketed by parameter group
  struct Coord {
    int tensor;
    size_t k;
  };
  std::vector<std::string> group_names{"enc", "recon", "mr", "sr"};
  std::vector<std::vector<Coord>> pools(group_names.size());
  for (int i = 0; i < model.params.count(); ++i) {
    const std::string& name = model.params.name(i);
    for (size_t g = 0; g < group_names.size(); ++g)
      if (name.rfind(group_names[g] + ".", 0) == 0) {
        for (size_t k = 0; k < model.params.at(i).size(); ++k) pools[g].push_back({i, (size_t)k});
        break;
      }
  }

  GradCheckReport rep;
  const double h = 1e-3;
  for (size_t g = 0; g < pools.size(); ++g) {
    auto& pool = pools[g];
    if (pool.empty()) continue;
    GradCheckGroup gr;
    gr.name = group_names[g];
    // shuffled traversal; skipped (kinked) coordinates draw replacements
    for (size_t i = pool.size(); i > 1; --i)
      std::swap(pool[i - 1], pool[rng.uniform_index(i)]);
    const int want = (int)std::min<size_t>(64, pool.size());
    size_t ptr = 0;
    while (gr.checked < want && ptr < pool.size()) {
      const Coord c = pool[ptr++];
      auto& v = model.params.at(c.tensor).v;
      const double keep = v[c.k];
      auto fd_at = [&](double step) {
        v[c.k] = keep + step;
        const double up = loss();
        v[c.k] = keep - step;
        const double dn = loss();
        v[c.k] = keep;
        return (up - dn) / (2 * step);
      };
      double fd = fd_at(h);
      const double an = grad.g[model.params.offset(c.tensor) + c.k];
      double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
      if (rel >= 1e-3) {
        // kink or genuine mismatch? a kink inside the window makes the
        // difference quotient unstable in the step size
        const double fd2 = fd_at(h / 2);
        const bool consistent =
            std::abs(fd - fd2) <= 2e-4 * std::max({std::abs(fd), std::abs(fd2), 1e-8});
        if (!consistent) continue;  // quotient invalid here, use another coordinate
        fd = fd2;
        rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
      }
      ++gr.checked;
      if (rel > gr.max_rel_err) {
        gr.max_rel_err = rel;
        gr.worst_param = model.params.name(c.tensor) + "[" + std::to_string(c.k) + "]";
      }
    }
    rep.checked += gr.checked;
    if (gr.max_rel_err > rep.max_rel_err) {
      rep.max_rel_err = gr.max_rel_err;
      rep.worst_param = gr.worst_param;
    }
    rep.groups.push_back(std::move(gr));
  }
  rep.pass = rep.max_rel_err < 1e-3;
  for (const GradCheckGroup& gr : rep.groups)
    if (gr.checked < 32) rep.pass = false;  // too many rejected coordinates
  return rep;
}

}  // namespace surs
