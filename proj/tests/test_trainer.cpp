#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "surs/trainer.hpp"

using namespace surs;

TEST_SUITE_BEGIN("trainer");

namespace {

// Learnable synthetic example: brightness ramps left to right, occupancy
// flips at the image midline, so both heads can overfit quickly.
TrainImage ramp_example(int n, int samples_per_side, std::uint64_t seed) {
  TrainImage im;
  im.lr = Image(n, n, 3);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c) im.lr.at(x, y, c) = (float)x / (float)(n - 1);
  im.gt = Image(2 * n, 2 * n, 3);
  for (int y = 0; y < 2 * n; ++y)
    for (int x = 0; x < 2 * n; ++x)
      for (int c = 0; c < 3; ++c) im.gt.at(x, y, c) = (float)x / (float)(2 * n - 1);
  Rng rng(seed);
  auto fill = [&](std::vector<FieldSample>& dst) {
    for (int i = 0; i < samples_per_side; ++i) {
      FieldSample s;
      s.position = Vec3::Zero();
      s.pixel = Vec2(rng.uniform(0.5, n - 0.5), rng.uniform(0.5, n - 0.5));
      s.depth = 0.1;
      s.label = s.pixel.x() > n / 2.0 ? 1 : 0;
      dst.push_back(s);
    }
  };
  fill(im.samples.hr);
  fill(im.samples.lr);
  im.samples.seed = seed;
  return im;
}

SampleSet labeled_samples(const std::vector<int>& hr_labels, const std::vector<int>& lr_labels,
                          int n, std::uint64_t seed) {
  SampleSet ss;
  Rng rng(seed);
  auto fill = [&](std::vector<FieldSample>& dst, const std::vector<int>& labels) {
    for (int l : labels) {
      FieldSample s;
      s.position = Vec3::Zero();
      s.pixel = Vec2(rng.uniform(1.0, n - 1.0), rng.uniform(1.0, n - 1.0));
      s.depth = rng.uniform(-0.3, 0.3);
      s.label = (std::uint8_t)l;
      dst.push_back(s);
    }
  };
  fill(ss.hr, hr_labels);
  fill(ss.lr, lr_labels);
  return ss;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("loss helpers match hand computed values") {
  CHECK(loss_mean_l1({0.25f, 0.5f}, {0.5f, 0.25f}) == 0.25);
  CHECK(loss_mse_to_labels({0.0, 1.0, 0.0}, {1, 0, 1}) == 1.0);
  CHECK(loss_mse_to_labels({1.0, 0.0}, {1, 0}) == 0.0);

  // target gaps (0, 1), predicted gaps (0, 0): mean squared mismatch is 1/2
  CHECK(loss_diff_indexed({1, 0}, {1, 1}, {1, 0}, {1, 0}) == 0.5);

  // shifting both predictions by the same constant changes nothing
  CHECK(loss_diff_indexed({1, 0}, {0, 1}, {0.75, 0.5}, {0.25, 0.5}) ==
        loss_diff_indexed({1, 0}, {0, 1}, {1.0, 0.75}, {0.5, 0.75}));

  // predictions that reproduce the target gap exactly score zero
  CHECK(loss_diff_indexed({1, 0, 1}, {0, 0, 1}, {0.75, 0.5, 0.5}, {-0.25, 0.5, 0.5}) == 0.0);

  CHECK_THROWS_AS(loss_mean_l1({1.f}, {1.f, 2.f}), ValidationError);
  CHECK_THROWS_AS(loss_diff_indexed({1}, {1}, {1}, {}), ValidationError);
}

TEST_CASE("schedules expand into the documented phases") {
  ModelConfig full = make_tiny_model_config();

  auto e2e = schedule_phases(Schedule::end_to_end, full);
  REQUIRE(e2e.size() == 1);
  CHECK(e2e[0].rec);
  CHECK(e2e[0].mr);
  CHECK(e2e[0].sr);
  CHECK(e2e[0].diff);
  CHECK(e2e[0].t_enc);
  CHECK(e2e[0].t_mr);
  CHECK(e2e[0].t_sr);

  auto sep = schedule_phases(Schedule::sep_all, full);
  REQUIRE(sep.size() == 3);
  CHECK((sep[0].rec && !sep[0].mr && !sep[0].sr && !sep[0].diff));
  CHECK((sep[0].t_enc && sep[0].t_recon && !sep[0].t_mr && !sep[0].t_sr));
  CHECK((!sep[1].rec && sep[1].mr && !sep[1].sr));
  CHECK((!sep[1].t_enc && sep[1].t_mr && !sep[1].t_sr));
  CHECK((sep[2].sr && sep[2].diff && !sep[2].rec && !sep[2].mr));
  CHECK((sep[2].t_sr && !sep[2].t_enc && !sep[2].t_mr));

  auto rm = schedule_phases(Schedule::rec_then_mlps, full);
  REQUIRE(rm.size() == 2);
  CHECK((rm[1].mr && rm[1].sr && rm[1].diff && rm[1].t_mr && rm[1].t_sr && !rm[1].t_enc));

  auto rs = schedule_phases(Schedule::recmr_then_sr, full);
  REQUIRE(rs.size() == 2);
  CHECK((rs[0].rec && rs[0].mr && rs[0].t_enc && rs[0].t_mr && !rs[0].t_sr && !rs[0].sr));
  CHECK((rs[1].sr && rs[1].diff && rs[1].t_sr && !rs[1].t_mr && !rs[1].t_enc));

  // no parameter group trains in non-contiguous phases, for any combination
  for (auto s : {Schedule::end_to_end, Schedule::sep_all, Schedule::rec_then_mlps,
                 Schedule::recmr_then_sr})
    for (auto a : {ArchKind::full, ArchKind::no_unet, ArchKind::only_mr, ArchKind::only_sr,
                   ArchKind::no_ldiff}) {
      auto phases = schedule_phases(s, make_tiny_model_config(a));
      auto contiguous = [&](auto pick) {
        int first = -1, last = -1;
        for (int i = 0; i < (int)phases.size(); ++i)
          if (pick(phases[i])) {
            if (first < 0) first = i;
            last = i;
          }
        if (first < 0) return true;
        for (int i = first; i <= last; ++i)
          if (!pick(phases[i])) return false;
        return true;
      };
      CHECK(contiguous([](const Phase& p) { return p.t_enc; }));
      CHECK(contiguous([](const Phase& p) { return p.t_mr; }));
      CHECK(contiguous([](const Phase& p) { return p.t_sr; }));
    }

  // missing heads never train or contribute losses
  auto nu = schedule_phases(Schedule::sep_all, make_tiny_model_config(ArchKind::no_unet));
  for (const Phase& p : nu) {
    CHECK_FALSE(p.rec);
    CHECK_FALSE(p.t_recon);
  }
  auto om = schedule_phases(Schedule::end_to_end, make_tiny_model_config(ArchKind::only_mr));
  CHECK_FALSE(om[0].sr);
  CHECK_FALSE(om[0].diff);
  CHECK_FALSE(om[0].t_sr);
}

TEST_CASE("epochs spread over phases with the remainder at the end") {
  CHECK(phase_epoch_counts(10, 3) == std::vector<int>{3, 3, 4});
  CHECK(phase_epoch_counts(1, 3) == std::vector<int>{0, 0, 1});
  CHECK(phase_epoch_counts(5, 2) == std::vector<int>{2, 3});
  CHECK(phase_epoch_counts(6, 1) == std::vector<int>{6});
  CHECK_THROWS_AS(phase_epoch_counts(0, 2), ValidationError);
}

TEST_CASE("fresh zeroed model yields exact baseline losses") {
  ModelD m(make_tiny_model_config(), 1);
  for (int i = 0; i < m.params.count(); ++i)
    std::fill(m.params.at(i).v.begin(), m.params.at(i).v.end(), 0.0);

  const int n = 16;
  Image lr(n, n, 3);
  Rng rng(9);
  for (float& x : lr.v) x = (float)rng.uniform();
  Image gt(32, 32, 3);
  for (float& x : gt.v) x = 0.25f;
  // target gaps: 0, 1, -1, 0 with every prediction pinned at one half
  SampleSet ss = labeled_samples({1, 1, 0, 0}, {1, 0, 1, 0}, n, 13);

  StepOptions opt;
  LossBreakdown out = step_image<double>(m, lr, gt, ss, opt, nullptr);
  CHECK(out.rec == 0.25);   // recon is all zeros against a flat 0.25 target
  CHECK(out.mr == 0.25);    // predictions sit at 0.5 against binary labels
  CHECK(out.sr == 0.25);
  CHECK(out.diff == 0.5);   // mean of squared target gaps
  CHECK(out.total() == 1.25);

  // zero weights disable terms exactly
  StepOptions off;
  off.w_rec = off.w_diff = 0;
  LossBreakdown part = step_image<double>(m, lr, gt, ss, off, nullptr);
  CHECK(part.rec == 0.0);
  CHECK(part.diff == 0.0);
  CHECK(part.mr == 0.25);
  CHECK(part.total() == 0.5);
}

TEST_CASE("co-located pairing penalizes the gap between the two heads") {
  ModelD m(make_tiny_model_config(), 21);
  const int n = 16;
  Image lr(n, n, 3);
  Rng rng(33);
  for (float& x : lr.v) x = (float)rng.uniform();
  Image gt(32, 32, 3);
  SampleSet ss = labeled_samples({1, 0, 1}, {0, 1, 1}, n, 14);

  StepOptions opt;
  opt.w_rec = opt.w_mr = opt.w_sr = 0;
  opt.pairing = DiffPairing::lr_colocated;
  LossBreakdown out = step_image<double>(m, lr, gt, ss, opt, nullptr);

  EncoderState<double> st;
  m.encode(lr.v, n, 3, st);
  double acc = 0;
  for (const FieldSample& s : ss.lr) {
    std::vector<double> feat;
    EmbedRecord<double> rec;
    m.index_embedding(st, s.pixel.x(), s.pixel.y(), feat, rec);
    MlpState<double> ms, srs;
    double smr = m.mr_forward(feat, s.depth, ms);
    double ssr = m.sr_forward(feat, s.depth, smr, srs);
    acc += (smr - ssr) * (smr - ssr);
  }
  CHECK(out.diff == doctest::Approx(acc / ss.lr.size()).epsilon(1e-12));
}

TEST_CASE("difference loss off matches an architecture without it bit for bit") {
  ModelF full(make_tiny_model_config(ArchKind::full), 77);
  ModelF nold(make_tiny_model_config(ArchKind::no_ldiff), 77);
  REQUIRE(full.params.count() == nold.params.count());

  const int n = 16;
  Image lr(n, n, 3);
  Rng rng(55);
  for (float& x : lr.v) x = (float)rng.uniform();
  Image gt(32, 32, 3);
  for (float& x : gt.v) x = (float)rng.uniform();
  SampleSet ss = labeled_samples({1, 0, 1, 0}, {0, 1, 1, 0}, n, 15);

  StepOptions opt;
  opt.w_diff = 0;
  GradBuffer<float> ga(full.params.total()), gb(nold.params.total());
  LossBreakdown la = step_image<float>(full, lr, gt, ss, opt, &ga);
  StepOptions on;  // weight 1 everywhere, but the arch drops the term
  LossBreakdown lb = step_image<float>(nold, lr, gt, ss, on, &gb);
  CHECK(la.diff == 0.0);
  CHECK(lb.diff == 0.0);
  CHECK(la.total() == lb.total());
  CHECK(ga.g == gb.g);

  // with the term active the gradient path through both heads changes
  GradBuffer<float> gc(full.params.total());
  step_image<float>(full, lr, gt, ss, on, &gc);
  CHECK(gc.g != ga.g);
  bool mr_changed = false;
  int mr1 = full.params.index_of("mr.l1.w");
  for (size_t k = 0; k < full.params.at(mr1).v.size(); ++k)
    mr_changed |= gc.g[full.params.offset(mr1) + k] != ga.g[full.params.offset(mr1) + k];
  CHECK(mr_changed);
}

TEST_CASE("analytic gradients pass finite difference checks in every mode") {
  for (const std::string mode : {"full", "rec", "mr", "sr", "diff"}) {
    GradCheckReport rep = run_gradcheck(mode, 7);
    INFO("mode ", mode, " worst ", rep.worst_param, " rel ", rep.max_rel_err);
    CHECK(rep.pass);
    CHECK(rep.checked >= 200);
    CHECK(rep.groups.size() == 4);
  }
  CHECK_THROWS_AS(run_gradcheck("bogus", 1), ValidationError);
}

TEST_CASE("an all zero objective produces exactly zero gradients") {
  GradCheckReport rep = run_gradcheck("zero", 7);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err == 0.0);

  ModelD m(make_tiny_model_config(), 29);
  Image lr(16, 16, 3);
  Rng rng(71);
  for (float& x : lr.v) x = (float)rng.uniform();
  Image gt(32, 32, 3);
  SampleSet ss = labeled_samples({1, 0}, {0, 1}, 16, 17);
  StepOptions off;
  off.w_rec = off.w_mr = off.w_sr = off.w_diff = 0;
  GradBuffer<double> g(m.params.total());
  LossBreakdown out = step_image<double>(m, lr, gt, ss, off, &g);
  CHECK(out.total() == 0.0);
  for (double x : g.g) CHECK(x == 0.0);
}

TEST_CASE("frozen parameter groups stay bit identical through their phases") {
  std::vector<TrainImage> data{ramp_example(16, 12, 3), ramp_example(16, 12, 4)};

  // one epoch, three phases: only the last phase runs, so only sr moves
  Model<float> m(make_tiny_model_config(), 11);
  auto before = [&](const Model<float>& mm) {
    std::vector<std::vector<float>> s;
    for (int i = 0; i < mm.params.count(); ++i) s.push_back(mm.params.at(i).v);
    return s;
  };
  auto init = before(m);
  TrainConfig cfg;
  cfg.schedule = Schedule::sep_all;
  cfg.epochs = 1;
  cfg.batch_size = 2;
  train(m, data, cfg);
  bool sr_moved = false;
  for (int i = 0; i < m.params.count(); ++i) {
    const std::string& name = m.params.name(i);
    if (name.rfind("sr.", 0) == 0)
      sr_moved |= m.params.at(i).v != init[i];
    else
      CHECK(m.params.at(i).v == init[i]);
  }
  CHECK(sr_moved);

  // three epochs: every group gets its phase and moves
  Model<float> m3(make_tiny_model_config(), 11);
  auto init3 = before(m3);
  cfg.epochs = 3;
  train(m3, data, cfg);
  bool enc_moved = false, mr_moved = false, sr3_moved = false;
  for (int i = 0; i < m3.params.count(); ++i) {
    const std::string& name = m3.params.name(i);
    bool moved = m3.params.at(i).v != init3[i];
    if (name.rfind("enc.", 0) == 0 || name.rfind("recon.", 0) == 0) enc_moved |= moved;
    if (name.rfind("mr.", 0) == 0) mr_moved |= moved;
    if (name.rfind("sr.", 0) == 0) sr3_moved |= moved;
  }
  CHECK(enc_moved);
  CHECK(mr_moved);
  CHECK(sr3_moved);
}

TEST_CASE("a single example overfits by an order of magnitude") {
  std::vector<TrainImage> data{ramp_example(16, 16, 5)};
  Model<float> m(make_tiny_model_config(), 19);
  TrainConfig cfg;
  cfg.epochs = 250;
  cfg.batch_size = 1;
  TrainResult res = train(m, data, cfg);
  REQUIRE((int)res.rows.size() == 250);
  double first = res.rows.front().loss.total();
  double last = res.rows.back().loss.total();
  INFO("first ", first, " last ", last);
  CHECK(last * 10.0 <= first);
  // wall clock is monotone
  for (size_t i = 1; i < res.rows.size(); ++i)
    CHECK(res.rows[i].wall_seconds >= res.rows[i - 1].wall_seconds);
}

TEST_CASE("training twice from the same seed is bit identical") {
  std::vector<TrainImage> data{ramp_example(16, 10, 6), ramp_example(16, 10, 7),
                               ramp_example(16, 10, 8)};
  auto run = [&](const std::string& ck, const std::string& log) {
    Model<float> m(make_tiny_model_config(), 23);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 2;
    cfg.checkpoint_path = ck;
    cfg.log_path = log;
    return train(m, data, cfg);
  };
  TrainResult a = run("ck_a.bin", "log_a.csv");
  TrainResult b = run("ck_b.bin", "log_b.csv");
  CHECK(read_file("ck_a.bin") == read_file("ck_b.bin"));
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].loss.rec == b.rows[i].loss.rec);
    CHECK(a.rows[i].loss.mr == b.rows[i].loss.mr);
    CHECK(a.rows[i].loss.sr == b.rows[i].loss.sr);
    CHECK(a.rows[i].loss.diff == b.rows[i].loss.diff);
  }
  std::remove("ck_a.bin");
  std::remove("ck_b.bin");
  std::remove("log_a.csv");
  std::remove("log_b.csv");
}

TEST_CASE("csv log carries exact component sums and exact zeros") {
  std::vector<TrainImage> data{ramp_example(16, 8, 9)};
  Model<float> m(make_tiny_model_config(ArchKind::only_mr), 31);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 1;
  cfg.log_path = "log_c.csv";
  train(m, data, cfg);

  std::ifstream f("log_c.csv");
  std::string header;
  std::getline(f, header);
  CHECK(header == "epoch,l_rec,l_mr,l_sr,l_diff,total,wall_seconds");
  std::string line;
  int rows = 0;
  while (std::getline(f, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 7);
    double rec = std::stod(fields[1]), mr = std::stod(fields[2]), sr = std::stod(fields[3]),
           diff = std::stod(fields[4]), total = std::stod(fields[5]);
    CHECK(sr == 0.0);    // head absent from this architecture
    CHECK(diff == 0.0);
    CHECK(mr > 0.0);
    CHECK(total == rec + mr + sr + diff);
  }
  CHECK(rows == 2);
  std::remove("log_c.csv");
}

TEST_CASE("diverging runs raise and keep the last finite parameters") {
  std::vector<TrainImage> data{ramp_example(16, 8, 10)};
  Model<float> m(make_tiny_model_config(), 37);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 1;
  cfg.lr = 1e12;  // guaranteed blow-up
  cfg.checkpoint_path = "ck_div.bin";
  CHECK_THROWS_AS(train(m, data, cfg), DivergenceError);
  Model<float> saved = load_checkpoint("ck_div.bin");
  CHECK(params_finite(saved));
  CHECK(params_finite(m));  // the live model is restored too
  std::remove("ck_div.bin");
}

TEST_CASE("train validates its inputs") {
  Model<float> m(make_tiny_model_config(), 41);
  TrainConfig cfg;
  CHECK_THROWS_AS(train(m, {}, cfg), ValidationError);

  std::vector<TrainImage> bad{ramp_example(8, 4, 11)};  // wrong side for this model
  CHECK_THROWS_AS(train(m, bad, cfg), ValidationError);

  std::vector<TrainImage> ok{ramp_example(16, 4, 12)};
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(m, ok, cfg), ValidationError);
  cfg.epochs = 1;
  cfg.lr = 0;
  CHECK_THROWS_AS(train(m, ok, cfg), ValidationError);
}

TEST_SUITE_END();
