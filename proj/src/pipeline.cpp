#include "surs/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "surs/decimate.hpp"
#include "surs/field.hpp"
#include "surs/image.hpp"
#include "surs/marching.hpp"
#include "surs/raster.hpp"
#include "surs/synth.hpp"

namespace surs {

namespace fs = std::filesystem;
using nlohmann::json;

// ------------------------------------------------------------ config JSON

void PipelineConfig::validate() const {
  if (workdir.empty()) throw ValidationError("pipeline: workdir is empty");
  if (n_shapes < 2) throw ValidationError("pipeline: need at least 2 shapes");
  if (train_count < 1 || train_count >= n_shapes)
    throw ValidationError("pipeline: train_count must leave at least one test shape");
  if (subdivisions < 0 || subdivisions > 6)
    throw ValidationError("pipeline: subdivisions outside [0, 6]");
  if (n_i < 8 || n_i % 8 != 0) throw ValidationError("pipeline: n_i must be a multiple of 8");
  if (window <= 0) throw ValidationError("pipeline: window must be positive");
  if (lr_faces < 4) throw ValidationError("pipeline: lr_faces below 4");
  if (units_per_cm <= 0) throw ValidationError("pipeline: units_per_cm must be positive");
  if (eval_samples < 1000) throw ValidationError("pipeline: eval_samples below 1000");
  if (recon_resolution < 8 || recon_resolution > 1024)
    throw ValidationError("pipeline: recon_resolution outside [8, 1024]");
  if (recon_span <= 0) throw ValidationError("pipeline: recon_span must be positive");
  // delegate the rest
  make_model_config(arch, n_i, c_hi, c_lo, stacks, mlp_hidden, mlp_skips).validate();
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
  json j;
  j["workdir"] = c.workdir;
  j["seed"] = c.seed;
  j["n_shapes"] = c.n_shapes;
  j["train_count"] = c.train_count;
  j["subdivisions"] = c.subdivisions;
  j["radius"] = c.radius;
  j["amplitude"] = c.amplitude;
  j["units_per_cm"] = c.units_per_cm;
  j["n_i"] = c.n_i;
  j["window"] = c.window;
  j["lr_faces"] = c.lr_faces;
  j["sampler"] = {{"pool_size", c.sampler.pool_size},
                  {"sample_count", c.sampler.sample_count},
                  {"sigma", c.sampler.sigma},
                  {"uniform_ratio", c.sampler.uniform_ratio},
                  {"max_regrowth", c.sampler.max_regrowth}};
  j["arch"] = arch_to_string(c.arch);
  j["c_hi"] = c.c_hi;
  j["c_lo"] = c.c_lo;
  j["stacks"] = c.stacks;
  j["mlp_hidden"] = c.mlp_hidden;
  j["mlp_skips"] = c.mlp_skips;
  j["train"] = {{"schedule", schedule_to_string(c.train.schedule)},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"lr", c.train.lr},
                {"seed", c.train.seed},
                {"w_rec", c.train.w_rec},
                {"w_mr", c.train.w_mr},
                {"w_sr", c.train.w_sr},
                {"w_diff", c.train.w_diff},
                {"diff_pairing", pairing_to_string(c.train.diff_pairing)}};
  j["recon_resolution"] = c.recon_resolution;
  j["recon_span"] = c.recon_span;
  j["eval_samples"] = c.eval_samples;
  return j.dump(2) + "\n";
}

PipelineConfig pipeline_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("pipeline config: ") + e.what());
  }
  try {
    PipelineConfig c;
    c.workdir = j.value("workdir", c.workdir);
    c.seed = j.value("seed", c.seed);
    c.n_shapes = j.value("n_shapes", c.n_shapes);
    c.train_count = j.value("train_count", c.train_count);
    c.subdivisions = j.value("subdivisions", c.subdivisions);
    c.radius = j.value("radius", c.radius);
    c.amplitude = j.value("amplitude", c.amplitude);
    c.units_per_cm = j.value("units_per_cm", c.units_per_cm);
    c.n_i = j.value("n_i", c.n_i);
    c.window = j.value("window", c.window);
    c.lr_faces = j.value("lr_faces", c.lr_faces);
    if (j.contains("sampler")) {
      const json& s = j["sampler"];
      c.sampler.pool_size = s.value("pool_size", c.sampler.pool_size);
      c.sampler.sample_count = s.value("sample_count", c.sampler.sample_count);
      c.sampler.sigma = s.value("sigma", c.sampler.sigma);
      c.sampler.uniform_ratio = s.value("uniform_ratio", c.sampler.uniform_ratio);
      c.sampler.max_regrowth = s.value("max_regrowth", c.sampler.max_regrowth);
    }
    c.arch = arch_from_string(j.value("arch", arch_to_string(c.arch)));
    c.c_hi = j.value("c_hi", c.c_hi);
    c.c_lo = j.value("c_lo", c.c_lo);
    c.stacks = j.value("stacks", c.stacks);
    c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
    c.mlp_skips = j.value("mlp_skips", c.mlp_skips);
    if (j.contains("train")) {
      const json& t = j["train"];
      c.train.schedule = schedule_from_string(t.value("schedule", schedule_to_string(c.train.schedule)));
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.lr = t.value("lr", c.train.lr);
      c.train.seed = t.value("seed", c.train.seed);
      c.train.w_rec = t.value("w_rec", c.train.w_rec);
      c.train.w_mr = t.value("w_mr", c.train.w_mr);
      c.train.w_sr = t.value("w_sr", c.train.w_sr);
      c.train.w_diff = t.value("w_diff", c.train.w_diff);
      c.train.diff_pairing =
          pairing_from_string(t.value("diff_pairing", pairing_to_string(c.train.diff_pairing)));
    }
    c.recon_resolution = j.value("recon_resolution", c.recon_resolution);
    c.recon_span = j.value("recon_span", c.recon_span);
    c.eval_samples = j.value("eval_samples", c.eval_samples);
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("pipeline config: ") + e.what());
  }
}

void save_pipeline_config(const std::string& path, const PipelineConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << pipeline_config_to_json(cfg);
  if (!out) throw ValidationError("failed writing " + path);
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return pipeline_config_from_json(text);
}

std::string camera_to_json(const OrthoCamera& cam) {
  json j;
  j["view"] = {cam.view.x(), cam.view.y(), cam.view.z()};
  j["up"] = {cam.up.x(), cam.up.y(), cam.up.z()};
  j["center"] = {cam.center.x(), cam.center.y(), cam.center.z()};
  j["image_size"] = cam.image_size;
  j["window"] = cam.window;
  return j.dump(2) + "\n";
}

OrthoCamera camera_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    OrthoCamera cam;
    auto vec = [&](const char* key, Vec3 fallback) {
      if (!j.contains(key)) return fallback;
      const json& a = j.at(key);
      return Vec3(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
    };
    cam.view = vec("view", cam.view);
    cam.up = vec("up", cam.up);
    cam.center = vec("center", cam.center);
    cam.image_size = j.value("image_size", cam.image_size);
    cam.window = j.value("window", cam.window);
    cam.validate();
    return cam;
  } catch (const json::exception& e) {
    throw FormatError(std::string("camera: ") + e.what());
  }
}

void save_camera(const std::string& path, const OrthoCamera& cam) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << camera_to_json(cam);
}

OrthoCamera load_camera(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return camera_from_json(text);
}

Stage stage_from_string(const std::string& s) {
  if (s == "synth") return Stage::synth;
  if (s == "prepare") return Stage::prepare;
  if (s == "render") return Stage::render;
  if (s == "sample") return Stage::sample;
  if (s == "train") return Stage::train;
  if (s == "reconstruct") return Stage::reconstruct;
  if (s == "evaluate") return Stage::evaluate;
  throw ValidationError("unknown stage: " + s);
}

std::string stage_to_string(Stage s) {
  switch (s) {
    case Stage::synth: return "synth";
    case Stage::prepare: return "prepare";
    case Stage::render: return "render";
    case Stage::sample: return "sample";
    case Stage::train: return "train";
    case Stage::reconstruct: return "reconstruct";
    case Stage::evaluate: return "evaluate";
  }
  throw ValidationError("unknown stage");
}

// ---------------------------------------------------------------- layout

namespace {

std::string shape_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "shape_%02d", i);
  return buf;
}

struct Layout {
  fs::path root;
  explicit Layout(const std::string& workdir) : root(workdir) {}

  std::string config() const { return (root / "config.json").string(); }
  std::string camera() const { return (root / "camera.json").string(); }
  std::string manifest() const { return (root / "manifest.json").string(); }
  std::string mesh(int i) const { return (root / "meshes" / (shape_name(i) + ".obj")).string(); }
  std::string lr_mesh(int i) const {
    return (root / "prepared" / (shape_name(i) + "_lr.obj")).string();
  }
  std::string img(int i, const char* kind, const char* ext = ".png") const {
    return (root / "images" / (shape_name(i) + "_" + kind + ext)).string();
  }
  std::string samples(int i) const {
    return (root / "samples" / (shape_name(i) + ".samples")).string();
  }
  std::string checkpoint() const { return (root / "ckpt" / "model.ckpt").string(); }
  std::string train_log() const { return (root / "ckpt" / "train_log.csv").string(); }
  std::string recon(int i) const { return (root / "recon" / (shape_name(i) + ".obj")).string(); }
  std::string report() const { return (root / "report.json").string(); }
};

bool all_exist(const std::vector<std::string>& paths) {
  for (const std::string& p : paths)
    if (!fs::exists(p)) return false;
  return true;
}

// Reruns against a work directory must carry the exact configuration that
// built it; otherwise cached artifacts would silently mix runs.
void guard_config(const Layout& lay, const PipelineConfig& cfg) {
  std::string current = pipeline_config_to_json(cfg);
  if (fs::exists(lay.config())) {
    std::ifstream in(lay.config(), std::ios::binary);
    std::string stored((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (stored != current)
      throw ValidationError("workdir " + lay.root.string() +
                            " was built with a different configuration; use a fresh directory");
  } else {
    fs::create_directories(lay.root);
    save_pipeline_config(lay.config(), cfg);
  }
}

template <typename Fn>
void run_stage(const char* name, const std::string& artifact, std::vector<StageStatus>* log,
               Fn&& body) {
  try {
    bool cached = body();
    if (log) log->push_back({name, cached, artifact});
  } catch (const DivergenceError& e) {
    throw DivergenceError("stage " + std::string(name) + " (" + artifact + "): " + e.what());
  } catch (const FormatError& e) {
    throw FormatError("stage " + std::string(name) + " (" + artifact + "): " + e.what());
  } catch (const SamplingError& e) {
    throw SamplingError("stage " + std::string(name) + " (" + artifact + "): " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError("stage " + std::string(name) + " (" + artifact + "): " + e.what());
  }
}

TriMesh load_mesh_with_units(const std::string& path, double units_per_cm) {
  TriMesh m = load_mesh(path);
  m.units_per_cm = units_per_cm;
  return m;
}

Image encode_normal_map(const Image& normal) {
  Image out = normal;
  for (float& v : out.v) v = 0.5f * (v + 1.0f);
  return out;
}

}  // namespace

void synth_corpus(const std::string& out_dir, int count, int train_count, int subdivisions,
                  double radius, double amplitude, double units_per_cm, std::uint64_t seed) {
  if (count < 1) throw ValidationError("synth corpus: count must be at least 1");
  if (train_count < 0 || train_count > count)
    throw ValidationError("synth corpus: train_count outside [0, count]");
  fs::create_directories(fs::path(out_dir) / "meshes");
  std::vector<TriMesh> shapes = make_corpus(count, seed, subdivisions, radius, amplitude);
  json manifest;
  manifest["seed"] = seed;
  manifest["train"] = json::array();
  manifest["test"] = json::array();
  for (int i = 0; i < count; ++i) {
    shapes[i].units_per_cm = units_per_cm;
    save_obj((fs::path(out_dir) / "meshes" / (shape_name(i) + ".obj")).string(), shapes[i]);
    manifest[i < train_count ? "train" : "test"].push_back(shape_name(i));
  }
  std::ofstream out((fs::path(out_dir) / "manifest.json").string(), std::ios::binary);
  if (!out) throw ValidationError("synth corpus: cannot write manifest");
  out << manifest.dump(2) + "\n";
}

// ----------------------------------------------------------------- stages

EvalReport run_pipeline(const PipelineConfig& cfg, Stage upto, std::vector<StageStatus>* log) {
  cfg.validate();
  Layout lay(cfg.workdir);
  guard_config(lay, cfg);

  OrthoCamera lr_cam = front_camera(cfg.n_i, cfg.window);
  OrthoCamera hr_cam = front_camera(2 * cfg.n_i, cfg.window);
  if (!fs::exists(lay.camera())) save_camera(lay.camera(), lr_cam);

  std::vector<int> train_ids, test_ids;
  for (int i = 0; i < cfg.n_shapes; ++i)
    (i < cfg.train_count ? train_ids : test_ids).push_back(i);

  run_stage("synth", (lay.root / "meshes").string(), log, [&] {
    std::vector<std::string> outs = {lay.manifest()};
    for (int i = 0; i < cfg.n_shapes; ++i) outs.push_back(lay.mesh(i));
    if (all_exist(outs)) return true;
    synth_corpus(lay.root.string(), cfg.n_shapes, cfg.train_count, cfg.subdivisions, cfg.radius,
                 cfg.amplitude, cfg.units_per_cm, cfg.seed);
    return false;
  });
  if (upto == Stage::synth) return {};

  run_stage("prepare", (lay.root / "prepared").string(), log, [&] {
    bool cached = true;
    fs::create_directories(lay.root / "prepared");
    for (int i = 0; i < cfg.n_shapes; ++i) {
      if (fs::exists(lay.lr_mesh(i))) continue;
      cached = false;
      TriMesh hr = load_mesh_with_units(lay.mesh(i), cfg.units_per_cm);
      save_obj(lay.lr_mesh(i), decimate(hr, cfg.lr_faces).mesh);
    }
    return cached;
  });
  if (upto == Stage::prepare) return {};

  run_stage("render", (lay.root / "images").string(), log, [&] {
    bool cached = true;
    fs::create_directories(lay.root / "images");
    for (int i = 0; i < cfg.n_shapes; ++i) {
      std::vector<std::string> outs = {lay.img(i, "gt"), lay.img(i, "lr"), lay.img(i, "normal"),
                                       lay.img(i, "mask"), lay.img(i, "depth", ".f32")};
      if (all_exist(outs)) continue;
      cached = false;
      TriMesh hr = load_mesh_with_units(lay.mesh(i), cfg.units_per_cm);
      ImageTriple triple = render_dataset({hr}, lr_cam, cfg.n_i)[0];
      write_png_srgb8(lay.img(i, "gt"), triple.gt);
      write_png_srgb8(lay.img(i, "lr"), triple.lr);
      write_png_linear16(lay.img(i, "normal"), encode_normal_map(triple.hr.normal));
      write_png_srgb8(lay.img(i, "mask"), triple.hr.mask);
      write_depth_raw(lay.img(i, "depth", ".f32"), triple.hr.depth);
    }
    return cached;
  });
  if (upto == Stage::render) return {};

  run_stage("sample", (lay.root / "samples").string(), log, [&] {
    bool cached = true;
    fs::create_directories(lay.root / "samples");
    for (int i : train_ids) {
      if (fs::exists(lay.samples(i))) continue;
      cached = false;
      TriMesh hr = load_mesh_with_units(lay.mesh(i), cfg.units_per_cm);
      TriMesh lr = load_mesh_with_units(lay.lr_mesh(i), cfg.units_per_cm);
      SampleSet set = build_sample_set(hr, lr, lr_cam, cfg.sampler, cfg.seed + 1000 + (unsigned)i);
      save_sample_set(lay.samples(i), set);
    }
    return cached;
  });
  if (upto == Stage::sample) return {};

  run_stage("train", lay.checkpoint(), log, [&] {
    if (fs::exists(lay.checkpoint())) return true;
    fs::create_directories(lay.root / "ckpt");
    std::vector<TrainImage> images;
    for (int i : train_ids) {
      TrainImage ti;
      ti.lr = read_png(lay.img(i, "lr"));
      ti.gt = read_png(lay.img(i, "gt"));
      ti.samples = load_sample_set(lay.samples(i));
      images.push_back(std::move(ti));
    }
    Model<float> model(make_model_config(cfg.arch, cfg.n_i, cfg.c_hi, cfg.c_lo, cfg.stacks,
                                         cfg.mlp_hidden, cfg.mlp_skips),
                       cfg.seed);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.log_path = lay.train_log();
    tc.checkpoint_path = lay.checkpoint();
    train(model, images, tc);
    return false;
  });
  if (upto == Stage::train) return {};

  run_stage("reconstruct", (lay.root / "recon").string(), log, [&] {
    bool cached = true;
    fs::create_directories(lay.root / "recon");
    // inference inputs: the checkpoint and the degraded image, nothing else
    Model<float> model = load_checkpoint(lay.checkpoint());
    if (model.cfg.enc.n_i != cfg.n_i)
      throw ValidationError("checkpoint resolution does not match the configuration");
    for (int i : test_ids) {
      if (fs::exists(lay.recon(i))) continue;
      cached = false;
      Image lr = read_png(lay.img(i, "lr"));
      FieldGrid grid =
          evaluate_field_grid(model, lr, lr_cam, cfg.recon_resolution, cfg.recon_span);
      TriMesh mesh = marching_cubes(grid);
      mesh.units_per_cm = cfg.units_per_cm;
      save_obj(lay.recon(i), mesh);
    }
    return cached;
  });
  if (upto == Stage::reconstruct) return {};

  EvalReport report;
  run_stage("evaluate", lay.report(), log, [&] {
    if (fs::exists(lay.report())) {
      report = load_report(lay.report());
      return true;
    }
    std::vector<ModelEval> rows;
    for (int i : test_ids) {
      TriMesh rec = load_mesh_with_units(lay.recon(i), cfg.units_per_cm);
      TriMesh gt = load_mesh_with_units(lay.mesh(i), cfg.units_per_cm);
      rows.push_back(evaluate_mesh_pair(shape_name(i), rec, gt, hr_cam, cfg.eval_samples,
                                        cfg.seed));
    }
    report = make_report(rows, cfg.eval_samples, cfg.seed);
    save_report(lay.report(), report);
    return false;
  });
  return report;
}

}  // namespace surs
