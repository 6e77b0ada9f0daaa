#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "surs/decimate.hpp"
#include "surs/metrics.hpp"
#include "surs/pipeline.hpp"
#include "surs/trainer.hpp"

using namespace surs;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

PipelineConfig resolve_config(const GlobalOpts& g) {
  PipelineConfig cfg =
      g.config_path.empty() ? PipelineConfig{} : load_pipeline_config(g.config_path);
  if (g.seed_set) cfg.seed = g.seed;
  return cfg;
}

void print_stage_log(const std::vector<StageStatus>& log) {
  for (const StageStatus& s : log)
    std::fprintf(stderr, "stage %-11s %s  (%s)\n", s.name.c_str(),
                 s.cached ? "cached" : "done  ", s.artifact.c_str());
}

int run_stages(const GlobalOpts& g, Stage upto) {
  PipelineConfig cfg = resolve_config(g);
  std::vector<StageStatus> log;
  EvalReport report = run_pipeline(cfg, upto, &log);
  print_stage_log(log);
  if (upto == Stage::evaluate) std::cout << report_to_json(report);
  return 0;
}

int run_gradcheck_cmd(const std::string& mode, std::uint64_t seed) {
  GradCheckReport rep = run_gradcheck(mode, seed);
  for (const GradCheckGroup& group : rep.groups)
    std::printf("group %-6s max rel err %.3e over %3d coords  (worst %s)\n", group.name.c_str(),
                group.max_rel_err, group.checked, group.worst_param.c_str());
  if (!rep.pass) {
    for (const GradCheckGroup& group : rep.groups)
      if (group.max_rel_err >= 1e-3 || group.checked < 32)
        std::printf("FAIL group %s\n", group.name.c_str());
    std::printf("gradcheck mode %s: FAIL (max %.3e at %s)\n", mode.c_str(), rep.max_rel_err,
                rep.worst_param.c_str());
    return 2;
  }
  std::printf("gradcheck mode %s: pass (max %.3e, %d coords)\n", mode.c_str(), rep.max_rel_err,
              rep.checked);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"super-resolution implicit shape reconstruction"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "pipeline configuration JSON");
  app.add_option("--seed", g.seed, "override the configured seed")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--threads", g.threads, "worker thread count");

  // synth-corpus
  auto* synth = app.add_subcommand("synth-corpus", "generate the synthetic shape corpus");
  synth->fallthrough();
  std::string synth_out;
  int synth_count = 20, synth_train = 16, synth_subdiv = 4;
  double synth_radius = 0.46, synth_amp = 0.07, synth_units = 0.01;
  synth->add_option("--out", synth_out, "output directory (omit to use the pipeline workdir)");
  synth->add_option("--count", synth_count, "number of shapes");
  synth->add_option("--train-count", synth_train, "shapes assigned to the train split");
  synth->add_option("--subdivisions", synth_subdiv, "icosphere subdivision level");
  synth->add_option("--radius", synth_radius, "base radius");
  synth->add_option("--amplitude", synth_amp, "bump amplitude (0 for exact spheres)");
  synth->add_option("--units-per-cm", synth_units, "model units per centimetre");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "decimate surfaces to the coarse targets");
  prepare->fallthrough();
  std::string prep_in, prep_out;
  long prep_faces = 320;
  bool prep_normalize = false;
  prepare->add_option("--in", prep_in, "single mesh to prepare (OBJ/PLY)");
  prepare->add_option("--out", prep_out, "output OBJ path");
  prepare->add_option("--target-faces", prep_faces, "decimation face budget");
  prepare->add_flag("--normalize", prep_normalize, "normalize into the unit cube first");

  auto* render = app.add_subcommand("render-dataset", "render ground truth and degraded inputs");
  render->fallthrough();
  auto* sample = app.add_subcommand("sample", "build the labeled point sets");
  sample->fallthrough();
  auto* train_cmd = app.add_subcommand("train", "train the model on the prepared dataset");
  train_cmd->fallthrough();
  auto* recon = app.add_subcommand("reconstruct", "extract meshes for the test split");
  recon->fallthrough();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score reconstructions against ground truth");
  eval->fallthrough();
  std::string eval_rec, eval_gt, eval_cam, eval_out;
  int eval_samples = 10000;
  double eval_units = 0.01;
  eval->add_option("--rec", eval_rec, "reconstructed mesh (standalone mode)");
  eval->add_option("--gt", eval_gt, "ground-truth mesh");
  eval->add_option("--camera", eval_cam, "camera JSON for the normal metric");
  eval->add_option("--samples", eval_samples, "surface samples per direction");
  eval->add_option("--units-per-cm", eval_units, "model units per centimetre");
  eval->add_option("--out", eval_out, "write the report JSON here as well");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc->fallthrough();
  std::string gc_mode = "full";
  gc->add_option("--mode", gc_mode, "full, rec, mr, sr, diff, or zero");

  auto* pipe = app.add_subcommand("pipeline", "run every stage end to end");
  pipe->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (g.threads > 0) set_thread_count(g.threads);

    if (synth->parsed()) {
      if (synth_out.empty()) return run_stages(g, Stage::synth);
      std::uint64_t seed = g.seed_set ? g.seed : 7;
      synth_corpus(synth_out, synth_count, synth_train, synth_subdiv, synth_radius, synth_amp,
                   synth_units, seed);
      std::printf("wrote %d meshes under %s\n", synth_count, synth_out.c_str());
      return 0;
    }
    if (prepare->parsed()) {
      if (prep_in.empty()) return run_stages(g, Stage::prepare);
      if (prep_out.empty()) throw ValidationError("prepare: --out is required with --in");
      TriMesh mesh = load_mesh(prep_in);
      if (prep_normalize) normalize_to_unit(mesh);
      DecimateResult res = decimate(mesh, prep_faces);
      if (!res.reached_target)
        std::fprintf(stderr, "warning: stopped above the face target (no legal collapse left)\n");
      save_obj(prep_out, res.mesh);
      std::printf("%s: %zu faces -> %zu\n", prep_out.c_str(), mesh.faces.size(),
                  res.mesh.faces.size());
      return 0;
    }
    if (render->parsed()) return run_stages(g, Stage::render);
    if (sample->parsed()) return run_stages(g, Stage::sample);
    if (train_cmd->parsed()) return run_stages(g, Stage::train);
    if (recon->parsed()) return run_stages(g, Stage::reconstruct);
    if (eval->parsed()) {
      if (eval_rec.empty()) return run_stages(g, Stage::evaluate);
      if (eval_gt.empty() || eval_cam.empty())
        throw ValidationError("evaluate: --gt and --camera are required with --rec");
      TriMesh rec = load_mesh(eval_rec);
      TriMesh gt = load_mesh(eval_gt);
      rec.units_per_cm = gt.units_per_cm = eval_units;
      OrthoCamera cam = load_camera(eval_cam);
      std::uint64_t seed = g.seed_set ? g.seed : 1;
      ModelEval row = evaluate_mesh_pair(eval_rec, rec, gt, cam, eval_samples, seed);
      EvalReport report = make_report({row}, eval_samples, seed);
      std::cout << report_to_json(report);
      if (!eval_out.empty()) save_report(eval_out, report);
      return 0;
    }
    if (gc->parsed()) {
      std::uint64_t seed = g.seed_set ? g.seed : 7;
      return run_gradcheck_cmd(gc_mode, seed);
    }
    if (pipe->parsed()) return run_stages(g, Stage::evaluate);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
