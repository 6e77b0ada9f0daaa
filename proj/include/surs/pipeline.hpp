#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surs/camera.hpp"
#include "surs/metrics.hpp"
#include "surs/net.hpp"
#include "surs/sample.hpp"
#include "surs/trainer.hpp"

namespace surs {

// Everything one end-to-end run needs. Serialized into the work directory so
// later invocations can verify they resume the same run.
struct PipelineConfig {
  std::string workdir = "surs_run";
  std::uint64_t seed = 7;

  // corpus
  int n_shapes = 20;
  int train_count = 16;  // the remaining shapes form the test split
  int subdivisions = 4;
  double radius = 0.46;
  double amplitude = 0.07;
  double units_per_cm = 0.01;  // model units per cm; the unit-ish shapes read as ~1 m

  // camera / images
  int n_i = 64;  // input resolution; renders run at 2*n_i
  double window = 1.2;

  // low-resolution surface
  long lr_faces = 320;

  SamplerConfig sampler;

  // model
  ArchKind arch = ArchKind::full;
  int c_hi = 8, c_lo = 16, stacks = 2;
  std::vector<int> mlp_hidden = {64, 32, 16, 8};
  std::vector<int> mlp_skips = {3, 4, 5};

  TrainConfig train;  // log/checkpoint paths are filled in by the pipeline

  // reconstruction + evaluation
  int recon_resolution = 64;
  double recon_span = 1.1;
  int eval_samples = 10000;

  void validate() const;
};

std::string pipeline_config_to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const std::string& text);
void save_pipeline_config(const std::string& path, const PipelineConfig& cfg);
PipelineConfig load_pipeline_config(const std::string& path);

std::string camera_to_json(const OrthoCamera& cam);
OrthoCamera camera_from_json(const std::string& text);
void save_camera(const std::string& path, const OrthoCamera& cam);
OrthoCamera load_camera(const std::string& path);

enum class Stage { synth, prepare, render, sample, train, reconstruct, evaluate };
Stage stage_from_string(const std::string& s);
std::string stage_to_string(Stage s);

struct StageStatus {
  std::string name;
  bool cached = false;  // outputs were already on disk, nothing recomputed
  std::string artifact;
};

// Writes `count` corpus meshes plus a train/test manifest into out_dir.
void synth_corpus(const std::string& out_dir, int count, int train_count, int subdivisions,
                  double radius, double amplitude, double units_per_cm, std::uint64_t seed);

// Runs the stages in order up to and including `upto`, skipping any stage
// whose outputs already exist. The work directory remembers its exact
// configuration; rerunning with a different one is an error. Returns the
// evaluation report when `upto` includes it, a default report otherwise.
// Reconstruction reads only the checkpoint and the degraded input image.
EvalReport run_pipeline(const PipelineConfig& cfg, Stage upto = Stage::evaluate,
                        std::vector<StageStatus>* log = nullptr);

}  // namespace surs
