#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surs/camera.hpp"
#include "surs/mesh.hpp"

namespace surs {

// Mean distance, in cm, from area-weighted surface samples of `rec` to the
// closest point on `gt`. One-directional. Both meshes must agree on
// units_per_cm; empty meshes and n_samples < 1000 are rejected.
double p2s(const TriMesh& rec, const TriMesh& gt, int n_samples = 10000, std::uint64_t seed = 1);

// Symmetric Chamfer distance in cm: half the sum of the two directed means.
// Each direction draws its samples from Rng(seed), so swapping the arguments
// returns the identical value.
double chamfer(const TriMesh& a, const TriMesh& b, int n_samples = 10000, std::uint64_t seed = 1);

// Renders both meshes with the same camera and averages the L2 difference of
// the normal maps over pixels covered by both silhouettes. Ranges over [0, 2];
// an empty overlap is a validation error.
double normal_reprojection_error(const TriMesh& rec, const TriMesh& gt, const OrthoCamera& cam);

struct ModelEval {
  std::string name;
  double cd_cm = 0;
  double p2s_cm = 0;
  double normal_err = 0;
};

// Aggregate over an evaluation split, plus the settings that make the numbers
// comparable across runs.
struct EvalReport {
  double cd_cm = 0;  // means over models
  double p2s_cm = 0;
  double normal_err = 0;
  int samples = 0;
  std::uint64_t seed = 0;
  std::vector<ModelEval> models;
};

// All three metrics for one reconstruction/ground-truth pair.
ModelEval evaluate_mesh_pair(const std::string& name, const TriMesh& rec, const TriMesh& gt,
                             const OrthoCamera& cam, int n_samples = 10000,
                             std::uint64_t seed = 1);

// Averages the rows; rejects an empty list and non-finite or negative entries.
EvalReport make_report(const std::vector<ModelEval>& models, int n_samples, std::uint64_t seed);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
void save_report(const std::string& path, const EvalReport& report);
EvalReport load_report(const std::string& path);

}  // namespace surs
