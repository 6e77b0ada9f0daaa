#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surs/camera.hpp"
#include "surs/mesh.hpp"

namespace surs {

// One labeled training point. Positions live in the normalized camera-aligned
// world frame; pixel and depth come from the dataset camera.
struct FieldSample {
  Vec3 position{0, 0, 0};
  Vec2 pixel{0, 0};
  double depth = 0;
  std::uint8_t label = 0;
};

struct SamplerConfig {
  int pool_size = 2400;    // candidate pool before regrowth
  int sample_count = 600;  // per block, even
  double sigma = 0.03;     // surface-perturbation stddev, normalized units
  double uniform_ratio = 1.0 / 16.0;
  int max_regrowth = 8;
};

struct SampleSet {
  std::vector<FieldSample> hr;  // first half inside the detailed surface, labels 1 then 0
  std::vector<FieldSample> lr;  // first half inside the coarse surface; labels follow
                                // the detailed surface, so the counts are free
  std::vector<Vec3> pool;        // not serialized; files carry only its size
  std::uint32_t pool_recorded = 0;
  std::uint64_t seed = 0;
  int lr_inside_labels = 0, lr_outside_labels = 0;
  double hr_uniform_fraction = 0, lr_uniform_fraction = 0;  // achieved pool mixture
};

// Mixture pool: floor(uniform_ratio * n_t) points uniform in [-0.5, 0.5]^3,
// the rest area-weighted surface points with isotropic Gaussian perturbation.
std::vector<Vec3> sample_pool(const TriMesh& s_hr, int n_t, double sigma, double uniform_ratio,
                              Rng& rng);

// Picks n/2 points inside s_hr and n/2 outside, uniformly at random from the
// eligible pool (in the camera window, not within the winding boundary band),
// inside block first. Throws SamplingError when a side runs short.
std::vector<FieldSample> label_hr(const std::vector<Vec3>& pool, const TriMesh& s_hr,
                                  const OrthoCamera& cam, int n, Rng& rng,
                                  std::vector<int>* picked = nullptr);

// Side balance n/2 : n/2 against the coarse surface s_lr, labels recomputed
// against s_hr. Points in the boundary band of either surface are skipped.
std::vector<FieldSample> label_sr(const std::vector<Vec3>& pool, const TriMesh& s_lr,
                                  const TriMesh& s_hr, const OrthoCamera& cam, int n, Rng& rng,
                                  std::vector<int>* picked = nullptr);

// Pool + both labeled blocks; doubles the pool and retries when a side runs
// short, up to cfg.max_regrowth times.
SampleSet build_sample_set(const TriMesh& s_hr, const TriMesh& s_lr, const OrthoCamera& cam,
                           const SamplerConfig& cfg, std::uint64_t seed);

void save_sample_set(const std::string& path, const SampleSet& set);
SampleSet load_sample_set(const std::string& path);

// Indices of lr samples whose label disagrees with their side block. The
// first half of the lr block is the inside-side block by construction.
std::vector<int> flip_indices(const SampleSet& set);

}  // namespace surs
