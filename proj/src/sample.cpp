#include "surs/sample.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

#include "surs/winding.hpp"

namespace surs {

std::vector<Vec3> sample_pool(const TriMesh& s_hr, int n_t, double sigma, double uniform_ratio,
                              Rng& rng) {
  if (n_t < 1) throw ValidationError("sample_pool: pool size must be positive");
  if (uniform_ratio < 0.0 || uniform_ratio > 1.0)
    throw ValidationError("sample_pool: uniform_ratio outside [0, 1]");
  const int n_uniform = (int)(uniform_ratio * n_t);

  std::vector<Vec3> pool;
  pool.reserve(n_t);
  for (int i = 0; i < n_uniform; ++i)
    pool.emplace_back(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));

  const int n_surface = n_t - n_uniform;
  if (n_surface > 0) {
    std::vector<Vec3> on_surface = sample_on_surface(s_hr, n_surface, rng);
    for (const Vec3& s : on_surface)
      pool.emplace_back(s.x() + rng.normal(0.0, sigma), s.y() + rng.normal(0.0, sigma),
                        s.z() + rng.normal(0.0, sigma));
  }
  return pool;
}

namespace {

// Partial Fisher-Yates: the first k entries become a uniform k-subset.
std::vector<int> pick_k(std::vector<int> candidates, int k, Rng& rng) {
  for (int i = 0; i < k; ++i) {
    int j = i + (int)rng.uniform_index(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(k);
  return candidates;
}

FieldSample make_sample(const Vec3& pos, const PixelDepth& pd, std::uint8_t label) {
  FieldSample s;
  s.position = pos;
  s.pixel = pd.pixel;
  s.depth = pd.depth;
  s.label = label;
  return s;
}

}  // namespace

std::vector<FieldSample> label_hr(const std::vector<Vec3>& pool, const TriMesh& s_hr,
                                  const OrthoCamera& cam, int n, Rng& rng,
                                  std::vector<int>* picked) {
  if (n < 2 || n % 2 != 0) throw ValidationError("label_hr: sample count must be even, >= 2");
  cam.validate();

  std::vector<double> w = winding_number_batch(s_hr, pool);
  std::vector<int> inside, outside;
  for (int i = 0; i < (int)pool.size(); ++i) {
    if (near_surface_boundary(w[i])) continue;
    if (!cam.project(pool[i]).in_window) continue;
    (w[i] > 0.5 ? inside : outside).push_back(i);
  }
  const int half = n / 2;
  if ((int)inside.size() < half || (int)outside.size() < half)
    throw SamplingError("label_hr: pool too thin on one side of the surface");

  std::vector<int> pick_in = pick_k(inside, half, rng);
  std::vector<int> pick_out = pick_k(outside, half, rng);

  std::vector<FieldSample> out;
  out.reserve(n);
  for (int i : pick_in) out.push_back(make_sample(pool[i], cam.project(pool[i]), 1));
  for (int i : pick_out) out.push_back(make_sample(pool[i], cam.project(pool[i]), 0));
  if (picked) {
    *picked = std::move(pick_in);
    picked->insert(picked->end(), pick_out.begin(), pick_out.end());
  }
  return out;
}

std::vector<FieldSample> label_sr(const std::vector<Vec3>& pool, const TriMesh& s_lr,
                                  const TriMesh& s_hr, const OrthoCamera& cam, int n, Rng& rng,
                                  std::vector<int>* picked) {
  if (n < 2 || n % 2 != 0) throw ValidationError("label_sr: sample count must be even, >= 2");
  cam.validate();

  std::vector<double> w_lr = winding_number_batch(s_lr, pool);
  std::vector<double> w_hr = winding_number_batch(s_hr, pool);
  std::vector<int> inside, outside;
  for (int i = 0; i < (int)pool.size(); ++i) {
    if (near_surface_boundary(w_lr[i]) || near_surface_boundary(w_hr[i])) continue;
    if (!cam.project(pool[i]).in_window) continue;
    (w_lr[i] > 0.5 ? inside : outside).push_back(i);
  }
  const int half = n / 2;
  if ((int)inside.size() < half || (int)outside.size() < half)
    throw SamplingError("label_sr: pool too thin on one side of the coarse surface");

  std::vector<int> pick_in = pick_k(inside, half, rng);
  std::vector<int> pick_out = pick_k(outside, half, rng);

  std::vector<FieldSample> out;
  out.reserve(n);
  for (int i : pick_in)
    out.push_back(make_sample(pool[i], cam.project(pool[i]), w_hr[i] > 0.5 ? 1 : 0));
  for (int i : pick_out)
    out.push_back(make_sample(pool[i], cam.project(pool[i]), w_hr[i] > 0.5 ? 1 : 0));
  if (picked) {
    *picked = std::move(pick_in);
    picked->insert(picked->end(), pick_out.begin(), pick_out.end());
  }
  return out;
}

SampleSet build_sample_set(const TriMesh& s_hr, const TriMesh& s_lr, const OrthoCamera& cam,
                           const SamplerConfig& cfg, std::uint64_t seed) {
  if (cfg.sample_count < 2 || cfg.sample_count % 2 != 0)
    throw ValidationError("sampler: sample_count must be even, >= 2");
  Rng rng(seed);
  SampleSet set;
  set.seed = seed;

  int pool_target = cfg.pool_size;
  set.pool = sample_pool(s_hr, pool_target, cfg.sigma, cfg.uniform_ratio, rng);
  std::vector<std::uint8_t> from_uniform(set.pool.size(), 0);
  std::fill(from_uniform.begin(),
            from_uniform.begin() + (int)(cfg.uniform_ratio * pool_target), 1);

  for (int attempt = 0;; ++attempt) {
    try {
      std::vector<int> hr_picked, lr_picked;
      set.hr = label_hr(set.pool, s_hr, cam, cfg.sample_count, rng, &hr_picked);
      set.lr = label_sr(set.pool, s_lr, s_hr, cam, cfg.sample_count, rng, &lr_picked);

      auto uniform_frac = [&](const std::vector<int>& idx) {
        int u = 0;
        for (int i : idx) u += from_uniform[i];
        return (double)u / idx.size();
      };
      set.hr_uniform_fraction = uniform_frac(hr_picked);
      set.lr_uniform_fraction = uniform_frac(lr_picked);
      break;
    } catch (const SamplingError&) {
      if (attempt >= cfg.max_regrowth) throw;
      // grow the pool: append another draw of the current size
      std::vector<Vec3> extra = sample_pool(s_hr, pool_target, cfg.sigma, cfg.uniform_ratio, rng);
      int extra_uniform = (int)(cfg.uniform_ratio * pool_target);
      for (int i = 0; i < (int)extra.size(); ++i) from_uniform.push_back(i < extra_uniform);
      set.pool.insert(set.pool.end(), extra.begin(), extra.end());
      pool_target *= 2;
    }
  }

  set.lr_inside_labels = 0;
  for (const FieldSample& s : set.lr) set.lr_inside_labels += s.label;
  set.lr_outside_labels = (int)set.lr.size() - set.lr_inside_labels;
  set.pool_recorded = (std::uint32_t)set.pool.size();
  return set;
}

std::vector<int> flip_indices(const SampleSet& set) {
  std::vector<int> flips;
  const int half = (int)set.lr.size() / 2;
  for (int i = 0; i < (int)set.lr.size(); ++i) {
    std::uint8_t side = i < half ? 1 : 0;
    if (set.lr[i].label != side) flips.push_back(i);
  }
  return flips;
}

// ------------------------------------------------------------ serialization

namespace {

constexpr char kMagic[8] = {'S', 'U', 'R', 'S', 'S', 'A', 'M', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_block(std::FILE* f, const std::vector<FieldSample>& block) {
  std::vector<float> pos, pix, dep;
  std::vector<std::uint8_t> lab;
  for (const FieldSample& s : block) {
    pos.push_back((float)s.position.x());
    pos.push_back((float)s.position.y());
    pos.push_back((float)s.position.z());
    pix.push_back((float)s.pixel.x());
    pix.push_back((float)s.pixel.y());
    dep.push_back((float)s.depth);
    lab.push_back(s.label);
  }
  std::fwrite(pos.data(), 4, pos.size(), f);
  std::fwrite(pix.data(), 4, pix.size(), f);
  std::fwrite(dep.data(), 4, dep.size(), f);
  std::fwrite(lab.data(), 1, lab.size(), f);
}

std::vector<FieldSample> read_block(std::FILE* f, int n, const std::string& path) {
  std::vector<float> pos(3 * (size_t)n), pix(2 * (size_t)n), dep(n);
  std::vector<std::uint8_t> lab(n);
  bool ok = std::fread(pos.data(), 4, pos.size(), f) == pos.size() &&
            std::fread(pix.data(), 4, pix.size(), f) == pix.size() &&
            std::fread(dep.data(), 4, dep.size(), f) == dep.size() &&
            std::fread(lab.data(), 1, lab.size(), f) == lab.size();
  if (!ok) throw FormatError("truncated sample block in " + path);
  std::vector<FieldSample> block(n);
  for (int i = 0; i < n; ++i) {
    block[i].position = Vec3(pos[3 * i], pos[3 * i + 1], pos[3 * i + 2]);
    block[i].pixel = Vec2(pix[2 * i], pix[2 * i + 1]);
    block[i].depth = dep[i];
    if (lab[i] > 1) throw FormatError("label out of range in " + path);
    block[i].label = lab[i];
  }
  return block;
}

}  // namespace

void save_sample_set(const std::string& path, const SampleSet& set) {
  if (set.hr.size() != set.lr.size())
    throw ValidationError("sample set: block sizes disagree");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw FormatError("cannot write " + path);
  std::fwrite(kMagic, 1, 8, f);
  std::uint32_t version = kVersion,
                n_t = set.pool.empty() ? set.pool_recorded : (std::uint32_t)set.pool.size(),
                n = (std::uint32_t)set.hr.size();
  std::fwrite(&version, 4, 1, f);
  std::fwrite(&n_t, 4, 1, f);
  std::fwrite(&n, 4, 1, f);
  std::fwrite(&set.seed, 8, 1, f);
  write_block(f, set.hr);
  write_block(f, set.lr);
  std::fclose(f);
}

SampleSet load_sample_set(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw FormatError("cannot open " + path);
  struct Closer {
    std::FILE* f;
    ~Closer() { std::fclose(f); }
  } closer{f};

  char magic[8];
  if (std::fread(magic, 1, 8, f) != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw FormatError("bad sample set magic in " + path);
  std::uint32_t version = 0, n_t = 0, n = 0;
  std::uint64_t seed = 0;
  if (std::fread(&version, 4, 1, f) != 1 || std::fread(&n_t, 4, 1, f) != 1 ||
      std::fread(&n, 4, 1, f) != 1 || std::fread(&seed, 8, 1, f) != 1)
    throw FormatError("truncated sample set header in " + path);
  if (version != kVersion) throw FormatError("unsupported sample set version in " + path);
  if (n == 0 || n % 2 != 0 || n > (1u << 24)) throw FormatError("bad sample count in " + path);

  SampleSet set;
  set.seed = seed;
  set.pool_recorded = n_t;
  set.hr = read_block(f, (int)n, path);
  set.lr = read_block(f, (int)n, path);
  set.lr_inside_labels = 0;
  for (const FieldSample& s : set.lr) set.lr_inside_labels += s.label;
  set.lr_outside_labels = (int)n - set.lr_inside_labels;
  return set;
}

}  // namespace surs
