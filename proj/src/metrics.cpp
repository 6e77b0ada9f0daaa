#include "surs/metrics.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "surs/bvh.hpp"
#include "surs/raster.hpp"
#include "surs/sample.hpp"

namespace surs {

using nlohmann::json;

namespace {

double check_pair(const TriMesh& a, const TriMesh& b, int n_samples) {
  if (a.vertices.empty() || a.faces.empty() || b.vertices.empty() || b.faces.empty())
    throw ValidationError("metrics: empty mesh");
  if (n_samples < 1000) throw ValidationError("metrics: need at least 1000 samples");
  double ua = a.units_per_cm, ub = b.units_per_cm;
  if (!(ua > 0) || !(ub > 0) || std::abs(ua - ub) > 1e-9 * std::max(ua, ub))
    throw ValidationError("metrics: meshes disagree on units_per_cm");
  return ua;
}

// Mean closest-surface distance from fresh samples of `from`, in model units.
double directed_mean(const TriMesh& from, const Bvh& to, int n_samples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> pts = sample_on_surface(from, n_samples, rng);
  std::vector<SurfaceHit> hits = point_to_surface_batch(to, pts);
  double sum = 0;
  for (const SurfaceHit& h : hits) sum += h.distance;
  return sum / (double)n_samples;
}

}  // namespace

double p2s(const TriMesh& rec, const TriMesh& gt, int n_samples, std::uint64_t seed) {
  double units = check_pair(rec, gt, n_samples);
  Bvh bvh(gt);
  return directed_mean(rec, bvh, n_samples, seed) / units;
}

double chamfer(const TriMesh& a, const TriMesh& b, int n_samples, std::uint64_t seed) {
  double units = check_pair(a, b, n_samples);
  Bvh bvh_a(a), bvh_b(b);
  double ab = directed_mean(a, bvh_b, n_samples, seed);
  double ba = directed_mean(b, bvh_a, n_samples, seed);
  return 0.5 * (ab + ba) / units;
}

double normal_reprojection_error(const TriMesh& rec, const TriMesh& gt, const OrthoCamera& cam) {
  if (rec.faces.empty() || gt.faces.empty())
    throw ValidationError("normal_reprojection_error: empty mesh");
  Raster ra = rasterize(rec, cam);
  Raster rb = rasterize(gt, cam);
  double sum = 0;
  long count = 0;
  for (int y = 0; y < ra.mask.height; ++y)
    for (int x = 0; x < ra.mask.width; ++x) {
      if (ra.mask.at(x, y, 0) == 0.0f || rb.mask.at(x, y, 0) == 0.0f) continue;
      double dx = (double)ra.normal.at(x, y, 0) - rb.normal.at(x, y, 0);
      double dy = (double)ra.normal.at(x, y, 1) - rb.normal.at(x, y, 1);
      double dz = (double)ra.normal.at(x, y, 2) - rb.normal.at(x, y, 2);
      sum += std::sqrt(dx * dx + dy * dy + dz * dz);
      ++count;
    }
  if (count == 0)
    throw ValidationError("normal_reprojection_error: silhouettes never overlap");
  return sum / (double)count;
}

ModelEval evaluate_mesh_pair(const std::string& name, const TriMesh& rec, const TriMesh& gt,
                             const OrthoCamera& cam, int n_samples, std::uint64_t seed) {
  ModelEval e;
  e.name = name;
  e.cd_cm = chamfer(rec, gt, n_samples, seed);
  e.p2s_cm = p2s(rec, gt, n_samples, seed);
  e.normal_err = normal_reprojection_error(rec, gt, cam);
  return e;
}

EvalReport make_report(const std::vector<ModelEval>& models, int n_samples, std::uint64_t seed) {
  if (models.empty()) throw ValidationError("make_report: no models");
  EvalReport r;
  r.samples = n_samples;
  r.seed = seed;
  r.models = models;
  for (const ModelEval& m : models) {
    if (!std::isfinite(m.cd_cm) || !std::isfinite(m.p2s_cm) || !std::isfinite(m.normal_err) ||
        m.cd_cm < 0 || m.p2s_cm < 0 || m.normal_err < 0)
      throw ValidationError("make_report: non-finite or negative entry for " + m.name);
    r.cd_cm += m.cd_cm;
    r.p2s_cm += m.p2s_cm;
    r.normal_err += m.normal_err;
  }
  r.cd_cm /= (double)models.size();
  r.p2s_cm /= (double)models.size();
  r.normal_err /= (double)models.size();
  return r;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["cd_cm"] = report.cd_cm;
  j["p2s_cm"] = report.p2s_cm;
  j["normal_err"] = report.normal_err;
  j["samples"] = report.samples;
  j["seed"] = report.seed;
  j["models"] = json::array();
  for (const ModelEval& m : report.models)
    j["models"].push_back({{"name", m.name},
                           {"cd_cm", m.cd_cm},
                           {"p2s_cm", m.p2s_cm},
                           {"normal_err", m.normal_err}});
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("evaluation report: ") + e.what());
  }
  try {
    EvalReport r;
    r.cd_cm = j.at("cd_cm").get<double>();
    r.p2s_cm = j.at("p2s_cm").get<double>();
    r.normal_err = j.at("normal_err").get<double>();
    r.samples = j.at("samples").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const json& m : j.at("models")) {
      ModelEval e;
      e.name = m.at("name").get<std::string>();
      e.cd_cm = m.at("cd_cm").get<double>();
      e.p2s_cm = m.at("p2s_cm").get<double>();
      e.normal_err = m.at("normal_err").get<double>();
      r.models.push_back(std::move(e));
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("evaluation report: ") + e.what());
  }
}

void save_report(const std::string& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << report_to_json(report);
  if (!out) throw ValidationError("failed writing " + path);
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return report_from_json(text);
}

}  // namespace surs
