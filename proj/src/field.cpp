#include "surs/field.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace surs {

std::vector<float> evaluate_field(const Model<float>& model, const Image& lr,
                                  const OrthoCamera& cam, const std::vector<Vec3>& points) {
  cam.validate();
  if (cam.image_size != model.cfg.enc.n_i)
    throw ValidationError("camera pixel grid does not match the network input side");
  if (!params_finite(model)) throw ValidationError("model parameters are not finite");

  EncoderState<float> st;
  model.encode(lr.v, lr.width, lr.channels, st);

  std::vector<float> out(points.size(), 0.f);
  const std::int64_t chunk = 65536;
  const std::int64_t n_chunks = ((std::int64_t)points.size() + chunk - 1) / chunk;
  const bool use_sr = model.cfg.has_sr();

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    std::vector<float> feat;
    EmbedRecord<float> rec;
    MlpState<float> mr_state, sr_state;
    const std::int64_t lo = c * chunk;
    const std::int64_t hi = std::min<std::int64_t>(lo + chunk, (std::int64_t)points.size());
    for (std::int64_t p = lo; p < hi; ++p) {
      PixelDepth pd = cam.project(points[p]);
      if (!pd.in_window) continue;  // empty space outside the view
      model.index_embedding(st, (float)pd.pixel.x(), (float)pd.pixel.y(), feat, rec);
      if (!rec.in_window) continue;
      float s_mr = 0.f;
      if (model.cfg.has_mr()) s_mr = model.mr_forward(feat, (float)pd.depth, mr_state);
      out[p] = use_sr ? model.sr_forward(feat, (float)pd.depth, s_mr, sr_state) : s_mr;
    }
  }
  return out;
}

FieldGrid evaluate_field_grid(const Model<float>& model, const Image& lr, const OrthoCamera& cam,
                              int resolution, double span, Vec3 center) {
  if (resolution < 8 || resolution > 1024)
    throw ValidationError("field resolution must be in [8, 1024]");
  if (!(span > 0)) throw ValidationError("field span must be positive");

  FieldGrid g;
  g.r = resolution;
  g.h = span / (resolution - 1);
  g.origin = center - Vec3(span, span, span) / 2.0;

  std::vector<Vec3> pts;
  pts.reserve((size_t)resolution * resolution * resolution);
  for (int k = 0; k < resolution; ++k)
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) pts.push_back(g.node(i, j, k));
  g.v = evaluate_field(model, lr, cam, pts);
  return g;
}

}  // namespace surs
