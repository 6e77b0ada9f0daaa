#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surs/image.hpp"
#include "surs/net.hpp"
#include "surs/sample.hpp"

namespace surs {

// Weighted loss contributions for one image or one epoch. Components carry
// their config weights already applied, so total() is the optimized objective
// and a disabled component is exactly zero.
struct LossBreakdown {
  double rec = 0, mr = 0, sr = 0, diff = 0;
  double total() const { return rec + mr + sr + diff; }
  void operator+=(const LossBreakdown& o) {
    rec += o.rec;
    mr += o.mr;
    sr += o.sr;
    diff += o.diff;
  }
  void scale(double s) {
    rec *= s;
    mr *= s;
    sr *= s;
    diff *= s;
  }
};

// ------------------------------------------------------------ loss helpers

double loss_mean_l1(const std::vector<float>& a, const std::vector<float>& b);
double loss_mse_to_labels(const std::vector<double>& pred, const std::vector<std::uint8_t>& labels);
// Difference matching: pairs the i-th entry of each list and penalizes the
// squared mismatch between the target gap and the predicted gap.
double loss_diff_indexed(const std::vector<double>& f_hr, const std::vector<double>& f_sr,
                         const std::vector<double>& s_mr, const std::vector<double>& s_sr);

// ----------------------------------------------------------------- schedule

enum class Schedule { end_to_end, sep_all, rec_then_mlps, recmr_then_sr };
Schedule schedule_from_string(const std::string& s);
std::string schedule_to_string(Schedule s);

enum class DiffPairing { indexed, lr_colocated };
DiffPairing pairing_from_string(const std::string& s);
std::string pairing_to_string(DiffPairing p);

// One training phase: which losses are on and which parameter groups move.
// Groups absent from the architecture come back disabled.
struct Phase {
  bool rec = false, mr = false, sr = false, diff = false;  // active losses
  bool t_enc = false, t_recon = false, t_mr = false, t_sr = false;  // trainable
};

std::vector<Phase> schedule_phases(Schedule s, const ModelConfig& cfg);
// epochs spread over phases: floor(E/P) each, the last phase absorbs the rest
std::vector<int> phase_epoch_counts(int epochs, int phases);

// ----------------------------------------------------------- per-image step

struct StepOptions {
  double w_rec = 1, w_mr = 1, w_sr = 1, w_diff = 1;  // zero disables a term
  DiffPairing pairing = DiffPairing::indexed;
  bool g_enc = true, g_mr = true, g_sr = true;  // gradient paths to walk
};

// Full forward (and backward when grad is given) for one image. The low
// resolution image feeds the encoder; gt is the high resolution target for
// the image head and may be empty when w_rec is zero or the head is absent.
// Gradients accumulate into grad in ParamStore layout.
template <typename T>
LossBreakdown step_image(const Model<T>& model, const Image& lr, const Image& gt,
                         const SampleSet& samples, const StepOptions& opt, GradBuffer<T>* grad);

extern template LossBreakdown step_image<float>(const Model<float>&, const Image&, const Image&,
                                                const SampleSet&, const StepOptions&,
                                                GradBuffer<float>*);
extern template LossBreakdown step_image<double>(const Model<double>&, const Image&, const Image&,
                                                 const SampleSet&, const StepOptions&,
                                                 GradBuffer<double>*);

// ------------------------------------------------------------------- train

struct TrainImage {
  Image lr, gt;
  SampleSet samples;
};

struct TrainConfig {
  Schedule schedule = Schedule::end_to_end;
  int epochs = 100;
  int batch_size = 4;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  double w_rec = 1, w_mr = 1, w_sr = 1, w_diff = 1;
  DiffPairing diff_pairing = DiffPairing::indexed;
  std::string log_path;         // per-epoch CSV when set
  std::string checkpoint_path;  // written on completion, and on divergence
                                // with the last finite parameters
};

struct EpochRow {
  int epoch = 0;
  LossBreakdown loss;
  double wall_seconds = 0;
};

struct TrainResult {
  std::vector<EpochRow> rows;
};

// Adam with one global step count. Parameter tensors outside the trainable
// mask are skipped entirely, moments included, so frozen groups stay
// bit-identical across a phase.
class Adam {
 public:
  Adam(size_t total, double lr) : m_(total, 0.f), v_(total, 0.f), lr_(lr) {}
  void step(ParamStore<float>& params, const GradBuffer<float>& grad,
            const std::vector<std::uint8_t>& tensor_mask);
  std::int64_t steps() const { return t_; }

 private:
  std::vector<float> m_, v_;
  double lr_;
  std::int64_t t_ = 0;
};

TrainResult train(Model<float>& model, const std::vector<TrainImage>& images,
                  const TrainConfig& cfg);

// -------------------------------------------------------------- grad check

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0;
  int checked = 0;
  std::string worst_param;
};

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0;
  int checked = 0;
  std::string worst_param;
  std::vector<GradCheckGroup> groups;
};

// Compares analytic gradients of the per-image objective against central
// finite differences (f64, h = 1e-3) on a reduced model, sampling up to 64
// coordinates per parameter group. A coordinate whose difference quotients at
// h and h/2 disagree straddles an activation kink, where the quotient itself
// is meaningless; such coordinates are redrawn. A wrong analytic gradient
// stays quotient-consistent and is still flagged. mode selects the loss
// subset: full, rec, mr, sr, diff, or zero (all terms off, gradients must
// vanish identically).
GradCheckReport run_gradcheck(const std::string& mode, std::uint64_t seed = 7);

}  // namespace surs
