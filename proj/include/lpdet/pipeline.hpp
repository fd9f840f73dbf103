#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lpdet/config.hpp"
#include "lpdet/model.hpp"
#include "lpdet/scene.hpp"

namespace lpdet {

struct Detection {
  enum class Stage { Coarse, Refined };

  std::string image_id;
  HBox vehicle;
  double vehicle_conf = 0;
  double has_lp = 0;
  bool plate_valid = false;  // false when the has-plate gate filtered it
  HBox plate_box;
  double plate_conf = 0;
  Quad plate_quad;
  Stage stage = Stage::Coarse;
};

// Greedy descending-score suppression by horizontal-box IOU. Returns kept
// indices in descending score order; ties break to the lower index.
std::vector<std::size_t> nms(const std::vector<HBox>& boxes, const std::vector<double>& scores,
                             double iou_threshold);

// Line-delimited detection records (format v1, see README).
void write_detections(const std::string& path, const std::vector<Detection>& dets);
std::vector<Detection> read_detections(const std::string& path);

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double weight_decay, double eps = 1e-8);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  // One update from accumulated gradients; weight decay enters the gradient.
  void step(NamedParams& params);

 private:
  double lr_, beta1_, beta2_, weight_decay_, eps_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct TrainStepStats {
  double l1_conf = 0, l1_loc = 0, l1_has_lp = 0, l1_off = 0, l1_lp_wh = 0;
  int l1_pos = 0;
  double l1_total = 0;
  double l2_conf = 0, l2_loc = 0, l2_corner = 0;
  int l2_pos = 0;
  double l2_total = 0;  // reported 0 when no regions exist
  double total = 0;
  int regions = 0;
  double lr = 0;
  bool teacher_forced = false;
};

struct AugmentedSample {
  std::vector<double> image01;  // 3*S*S
  SceneLabel label;
};

// Photometric jitter plus a label-preserving random crop (crops must keep
// every vehicle box and plate quad whole; falls back to no crop).
AugmentedSample augment_sample(const std::vector<double>& image01, int size, const SceneLabel& label,
                               Rng& rng, bool photometric, bool crop);

// Two-stage detector wiring: coarse network, local-region estimation, and
// the refinement network, with one Adam state over all weights.
class Pipeline {
 public:
  explicit Pipeline(const RunConfig& cfg);

  // `input` is (B,3,S,S) normalized to [-1,1]; labels are per image.
  TrainStepStats train_step(const Tensor& input, const std::vector<SceneLabel>& labels, int iter);

  std::vector<Detection> infer(const Tensor& input, const std::string& image_id = "") const;

  NamedParams named_params();
  void save(const std::string& path);
  void load(const std::string& path);

  const TinyAlpd& alpd() const { return *alpd_; }
  bool has_molpr() const { return molpr_ != nullptr; }
  const TinyMolpr& molpr() const { return *molpr_; }
  const RunConfig& config() const { return cfg_; }
  // For the ratio sweep: changes only how local regions are expanded.
  void set_expansion_ratio(double ratio) { cfg_.expansion_ratio = ratio; }
  void set_has_lp_gate(bool on) { cfg_.use_has_lp_gate = on; }

  // Expanded regions for a batch of decoded detections; used by C_recall
  // evaluation and the ratio sweep.
  std::vector<LocalRegion> regions_for_detections(const std::vector<Detection>& vehicle_dets,
                                                  double ratio) const;

 private:
  RunConfig cfg_;
  std::unique_ptr<TinyAlpd> alpd_;
  std::unique_ptr<TinyMolpr> molpr_;
  Adam adam_;

  struct VehicleCandidate {
    HBox box;
    double conf = 0;
    double has_lp_prob = 0;
    std::size_t prior_row = 0;  // row into the coarse head tensors
  };
  std::vector<VehicleCandidate> decode_vehicles(const AlpdHeads& heads, int image, bool clip) const;
  friend struct PipelineTestAccess;
};

}  // namespace lpdet
