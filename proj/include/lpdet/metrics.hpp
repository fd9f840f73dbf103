#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lpdet/geometry.hpp"

namespace lpdet {

struct ScoredBox {
  HBox box;
  double conf = 0;
};

struct ScoredQuad {
  Quad quad;
  double conf = 0;
};

// VOC2007 11-point average precision. Detections are sorted globally by
// descending confidence (ties: lower image index, then insertion order);
// each GT is claimable once and a detection whose best-IOU GT is already
// claimed counts as a false positive. With no GTs anywhere the result is
// defined as 0 and `degenerate` (when given) is set.
double ap_voc07(const std::vector<std::vector<ScoredBox>>& detections,
                const std::vector<std::vector<HBox>>& gts, double iou_threshold,
                bool* degenerate = nullptr);

// Fraction of plate GTs fully contained (boundary-inclusive) in at least
// one expanded region of the same image; absent when there are no GTs.
std::optional<double> c_recall(const std::vector<std::vector<HBox>>& regions,
                               const std::vector<std::vector<HBox>>& plate_gts);

struct Prf {
  double precision = 0, recall = 0, f1 = 0;
  int tp = 0, fp = 0, fn = 0;
};

// Precision/recall/F1 over quadrilaterals: detections filtered at the
// confidence threshold, matched greedily by descending confidence to the
// best unclaimed GT, correct when quad_iou >= iou_threshold.
Prf prf_quad(const std::vector<std::vector<ScoredQuad>>& detections,
             const std::vector<std::vector<Quad>>& gts, double iou_threshold,
             double conf_threshold = 0.5);

struct EvalReport {
  double ap50 = 0, ap75 = 0;
  std::optional<double> c_recall;
  Prf prf50, prf75;
  int num_images = 0;
  int num_plates = 0;  // M
  bool ap_degenerate = false;
};

std::string report_table(const EvalReport& r);
std::string report_json(const EvalReport& r);

}  // namespace lpdet
