#include "lpdet/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace lpdet {

namespace {

struct FlatDet {
  std::size_t image, index;
  double conf;
};

// global confidence order with a deterministic tie-break
std::vector<FlatDet> order_detections(const std::vector<std::vector<ScoredBox>>& detections) {
  std::vector<FlatDet> flat;
  for (std::size_t i = 0; i < detections.size(); ++i)
    for (std::size_t k = 0; k < detections[i].size(); ++k) flat.push_back({i, k, detections[i][k].conf});
  std::stable_sort(flat.begin(), flat.end(), [](const FlatDet& a, const FlatDet& b) {
    if (a.conf != b.conf) return a.conf > b.conf;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });
  return flat;
}

}  // namespace

double ap_voc07(const std::vector<std::vector<ScoredBox>>& detections,
                const std::vector<std::vector<HBox>>& gts, double iou_threshold, bool* degenerate) {
  if (detections.size() != gts.size()) throw std::invalid_argument("ap_voc07: image count mismatch");
  std::size_t n_gt = 0;
  for (const auto& g : gts) n_gt += g.size();
  if (degenerate) *degenerate = n_gt == 0;
  if (n_gt == 0) return 0.0;

  auto flat = order_detections(detections);
  std::vector<std::vector<char>> claimed(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) claimed[i].assign(gts[i].size(), 0);

  std::vector<double> precision, recall;
  std::size_t tp = 0, fp = 0;
  for (const auto& d : flat) {
    const HBox& box = detections[d.image][d.index].box;
    double best = 0;
    int bj = -1;
    for (std::size_t j = 0; j < gts[d.image].size(); ++j) {
      double v = iou_hbox(box, gts[d.image][j]);
      if (v > best) {
        best = v;
        bj = static_cast<int>(j);
      }
    }
    if (bj >= 0 && best >= iou_threshold && !claimed[d.image][static_cast<std::size_t>(bj)]) {
      claimed[d.image][static_cast<std::size_t>(bj)] = 1;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }

  double ap = 0;
  for (int r = 0; r <= 10; ++r) {
    double level = r / 10.0;
    double best = 0;
    for (std::size_t k = 0; k < precision.size(); ++k)
      if (recall[k] >= level) best = std::max(best, precision[k]);
    ap += best;
  }
  return ap / 11.0;
}

std::optional<double> c_recall(const std::vector<std::vector<HBox>>& regions,
                               const std::vector<std::vector<HBox>>& plate_gts) {
  if (regions.size() != plate_gts.size()) throw std::invalid_argument("c_recall: image count mismatch");
  std::size_t m = 0, hit = 0;
  for (std::size_t i = 0; i < plate_gts.size(); ++i)
    for (const HBox& gt : plate_gts[i]) {
      ++m;
      for (const HBox& er : regions[i])
        if (contains(er, gt)) {
          ++hit;
          break;
        }
    }
  if (m == 0) return std::nullopt;
  return static_cast<double>(hit) / static_cast<double>(m);
}

Prf prf_quad(const std::vector<std::vector<ScoredQuad>>& detections,
             const std::vector<std::vector<Quad>>& gts, double iou_threshold, double conf_threshold) {
  if (detections.size() != gts.size()) throw std::invalid_argument("prf_quad: image count mismatch");

  struct FlatQuad {
    std::size_t image, index;
    double conf;
  };
  std::vector<FlatQuad> flat;
  for (std::size_t i = 0; i < detections.size(); ++i)
    for (std::size_t k = 0; k < detections[i].size(); ++k)
      if (detections[i][k].conf >= conf_threshold) flat.push_back({i, k, detections[i][k].conf});
  std::stable_sort(flat.begin(), flat.end(), [](const FlatQuad& a, const FlatQuad& b) {
    if (a.conf != b.conf) return a.conf > b.conf;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });

  std::vector<std::vector<char>> claimed(gts.size());
  std::size_t n_gt = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    claimed[i].assign(gts[i].size(), 0);
    n_gt += gts[i].size();
  }

  Prf out;
  for (const auto& d : flat) {
    const Quad& q = detections[d.image][d.index].quad;
    double best = 0;
    int bj = -1;
    for (std::size_t j = 0; j < gts[d.image].size(); ++j) {
      if (claimed[d.image][j]) continue;
      double v = quad_iou(q, gts[d.image][j]);
      if (v > best) {
        best = v;
        bj = static_cast<int>(j);
      }
    }
    if (bj >= 0 && best >= iou_threshold) {
      claimed[d.image][static_cast<std::size_t>(bj)] = 1;
      ++out.tp;
    } else {
      ++out.fp;
    }
  }
  out.fn = static_cast<int>(n_gt) - out.tp;
  out.precision = out.tp + out.fp == 0 ? 0.0 : static_cast<double>(out.tp) / (out.tp + out.fp);
  out.recall = out.tp + out.fn == 0 ? 0.0 : static_cast<double>(out.tp) / (out.tp + out.fn);
  out.f1 = out.precision + out.recall == 0 ? 0.0 : 2 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

std::string report_table(const EvalReport& r) {
  char buf[512];
  std::string out;
  out += "metric                 value\n";
  out += "---------------------  -----\n";
  std::snprintf(buf, sizeof buf, "plate AP@0.50          %.4f%s\n", r.ap50, r.ap_degenerate ? "  (no GTs)" : "");
  out += buf;
  std::snprintf(buf, sizeof buf, "plate AP@0.75          %.4f\n", r.ap75);
  out += buf;
  if (r.c_recall) {
    std::snprintf(buf, sizeof buf, "C_recall               %.4f\n", *r.c_recall);
    out += buf;
  } else {
    out += "C_recall               absent (no plate GTs)\n";
  }
  std::snprintf(buf, sizeof buf, "quad P/R/F @0.50       %.4f / %.4f / %.4f\n", r.prf50.precision,
                r.prf50.recall, r.prf50.f1);
  out += buf;
  std::snprintf(buf, sizeof buf, "quad P/R/F @0.75       %.4f / %.4f / %.4f\n", r.prf75.precision,
                r.prf75.recall, r.prf75.f1);
  out += buf;
  std::snprintf(buf, sizeof buf, "images / plate GTs     %d / %d\n", r.num_images, r.num_plates);
  out += buf;
  return out;
}

std::string report_json(const EvalReport& r) {
  nlohmann::json j;
  j["v"] = 1;
  j["ap50"] = r.ap50;
  j["ap75"] = r.ap75;
  j["ap_degenerate"] = r.ap_degenerate;
  if (r.c_recall)
    j["c_recall"] = *r.c_recall;
  else
    j["c_recall"] = nullptr;
  auto prf = [](const Prf& p) {
    return nlohmann::json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
                          {"tp", p.tp},               {"fp", p.fp},         {"fn", p.fn}};
  };
  j["quad_prf50"] = prf(r.prf50);
  j["quad_prf75"] = prf(r.prf75);
  j["num_images"] = r.num_images;
  j["num_plates"] = r.num_plates;
  return j.dump(2);
}

}  // namespace lpdet
