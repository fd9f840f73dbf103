#pragma once

#include <vector>

#include "lpdet/geometry.hpp"

namespace lpdet {

struct LayerSpec {
  int grid;                    // cells per side
  double scale;                // box scale relative to the image
  std::vector<double> ratios;  // aspect ratios (w/h)
};

struct PriorSet {
  std::vector<HBox> boxes;
  std::vector<int> layer_of_origin;

  std::size_t size() const { return boxes.size(); }
};

struct MatchResult {
  // Matched GT index per prior, -1 for background.
  std::vector<int> gt_index;
  std::vector<char> positive;
  int num_positive = 0;
};

// One prior per (cell, ratio) centered at cell centers, w = scale*sqrt(ar),
// h = scale/sqrt(ar), clipped to the unit square. Order: layer, cell
// (row-major), ratio.
PriorSet generate_priors(const std::vector<LayerSpec>& specs);

// SSD-style two-rule assignment: (a) every GT claims a best prior by
// greedy bipartite matching on IOU, then (b) each unclaimed prior with
// IOU >= threshold joins its best GT. Ties break to the higher IOU, then
// the lower prior index.
MatchResult match_priors(const PriorSet& priors, const std::vector<HBox>& gts, double threshold = 0.5);

// Top-loss negatives, at most ratio * |positives|; when there are no
// positives, the single top negative. Ties break to the lower index.
std::vector<char> hard_negative_mine(const std::vector<double>& conf_losses,
                                     const std::vector<char>& positive, int ratio = 3);

}  // namespace lpdet
