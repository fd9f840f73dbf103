#include "lpdet/priors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lpdet {

PriorSet generate_priors(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw std::invalid_argument("generate_priors: empty spec");
  PriorSet out;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const auto& s = specs[l];
    if (s.grid <= 0) throw std::invalid_argument("generate_priors: grid must be positive");
    if (s.ratios.empty()) throw std::invalid_argument("generate_priors: no aspect ratios");
    for (int i = 0; i < s.grid; ++i)
      for (int j = 0; j < s.grid; ++j)
        for (double ar : s.ratios) {
          HBox b{(j + 0.5) / s.grid, (i + 0.5) / s.grid, s.scale * std::sqrt(ar), s.scale / std::sqrt(ar)};
          auto clipped = clip_to_unit(b);
          if (!clipped) throw std::invalid_argument("generate_priors: prior entirely outside image");
          out.boxes.push_back(*clipped);
          out.layer_of_origin.push_back(static_cast<int>(l));
        }
  }
  return out;
}

MatchResult match_priors(const PriorSet& priors, const std::vector<HBox>& gts, double threshold) {
  if (threshold <= 0 || threshold >= 1) throw std::invalid_argument("match_priors: threshold must be in (0,1)");
  const std::size_t np = priors.size();
  MatchResult m;
  m.gt_index.assign(np, -1);
  m.positive.assign(np, 0);
  if (gts.empty()) return m;

  std::vector<std::vector<double>> iou(np, std::vector<double>(gts.size()));
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < gts.size(); ++j) iou[i][j] = iou_hbox(priors.boxes[i], gts[j]);

  // Rule (a): greedy bipartite pass, one prior per GT.
  std::vector<char> gt_claimed(gts.size(), 0);
  for (std::size_t round = 0; round < gts.size(); ++round) {
    double best = 0;
    std::size_t bi = np, bj = gts.size();
    for (std::size_t i = 0; i < np; ++i) {
      if (m.gt_index[i] >= 0) continue;
      for (std::size_t j = 0; j < gts.size(); ++j) {
        if (gt_claimed[j]) continue;
        if (iou[i][j] > best) {
          best = iou[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    if (bi == np) break;  // remaining GTs have zero IOU with every free prior
    m.gt_index[bi] = static_cast<int>(bj);
    gt_claimed[bj] = 1;
  }

  // Rule (b): per-prior threshold pass.
  for (std::size_t i = 0; i < np; ++i) {
    if (m.gt_index[i] >= 0) continue;
    double best = 0;
    int bj = -1;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (iou[i][j] > best) {
        best = iou[i][j];
        bj = static_cast<int>(j);
      }
    }
    if (bj >= 0 && best >= threshold) m.gt_index[i] = bj;
  }

  for (std::size_t i = 0; i < np; ++i) {
    m.positive[i] = m.gt_index[i] >= 0;
    m.num_positive += m.positive[i];
  }
  return m;
}

std::vector<char> hard_negative_mine(const std::vector<double>& conf_losses,
                                     const std::vector<char>& positive, int ratio) {
  if (ratio < 1) throw std::invalid_argument("hard_negative_mine: ratio must be >= 1");
  if (conf_losses.size() != positive.size())
    throw std::invalid_argument("hard_negative_mine: size mismatch");

  std::vector<std::size_t> negs;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < positive.size(); ++i) {
    if (positive[i])
      ++n_pos;
    else
      negs.push_back(i);
  }

  std::size_t want = n_pos == 0 ? 1 : static_cast<std::size_t>(ratio) * n_pos;
  want = std::min(want, negs.size());
  std::stable_sort(negs.begin(), negs.end(), [&](std::size_t a, std::size_t b) {
    if (conf_losses[a] != conf_losses[b]) return conf_losses[a] > conf_losses[b];
    return a < b;
  });

  std::vector<char> selected(positive.size(), 0);
  for (std::size_t i = 0; i < want; ++i) selected[negs[i]] = 1;
  return selected;
}

}  // namespace lpdet
