#pragma once

#include <optional>
#include <vector>

#include "lpdet/priors.hpp"
#include "lpdet/scene.hpp"
#include "lpdet/tensor.hpp"

namespace lpdet {

double smooth_l1(double x);
double smooth_l1_grad(double x);

// Per-prior head tensors after gather_heads. plate columns are
// (has_lp, off_x, off_y, lp_w, lp_h).
struct AlpdHeads {
  Tensor conf;   // (n*P, 2), column 1 = vehicle
  Tensor loc;    // (n*P, 4)
  Tensor plate;  // (n*P, 5)
};

struct MolprHeads {
  Tensor conf;    // (r*P', 2), column 1 = plate
  Tensor loc;     // (r*P', 4)
  Tensor corner;  // (r*P', 8)
};

// Term fields hold unnormalized sums; total = (sum of terms) / max(N, 1).
struct AlpdLossBreakdown {
  double conf = 0, loc = 0, has_lp = 0, off = 0, lp_wh = 0;
  int n_pos = 0;
  double total_value = 0;
  Tensor total;
};

struct MolprLossBreakdown {
  double conf = 0, loc = 0, corner = 0;
  int n_pos = 0;
  double total_value = 0;
  Tensor total;
};

// Horizontal plate GT inside one warped patch, patch-normalized coords.
struct PatchLabel {
  std::vector<HBox> plate_boxes;
  std::vector<Quad> plate_quads;
};

// Sum over selected priors of -log softmax(correct class), log-sum-exp
// stabilized. labels: class per prior; mask: positives plus mined
// negatives. Throws when the selection is empty.
Tensor softmax_ce(const Tensor& logits, const std::vector<int>& labels, const std::vector<char>& mask);

// Binary cross-entropy on has-plate logits over matched vehicle priors,
// computed in logit space.
Tensor bce_has_lp(const Tensor& lpc_logits, const std::vector<char>& flags, const std::vector<char>& positive);

// sum_r w_r * sum_k smooth_l1(pred[r,k] - target[r,k]).
Tensor masked_smooth_l1(const Tensor& pred, const std::vector<double>& targets,
                        const std::vector<double>& row_weights);

// Assembles the coarse-stage loss: vehicle confidence (with per-image hard
// negative mining), vehicle box regression, has-plate BCE, and the plate
// offset/size terms zeroed where the vehicle carries no plate. Normalized
// by the batch-total matched-prior count.
AlpdLossBreakdown alpd_loss(const AlpdHeads& heads, const PriorSet& priors,
                            const std::vector<MatchResult>& matches,
                            const std::vector<SceneLabel>& labels, int neg_pos_ratio = 3);

// Refinement-stage loss over a patch batch: plate confidence, horizontal
// box regression, and the 8-coordinate corner term.
MolprLossBreakdown molpr_loss(const MolprHeads& heads, const PriorSet& priors,
                              const std::vector<MatchResult>& matches,
                              const std::vector<PatchLabel>& labels, int neg_pos_ratio = 3);

// L = L1 + alpha * L2; an absent L2 (no local regions this batch)
// contributes exactly 0.
Tensor total_loss(const AlpdLossBreakdown& l1, const std::optional<MolprLossBreakdown>& l2, double alpha = 1.0);

}  // namespace lpdet
