#include "lpdet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lpdet/codec.hpp"
#include "lpdet/ops.hpp"

namespace lpdet {

double smooth_l1(double x) { return std::abs(x) < 1 ? 0.5 * x * x : std::abs(x) - 0.5; }

double smooth_l1_grad(double x) { return std::abs(x) < 1 ? x : (x > 0 ? 1.0 : -1.0); }

namespace {

// Stable -log softmax(cls) for a two-class row.
inline double ce_row(double z0, double z1, int cls) {
  double m = std::max(z0, z1);
  double logz = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
  return logz - (cls == 0 ? z0 : z1);
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Stable BCE in logit space: max(z,0) - z*y + log(1+exp(-|z|)).
inline double bce_row(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

Tensor softmax_ce(const Tensor& logits, const std::vector<int>& labels, const std::vector<char>& mask) {
  if (logits.ndim() != 2 || logits.dim(1) != 2) throw std::invalid_argument("softmax_ce: logits must be (P,2)");
  std::size_t rows = static_cast<std::size_t>(logits.dim(0));
  if (labels.size() != rows || mask.size() != rows) throw std::invalid_argument("softmax_ce: size mismatch");

  Tensor out = Tensor::node({1}, {logits});
  double acc = 0;
  std::size_t selected = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    ++selected;
    acc += ce_row(logits.value(2 * r), logits.value(2 * r + 1), labels[r]);
  }
  if (selected == 0) throw std::invalid_argument("softmax_ce: empty selection");
  out.set_value(0, acc);
  out.set_backward([o = Tensor::borrow(out.raw()), logits = logits, labels, mask, rows]() mutable {
    double g = o.grad_value(0);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!mask[r]) continue;
      double z0 = logits.value(2 * r), z1 = logits.value(2 * r + 1);
      double m = std::max(z0, z1);
      double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
      double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
      logits.grad_add(2 * r, g * (p0 - (labels[r] == 0 ? 1.0 : 0.0)));
      logits.grad_add(2 * r + 1, g * (p1 - (labels[r] == 1 ? 1.0 : 0.0)));
    }
  });
  return out;
}

Tensor bce_has_lp(const Tensor& lpc_logits, const std::vector<char>& flags, const std::vector<char>& positive) {
  if (lpc_logits.ndim() != 2 || lpc_logits.dim(1) != 1)
    throw std::invalid_argument("bce_has_lp: logits must be (P,1)");
  std::size_t rows = static_cast<std::size_t>(lpc_logits.dim(0));
  if (flags.size() != rows || positive.size() != rows) throw std::invalid_argument("bce_has_lp: size mismatch");

  Tensor out = Tensor::node({1}, {lpc_logits});
  double acc = 0;
  for (std::size_t r = 0; r < rows; ++r)
    if (positive[r]) acc += bce_row(lpc_logits.value(r), flags[r] ? 1.0 : 0.0);
  out.set_value(0, acc);
  out.set_backward([o = Tensor::borrow(out.raw()), lpc_logits = lpc_logits, flags, positive, rows]() mutable {
    double g = o.grad_value(0);
    for (std::size_t r = 0; r < rows; ++r)
      if (positive[r]) lpc_logits.grad_add(r, g * (sigmoid(lpc_logits.value(r)) - (flags[r] ? 1.0 : 0.0)));
  });
  return out;
}

Tensor masked_smooth_l1(const Tensor& pred, const std::vector<double>& targets,
                        const std::vector<double>& row_weights) {
  if (pred.ndim() != 2) throw std::invalid_argument("masked_smooth_l1: pred must be 2-D");
  std::size_t rows = static_cast<std::size_t>(pred.dim(0));
  std::size_t k = static_cast<std::size_t>(pred.dim(1));
  if (targets.size() != rows * k || row_weights.size() != rows)
    throw std::invalid_argument("masked_smooth_l1: size mismatch");

  Tensor out = Tensor::node({1}, {pred});
  double acc = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (row_weights[r] == 0) continue;
    for (std::size_t c = 0; c < k; ++c) acc += row_weights[r] * smooth_l1(pred.value(r * k + c) - targets[r * k + c]);
  }
  out.set_value(0, acc);
  out.set_backward([o = Tensor::borrow(out.raw()), pred = pred, targets, row_weights, rows, k]() mutable {
    double g = o.grad_value(0);
    for (std::size_t r = 0; r < rows; ++r) {
      if (row_weights[r] == 0) continue;
      for (std::size_t c = 0; c < k; ++c)
        pred.grad_add(r * k + c, g * row_weights[r] * smooth_l1_grad(pred.value(r * k + c) - targets[r * k + c]));
    }
  });
  return out;
}

AlpdLossBreakdown alpd_loss(const AlpdHeads& heads, const PriorSet& priors,
                            const std::vector<MatchResult>& matches,
                            const std::vector<SceneLabel>& labels, int neg_pos_ratio) {
  const std::size_t p = priors.size();
  const std::size_t n_img = labels.size();
  if (matches.size() != n_img) throw std::invalid_argument("alpd_loss: matches/labels size mismatch");
  if (static_cast<std::size_t>(heads.conf.dim(0)) != n_img * p)
    throw std::invalid_argument("alpd_loss: head rows must be images*priors");

  const std::size_t rows = n_img * p;
  std::vector<int> cls(rows, 0);
  std::vector<char> selection(rows, 0);
  std::vector<char> flags(rows, 0);
  std::vector<double> loc_t(rows * 4, 0.0), off_t(rows * 2, 0.0), lpwh_t(rows * 2, 0.0);
  std::vector<double> w_pos(rows, 0.0), w_off(rows, 0.0);
  std::vector<char> pos_mask(rows, 0);
  int n_pos = 0;

  for (std::size_t i = 0; i < n_img; ++i) {
    const auto& m = matches[i];
    if (m.positive.size() != p) throw std::invalid_argument("alpd_loss: match size mismatch");

    // background CE per prior, input to per-image hard negative mining
    std::vector<double> bg_loss(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
      std::size_t r = i * p + j;
      bg_loss[j] = ce_row(heads.conf.value(2 * r), heads.conf.value(2 * r + 1), 0);
    }
    auto mined = hard_negative_mine(bg_loss, m.positive, neg_pos_ratio);

    for (std::size_t j = 0; j < p; ++j) {
      std::size_t r = i * p + j;
      if (m.positive[j]) {
        const VehicleLabel& v = labels[i].vehicles.at(static_cast<std::size_t>(m.gt_index[j]));
        cls[r] = 1;
        selection[r] = 1;
        w_pos[r] = 1.0;
        pos_mask[r] = 1;
        ++n_pos;
        VehicleTarget vt = encode_vehicle(v.box, priors.boxes[j]);
        loc_t[r * 4 + 0] = vt.t_cx;
        loc_t[r * 4 + 1] = vt.t_cy;
        loc_t[r * 4 + 2] = vt.t_w;
        loc_t[r * 4 + 3] = vt.t_h;
        if (v.has_lp) {
          flags[r] = 1;
          w_off[r] = 1.0;
          PlateHintTarget pt = encode_plate_hint(v.plate_box, v.box, priors.boxes[j]);
          off_t[r * 2 + 0] = pt.t_offx;
          off_t[r * 2 + 1] = pt.t_offy;
          lpwh_t[r * 2 + 0] = pt.t_lpw;
          lpwh_t[r * 2 + 1] = pt.t_lph;
        }
      } else if (mined[j]) {
        selection[r] = 1;
      }
    }
  }

  AlpdLossBreakdown out;
  out.n_pos = n_pos;

  Tensor conf = softmax_ce(heads.conf, cls, selection);
  Tensor loc = masked_smooth_l1(heads.loc, loc_t, w_pos);
  Tensor haslp = bce_has_lp(ops::slice_cols(heads.plate, 0, 1), flags, pos_mask);
  Tensor off = masked_smooth_l1(ops::slice_cols(heads.plate, 1, 3), off_t, w_off);
  Tensor lpwh = masked_smooth_l1(ops::slice_cols(heads.plate, 3, 5), lpwh_t, w_off);

  out.conf = conf.value(0);
  out.loc = loc.value(0);
  out.has_lp = haslp.value(0);
  out.off = off.value(0);
  out.lp_wh = lpwh.value(0);

  Tensor sum = ops::add(ops::add(ops::add(ops::add(conf, loc), haslp), off), lpwh);
  out.total = ops::scale(sum, 1.0 / std::max(n_pos, 1));
  out.total_value = out.total.value(0);
  out.total.check_finite("alpd_loss");
  return out;
}

MolprLossBreakdown molpr_loss(const MolprHeads& heads, const PriorSet& priors,
                              const std::vector<MatchResult>& matches,
                              const std::vector<PatchLabel>& labels, int neg_pos_ratio) {
  const std::size_t p = priors.size();
  const std::size_t n_patch = labels.size();
  if (matches.size() != n_patch) throw std::invalid_argument("molpr_loss: matches/labels size mismatch");
  if (static_cast<std::size_t>(heads.conf.dim(0)) != n_patch * p)
    throw std::invalid_argument("molpr_loss: head rows must be patches*priors");

  const std::size_t rows = n_patch * p;
  std::vector<int> cls(rows, 0);
  std::vector<char> selection(rows, 0);
  std::vector<double> loc_t(rows * 4, 0.0), corner_t(rows * 8, 0.0);
  std::vector<double> w_pos(rows, 0.0);
  int n_pos = 0;

  for (std::size_t i = 0; i < n_patch; ++i) {
    const auto& m = matches[i];
    std::vector<double> bg_loss(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
      std::size_t r = i * p + j;
      bg_loss[j] = ce_row(heads.conf.value(2 * r), heads.conf.value(2 * r + 1), 0);
    }
    auto mined = hard_negative_mine(bg_loss, m.positive, neg_pos_ratio);

    for (std::size_t j = 0; j < p; ++j) {
      std::size_t r = i * p + j;
      if (m.positive[j]) {
        std::size_t gi = static_cast<std::size_t>(m.gt_index[j]);
        cls[r] = 1;
        selection[r] = 1;
        w_pos[r] = 1.0;
        ++n_pos;
        VehicleTarget vt = encode_vehicle(labels[i].plate_boxes.at(gi), priors.boxes[j]);
        loc_t[r * 4 + 0] = vt.t_cx;
        loc_t[r * 4 + 1] = vt.t_cy;
        loc_t[r * 4 + 2] = vt.t_w;
        loc_t[r * 4 + 3] = vt.t_h;
        CornerTarget ct = encode_corners(labels[i].plate_quads.at(gi), priors.boxes[j]);
        for (int c = 0; c < 8; ++c) corner_t[r * 8 + c] = ct.v[c];
      } else if (mined[j]) {
        selection[r] = 1;
      }
    }
  }

  MolprLossBreakdown out;
  out.n_pos = n_pos;

  Tensor conf = softmax_ce(heads.conf, cls, selection);
  Tensor loc = masked_smooth_l1(heads.loc, loc_t, w_pos);
  Tensor corner = masked_smooth_l1(heads.corner, corner_t, w_pos);

  out.conf = conf.value(0);
  out.loc = loc.value(0);
  out.corner = corner.value(0);

  Tensor sum = ops::add(ops::add(conf, loc), corner);
  out.total = ops::scale(sum, 1.0 / std::max(n_pos, 1));
  out.total_value = out.total.value(0);
  out.total.check_finite("molpr_loss");
  return out;
}

Tensor total_loss(const AlpdLossBreakdown& l1, const std::optional<MolprLossBreakdown>& l2, double alpha) {
  if (alpha <= 0) throw std::invalid_argument("total_loss: alpha must be positive");
  if (!l2) return l1.total;
  return ops::add(l1.total, ops::scale(l2->total, alpha));
}

}  // namespace lpdet
