#pragma once

#include <array>
#include <optional>

#include "lpdet/geometry.hpp"

namespace lpdet {

// Differentiable path from raw coarse-head predictions to a clipped local
// region: vehicle decode -> plate-hint decode -> expansion -> clip to the
// vehicle box and the unit square. Forward records which bound won each
// min/max so backprop can route the region-coordinate gradient back into
// the head values. Used only when warp coordinate gradients are enabled.
class RegionChain {
 public:
  // loc = (t_cx, t_cy, t_w, t_h); off = (t_offx, t_offy);
  // lpwh = (t_lpw, t_lph). Returns nothing when the clipped region is empty.
  static std::optional<RegionChain> build(const HBox& prior, const std::array<double, 4>& loc,
                                          const std::array<double, 2>& off,
                                          const std::array<double, 2>& lpwh, double ratio);

  const HBox& region() const { return region_; }

  // dcoord = dL/d(x0, y0, w, h) of the clipped region. Accumulates into the
  // head-value gradients.
  void backprop(const std::array<double, 4>& dcoord, std::array<double, 4>& dloc,
                std::array<double, 2>& doff, std::array<double, 2>& dlpwh) const;

 private:
  HBox prior_;
  double ratio_ = 1;
  double vw_ = 0, vh_ = 0, hw_ = 0, hh_ = 0;
  // which argument won each clipped bound: 0 = expanded hint, 1 = vehicle,
  // 2 = unit-square constant
  int pick_[4] = {0, 0, 0, 0};  // x0, y0, x1, y1
  HBox region_;
};

}  // namespace lpdet
