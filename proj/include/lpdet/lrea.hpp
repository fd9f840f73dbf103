#pragma once

#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "lpdet/geometry.hpp"
#include "lpdet/tensor.hpp"

namespace lpdet {

struct LocalRegion {
  HBox region;      // inside vehicle ∩ unit square, positive area
  int image_index = 0;
  int vehicle_index = 0;
  HBox plate_hint;  // the unexpanded hint the region came from
};

// Affine map between patch-normalized coordinates ([0,1] across the patch)
// and image coordinates.
struct PatchTransform {
  double x0 = 0, y0 = 0, w = 1, h = 1;

  Point to_image(const Point& p) const { return {x0 + p.x * w, y0 + p.y * h}; }
  Point to_patch(const Point& p) const { return {(p.x - x0) / w, (p.y - y0) / h}; }
  HBox box_to_patch(const HBox& b) const {
    return {(b.cx - x0) / w, (b.cy - y0) / h, b.w / w, b.h / h};
  }
  HBox box_to_image(const HBox& b) const {
    return {x0 + b.cx * w, y0 + b.cy * h, b.w * w, b.h * h};
  }
  Quad quad_to_patch(const Quad& q) const {
    return {to_patch(q.tl), to_patch(q.tr), to_patch(q.br), to_patch(q.bl)};
  }
  Quad quad_to_image(const Quad& q) const {
    return {to_image(q.tl), to_image(q.tr), to_image(q.br), to_image(q.bl)};
  }
};

struct PatchBatch {
  Tensor patches;  // (R, C, S, S); undefined when empty
  std::vector<PatchTransform> transforms;
  std::vector<LocalRegion> regions;

  bool empty() const { return regions.empty(); }
  std::size_t size() const { return regions.size(); }
};

constexpr double kWholeVehicleRatio = std::numeric_limits<double>::infinity();

// Scales the hint's extents by `ratio` about the hint center, then clips to
// the vehicle box and the unit square. An infinite ratio selects the whole
// (clipped) vehicle box. Returns nothing when the clipped region is empty;
// the caller decides how to report the drop.
std::optional<LocalRegion> expand_region(const HBox& plate_hint, const HBox& vehicle, double ratio,
                                         int image_index = 0, int vehicle_index = 0);

// Bilinear resampling of `region` from one image's feature slab onto an
// SxS grid; differentiable w.r.t. features. `features` is (B,C,H,W) and
// `batch_index` picks the slab. Gradients w.r.t. the region coordinates are
// off by default; aggregate() wires them behind the config flag.
Tensor roi_warp(const Tensor& features, int batch_index, const HBox& region, int out_size);

// Receives d(loss)/d(x0, y0, w, h) of one region, in image coordinates.
using RegionCoordHook = std::function<void(const std::array<double, 4>&)>;

// Batches all regions into one (R,C,S,S) tensor with per-patch transforms.
// Order follows the input order; callers sort regions by (image, vehicle).
// When coordinate gradients are enabled, `coord_hooks[r]` gets the region
// coordinate gradient and `coord_parents` joins the graph so hooks run
// before the head tensors' own backward.
PatchBatch aggregate(const std::vector<LocalRegion>& regions, const Tensor& features, int out_size,
                     const std::vector<RegionCoordHook>& coord_hooks = {},
                     const std::vector<Tensor>& coord_parents = {});

}  // namespace lpdet
