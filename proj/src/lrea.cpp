#include "lpdet/lrea.hpp"

#include <cmath>
#include <stdexcept>

#include "lpdet/kernels.hpp"

namespace lpdet {

std::optional<LocalRegion> expand_region(const HBox& plate_hint, const HBox& vehicle, double ratio,
                                         int image_index, int vehicle_index) {
  if (!(ratio >= 1.0)) throw std::invalid_argument("expand_region: ratio must be >= 1");
  if (!vehicle.valid()) throw std::invalid_argument("expand_region: degenerate vehicle box");

  std::optional<HBox> clipped;
  if (std::isinf(ratio)) {
    clipped = clip_to_unit(vehicle);
  } else {
    HBox grown{plate_hint.cx, plate_hint.cy, plate_hint.w * ratio, plate_hint.h * ratio};
    auto in_vehicle = intersect_boxes(grown, vehicle);
    if (!in_vehicle) return std::nullopt;
    clipped = clip_to_unit(*in_vehicle);
  }
  if (!clipped) return std::nullopt;
  return LocalRegion{*clipped, image_index, vehicle_index, plate_hint};
}

namespace {

kernels::WarpDims warp_dims(const Tensor& features, const HBox& region, int out_size) {
  if (features.ndim() != 4) throw std::invalid_argument("roi_warp: features must be NCHW");
  if (!(region.w > 0) || !(region.h > 0)) throw std::invalid_argument("roi_warp: region with non-positive area");
  if (out_size <= 0) throw std::invalid_argument("roi_warp: bad output size");
  kernels::WarpDims d;
  d.c = features.dim(1);
  d.ih = features.dim(2);
  d.iw = features.dim(3);
  d.s = out_size;
  d.x0 = region.xmin();
  d.y0 = region.ymin();
  d.w = region.w;
  d.h = region.h;
  return d;
}

template <class T>
void warp_batch_forward(Tensor& out, const Tensor& features, const std::vector<LocalRegion>& regions,
                        int out_size) {
  const T* feat = features.data_ptr<T>();
  T* dst = out.data_ptr<T>();
  std::size_t slab = static_cast<std::size_t>(features.dim(1)) * features.dim(2) * features.dim(3);
  std::size_t patch = static_cast<std::size_t>(features.dim(1)) * out_size * out_size;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    auto d = warp_dims(features, regions[r].region, out_size);
    kernels::roi_warp_forward(feat + slab * static_cast<std::size_t>(regions[r].image_index), dst + patch * r, d);
  }
}

template <class T>
void warp_batch_backward(Tensor& out, Tensor& features, const std::vector<LocalRegion>& regions, int out_size,
                         const std::vector<RegionCoordHook>& hooks) {
  const T* g = out.grad_ptr<T>();
  T* dfeat = features.grad_ptr<T>();
  const T* feat = features.data_ptr<T>();
  std::size_t slab = static_cast<std::size_t>(features.dim(1)) * features.dim(2) * features.dim(3);
  std::size_t patch = static_cast<std::size_t>(features.dim(1)) * out_size * out_size;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    auto d = warp_dims(features, regions[r].region, out_size);
    std::size_t offset = slab * static_cast<std::size_t>(regions[r].image_index);
    kernels::roi_warp_backward(g + patch * r, dfeat + offset, d);
    if (!hooks.empty() && hooks[r]) {
      std::array<double, 4> dcoord{0, 0, 0, 0};
      kernels::roi_warp_backward_coords(feat + offset, g + patch * r, dcoord.data(), d);
      hooks[r](dcoord);
    }
  }
}

}  // namespace

PatchBatch aggregate(const std::vector<LocalRegion>& regions, const Tensor& features, int out_size,
                     const std::vector<RegionCoordHook>& coord_hooks,
                     const std::vector<Tensor>& coord_parents) {
  PatchBatch out;
  out.regions = regions;
  if (regions.empty()) return out;
  if (!coord_hooks.empty() && coord_hooks.size() != regions.size())
    throw std::invalid_argument("aggregate: one coordinate hook per region");

  for (const auto& r : regions) {
    if (r.image_index < 0 || r.image_index >= features.dim(0))
      throw std::invalid_argument("aggregate: region image index out of range");
    out.transforms.push_back({r.region.xmin(), r.region.ymin(), r.region.w, r.region.h});
  }

  std::vector<Tensor> parents{features};
  for (const auto& p : coord_parents) parents.push_back(p);
  Tensor patches =
      Tensor::node({static_cast<int>(regions.size()), features.dim(1), out_size, out_size}, parents);
  Tensor feats = features;
  if (patches.dtype() == DType::F32)
    warp_batch_forward<float>(patches, feats, regions, out_size);
  else
    warp_batch_forward<double>(patches, feats, regions, out_size);
  if (engine::check_finite()) patches.check_finite("roi_warp");

  patches.set_backward(
      [o = Tensor::borrow(patches.raw()), feats = feats, regions, out_size, coord_hooks]() mutable {
        if (o.dtype() == DType::F32)
          warp_batch_backward<float>(o, feats, regions, out_size, coord_hooks);
        else
          warp_batch_backward<double>(o, feats, regions, out_size, coord_hooks);
      });
  out.patches = patches;
  return out;
}

Tensor roi_warp(const Tensor& features, int batch_index, const HBox& region, int out_size) {
  warp_dims(features, region, out_size);  // validation
  LocalRegion r;
  r.region = region;
  r.image_index = batch_index;
  r.plate_hint = region;
  return aggregate({r}, features, out_size).patches;
}

}  // namespace lpdet
