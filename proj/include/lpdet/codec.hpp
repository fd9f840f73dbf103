#pragma once

#include <array>

#include "lpdet/geometry.hpp"

namespace lpdet {

// Regression targets between geometry and per-prior prediction space. Each
// encode/decode pair is an exact algebraic inverse; no variance scaling.

struct VehicleTarget {
  double t_cx = 0, t_cy = 0, t_w = 0, t_h = 0;
};

struct PlateHintTarget {
  double t_offx = 0, t_offy = 0, t_lpw = 0, t_lph = 0;
};

struct CornerTarget {
  // (tlx, tly, trx, try, brx, bry, blx, bly)
  std::array<double, 8> v{};
};

// Center offsets normalized by prior extents, log-ratio sizes.
VehicleTarget encode_vehicle(const HBox& g, const HBox& d);
HBox decode_vehicle(const VehicleTarget& t, const HBox& d);

// Offset measured between the plate center and the vehicle GT center
// (decode adds it to the predicted vehicle center); log plate size keeps
// decoded extents positive.
PlateHintTarget encode_plate_hint(const HBox& plate, const HBox& vehicle_gt, const HBox& d);
HBox decode_plate_hint(const PlateHintTarget& t, const HBox& d, const Point& predicted_vehicle_center);

// Corner coordinates relative to the prior center, normalized by prior
// extents; vertex order preserved.
CornerTarget encode_corners(const Quad& q, const HBox& d);
Quad decode_corners(const CornerTarget& t, const HBox& d);

}  // namespace lpdet
