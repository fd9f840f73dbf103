#include "lpdet/codec.hpp"

#include <cmath>
#include <stdexcept>

namespace lpdet {

namespace {
void require_prior(const HBox& d) {
  if (!d.valid()) throw std::invalid_argument("codec: degenerate prior box");
}
}  // namespace

VehicleTarget encode_vehicle(const HBox& g, const HBox& d) {
  require_prior(d);
  if (!g.valid()) throw std::invalid_argument("encode_vehicle: non-positive GT extents");
  return {(g.cx - d.cx) / d.w, (g.cy - d.cy) / d.h, std::log(g.w / d.w), std::log(g.h / d.h)};
}

HBox decode_vehicle(const VehicleTarget& t, const HBox& d) {
  require_prior(d);
  return {d.cx + t.t_cx * d.w, d.cy + t.t_cy * d.h, d.w * std::exp(t.t_w), d.h * std::exp(t.t_h)};
}

PlateHintTarget encode_plate_hint(const HBox& plate, const HBox& vehicle_gt, const HBox& d) {
  require_prior(d);
  if (!plate.valid()) throw std::invalid_argument("encode_plate_hint: non-positive plate extents");
  return {(plate.cx - vehicle_gt.cx) / d.w, (plate.cy - vehicle_gt.cy) / d.h,
          std::log(plate.w / d.w), std::log(plate.h / d.h)};
}

HBox decode_plate_hint(const PlateHintTarget& t, const HBox& d, const Point& predicted_vehicle_center) {
  require_prior(d);
  return {predicted_vehicle_center.x + t.t_offx * d.w, predicted_vehicle_center.y + t.t_offy * d.h,
          d.w * std::exp(t.t_lpw), d.h * std::exp(t.t_lph)};
}

CornerTarget encode_corners(const Quad& q, const HBox& d) {
  require_prior(d);
  CornerTarget t;
  auto p = q.points();
  for (int i = 0; i < 4; ++i) {
    t.v[2 * i] = (p[i].x - d.cx) / d.w;
    t.v[2 * i + 1] = (p[i].y - d.cy) / d.h;
  }
  return t;
}

Quad decode_corners(const CornerTarget& t, const HBox& d) {
  require_prior(d);
  auto pt = [&](int i) { return Point{d.cx + t.v[2 * i] * d.w, d.cy + t.v[2 * i + 1] * d.h}; };
  return {pt(0), pt(1), pt(2), pt(3)};
}

}  // namespace lpdet
