#pragma once

#include <array>
#include <optional>
#include <vector>

namespace lpdet {

struct Point {
  double x = 0, y = 0;
};

// Horizontal box, center-size form, normalized image coordinates.
struct HBox {
  double cx = 0, cy = 0, w = 0, h = 0;

  double xmin() const { return cx - w / 2; }
  double ymin() const { return cy - h / 2; }
  double xmax() const { return cx + w / 2; }
  double ymax() const { return cy + h / 2; }
  double area() const { return w * h; }
  bool valid() const { return w > 0 && h > 0; }

  static HBox from_corners(double x0, double y0, double x1, double y1) {
    return {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
  }
};

// Four-corner quadrilateral, clockwise under the image convention (y down):
// tl -> tr -> br -> bl. Signed area positive in that order.
struct Quad {
  Point tl, tr, br, bl;

  std::array<Point, 4> points() const { return {tl, tr, br, bl}; }
  static Quad from_box(const HBox& b) {
    return {{b.xmin(), b.ymin()}, {b.xmax(), b.ymin()}, {b.xmax(), b.ymax()}, {b.xmin(), b.ymax()}};
  }
};

double polygon_area(const std::vector<Point>& poly);
double quad_area(const Quad& q);
// Convex and positively oriented (collinear edges allowed).
bool quad_convex(const Quad& q);
bool point_in_quad(const Quad& q, const Point& p);

// Intersection over union of horizontal boxes; 0 when disjoint. Throws on
// degenerate (non-positive extent) boxes.
double iou_hbox(const HBox& a, const HBox& b);

// Exact polygon-clipping IOU for convex quads. Union by inclusion-exclusion.
// Intersections with area below 1e-12 count as 0. Throws on non-convex or
// self-intersecting input.
double quad_iou(const Quad& a, const Quad& b);

// Tightest axis-aligned box around the four vertices.
HBox quad_aabb(const Quad& q);

// True iff outer ∩ inner == inner, boundary inclusive.
bool contains(const HBox& outer, const HBox& inner);

// Corner-form intersection; empty when the boxes do not overlap with
// positive area.
std::optional<HBox> intersect_boxes(const HBox& a, const HBox& b);

// Clips corner form to the unit square; empty if nothing positive remains.
std::optional<HBox> clip_to_unit(const HBox& b);

}  // namespace lpdet
