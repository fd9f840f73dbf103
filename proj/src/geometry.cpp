#include "lpdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lpdet {

namespace {
constexpr double kDegenerateArea = 1e-12;

inline double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}
}  // namespace

double polygon_area(const std::vector<Point>& poly) {
  double s = 0;
  std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % n];
    s += p.x * q.y - q.x * p.y;
  }
  return s / 2;
}

double quad_area(const Quad& q) {
  auto pts = q.points();
  return polygon_area({pts.begin(), pts.end()});
}

bool quad_convex(const Quad& q) {
  auto p = q.points();
  for (int i = 0; i < 4; ++i) {
    if (cross(p[i], p[(i + 1) % 4], p[(i + 2) % 4]) < 0) return false;
  }
  return quad_area(q) > 0;
}

bool point_in_quad(const Quad& q, const Point& pt) {
  auto p = q.points();
  for (int i = 0; i < 4; ++i) {
    if (cross(p[i], p[(i + 1) % 4], pt) < 0) return false;
  }
  return true;
}

double iou_hbox(const HBox& a, const HBox& b) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument("iou_hbox: degenerate box");
  double ix = std::min(a.xmax(), b.xmax()) - std::max(a.xmin(), b.xmin());
  double iy = std::min(a.ymax(), b.ymax()) - std::max(a.ymin(), b.ymin());
  if (ix <= 0 || iy <= 0) return 0.0;
  double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

namespace {
// Sutherland-Hodgman clip of convex `subject` by the half-plane left of
// edge a->b (positive orientation keeps the polygon interior).
std::vector<Point> clip_by_edge(const std::vector<Point>& subject, const Point& a, const Point& b) {
  std::vector<Point> out;
  std::size_t n = subject.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& cur = subject[i];
    const Point& nxt = subject[(i + 1) % n];
    double dc = cross(a, b, cur);
    double dn = cross(a, b, nxt);
    if (dc >= 0) out.push_back(cur);
    if ((dc > 0 && dn < 0) || (dc < 0 && dn > 0)) {
      double t = dc / (dc - dn);
      out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
    }
  }
  return out;
}
}  // namespace

double quad_iou(const Quad& a, const Quad& b) {
  if (!quad_convex(a) || !quad_convex(b))
    throw std::invalid_argument("quad_iou: quads must be simple, convex, and positively oriented");
  auto pa = a.points();
  auto pb = b.points();
  std::vector<Point> poly(pa.begin(), pa.end());
  for (int i = 0; i < 4 && !poly.empty(); ++i) poly = clip_by_edge(poly, pb[i], pb[(i + 1) % 4]);
  double inter = poly.size() >= 3 ? polygon_area(poly) : 0.0;
  if (inter < kDegenerateArea) return 0.0;
  double uni = quad_area(a) + quad_area(b) - inter;
  return inter / uni;
}

HBox quad_aabb(const Quad& q) {
  auto p = q.points();
  double x0 = p[0].x, x1 = p[0].x, y0 = p[0].y, y1 = p[0].y;
  for (int i = 1; i < 4; ++i) {
    x0 = std::min(x0, p[i].x);
    x1 = std::max(x1, p[i].x);
    y0 = std::min(y0, p[i].y);
    y1 = std::max(y1, p[i].y);
  }
  return HBox::from_corners(x0, y0, x1, y1);
}

bool contains(const HBox& outer, const HBox& inner) {
  return inner.xmin() >= outer.xmin() && inner.ymin() >= outer.ymin() &&
         inner.xmax() <= outer.xmax() && inner.ymax() <= outer.ymax();
}

std::optional<HBox> intersect_boxes(const HBox& a, const HBox& b) {
  double x0 = std::max(a.xmin(), b.xmin());
  double y0 = std::max(a.ymin(), b.ymin());
  double x1 = std::min(a.xmax(), b.xmax());
  double y1 = std::min(a.ymax(), b.ymax());
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  return HBox::from_corners(x0, y0, x1, y1);
}

std::optional<HBox> clip_to_unit(const HBox& b) {
  return intersect_boxes(b, HBox{0.5, 0.5, 1.0, 1.0});
}

}  // namespace lpdet
