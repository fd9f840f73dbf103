#include "lpdet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "lpdet/dataset.hpp"
#include "lpdet/rng.hpp"

namespace lpdet {

namespace {

struct Canvas {
  int s;
  std::vector<double> px;  // CHW, [0,1]

  explicit Canvas(int size) : s(size), px(3 * static_cast<std::size_t>(size) * size, 0.0) {}

  double& at(int c, int y, int x) { return px[(static_cast<std::size_t>(c) * s + y) * s + x]; }

  void put(int y, int x, const double rgb[3]) {
    for (int c = 0; c < 3; ++c) at(c, y, x) = std::clamp(rgb[c], 0.0, 1.0);
  }

  // normalized corner-form rect fill
  void fill_rect(double x0, double y0, double x1, double y1, const double rgb[3]) {
    int px0 = std::max(0, static_cast<int>(std::floor(x0 * s)));
    int py0 = std::max(0, static_cast<int>(std::floor(y0 * s)));
    int px1 = std::min(s - 1, static_cast<int>(std::ceil(x1 * s)));
    int py1 = std::min(s - 1, static_cast<int>(std::ceil(y1 * s)));
    for (int y = py0; y <= py1; ++y)
      for (int x = px0; x <= px1; ++x) {
        double cx = (x + 0.5) / s, cy = (y + 0.5) / s;
        if (cx >= x0 && cx <= x1 && cy >= y0 && cy <= y1) put(y, x, rgb);
      }
  }
};

struct PlacedVehicle {
  HBox box;
  bool large = false;
};

bool try_place(Rng& rng, const SynthParams& p, std::vector<PlacedVehicle>& placed) {
  for (int attempt = 0; attempt < 60; ++attempt) {
    bool large = rng.bernoulli(p.large_vehicle_prob);
    double w = large ? rng.uniform(0.55, 0.8) : rng.uniform(p.vehicle_min_w, p.vehicle_max_w);
    double h = std::min(0.88, w * rng.uniform(0.68, 1.1));
    double cx = rng.uniform(w / 2 + 0.02, 1 - w / 2 - 0.02);
    double cy = rng.uniform(h / 2 + 0.02, 1 - h / 2 - 0.02);
    HBox box{cx, cy, w, h};
    bool clash = false;
    for (const auto& v : placed) {
      // strict disjointness (with margin) keeps plate visibility exact
      HBox grown{v.box.cx, v.box.cy, v.box.w + 0.02, v.box.h + 0.02};
      if (intersect_boxes(grown, box)) {
        clash = true;
        break;
      }
    }
    if (!clash) {
      placed.push_back({box, large});
      return true;
    }
  }
  return false;
}

// Projectively jittered plate rectangle; convex and inside the vehicle by
// rejection, falling back to the axis-aligned rectangle.
Quad sample_plate_quad(Rng& rng, const SynthParams& p, const HBox& plate, const HBox& vehicle) {
  for (int attempt = 0; attempt < 25; ++attempt) {
    Quad q = Quad::from_box(plate);
    for (Point* pt : {&q.tl, &q.tr, &q.br, &q.bl}) {
      pt->x += rng.uniform(-p.tilt, p.tilt) * plate.w;
      pt->y += rng.uniform(-p.tilt, p.tilt) * plate.h;
    }
    if (!quad_convex(q)) continue;
    HBox bb = quad_aabb(q);
    if (contains(vehicle, bb) && bb.xmin() >= 0 && bb.ymin() >= 0 && bb.xmax() <= 1 && bb.ymax() <= 1) return q;
  }
  return Quad::from_box(plate);
}

void render_plate(Canvas& img, Rng& rng, const Quad& q) {
  int n_stripes = std::clamp(static_cast<int>(quad_aabb(q).w * img.s / 2.0), 3, 9);
  double dark = rng.uniform(0.0, 0.08), bright = rng.uniform(0.9, 1.0);
  double ex = q.tr.x - q.tl.x, ey = q.tr.y - q.tl.y;
  double elen2 = ex * ex + ey * ey;
  HBox bb = quad_aabb(q);
  int px0 = std::max(0, static_cast<int>(std::floor(bb.xmin() * img.s)));
  int py0 = std::max(0, static_cast<int>(std::floor(bb.ymin() * img.s)));
  int px1 = std::min(img.s - 1, static_cast<int>(std::ceil(bb.xmax() * img.s)));
  int py1 = std::min(img.s - 1, static_cast<int>(std::ceil(bb.ymax() * img.s)));
  for (int y = py0; y <= py1; ++y)
    for (int x = px0; x <= px1; ++x) {
      Point c{(x + 0.5) / img.s, (y + 0.5) / img.s};
      if (!point_in_quad(q, c)) continue;
      double u = ((c.x - q.tl.x) * ex + (c.y - q.tl.y) * ey) / elen2;
      double phase = u * n_stripes - std::floor(u * n_stripes);
      double v = phase < 0.5 ? dark : bright;
      double rgb[3] = {v, v, v};
      img.put(y, x, rgb);
    }
}

}  // namespace

Scene generate_scene(std::uint64_t seed, const SynthParams& p) {
  if (p.image_size < 16) throw std::invalid_argument("generate_scene: image_size too small");
  if (p.plate_frac_max >= 1.0 || p.plate_frac_min <= 0)
    throw std::invalid_argument("generate_scene: plate cannot exceed the vehicle");
  if (p.min_vehicles < 1 || p.max_vehicles < p.min_vehicles)
    throw std::invalid_argument("generate_scene: bad vehicle count range");

  Rng rng(seed);
  Canvas img(p.image_size);

  // textured background: vertical gradient + per-pixel noise + soft clutter
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.3, 0.6);
    c1[c] = rng.uniform(0.3, 0.6);
  }
  for (int y = 0; y < img.s; ++y)
    for (int x = 0; x < img.s; ++x) {
      double t = static_cast<double>(y) / img.s;
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = std::clamp(c0[c] + (c1[c] - c0[c]) * t + rng.uniform(-0.05, 0.05), 0.0, 1.0);
    }
  int clutter = rng.uniform_int(2, 5);
  for (int i = 0; i < clutter; ++i) {
    double w = rng.uniform(0.05, 0.25), h = rng.uniform(0.05, 0.25);
    double x0 = rng.uniform(0, 1 - w), y0 = rng.uniform(0, 1 - h);
    double rgb[3];
    for (int c = 0; c < 3; ++c) rgb[c] = std::clamp(c0[c] + rng.uniform(-0.12, 0.12), 0.0, 1.0);
    img.fill_rect(x0, y0, x0 + w, y0 + h, rgb);
  }

  // vehicles
  std::vector<PlacedVehicle> placed;
  int want = rng.uniform_int(p.min_vehicles, p.max_vehicles);
  for (int i = 0; i < want; ++i)
    if (!try_place(rng, p, placed)) break;

  SceneLabel label;
  label.seed = seed;
  for (const auto& pv : placed) {
    const HBox& vb = pv.box;
    double body[3], border[3];
    for (int c = 0; c < 3; ++c) {
      body[c] = rng.uniform(0.15, 0.85);
      border[c] = body[c] > 0.5 ? body[c] - 0.35 : body[c] + 0.35;
    }
    img.fill_rect(vb.xmin(), vb.ymin(), vb.xmax(), vb.ymax(), border);
    double inset = 2.0 / img.s;
    img.fill_rect(vb.xmin() + inset, vb.ymin() + inset, vb.xmax() - inset, vb.ymax() - inset, body);

    VehicleLabel vl;
    vl.box = vb;
    vl.has_lp = false;

    if (!rng.bernoulli(p.no_plate_prob)) {
      double frac = pv.large ? rng.uniform(0.06, 0.095) : rng.uniform(p.plate_frac_min, p.plate_frac_max);
      double pw = frac * vb.w;
      double ph = pw / rng.uniform(p.plate_aspect_min, p.plate_aspect_max);
      double pcx = vb.cx + rng.uniform(-0.12, 0.12) * vb.w;
      double pcy = vb.cy + rng.uniform(0.12, 0.3) * vb.h;
      HBox pb{pcx, pcy, pw, ph};
      Quad quad = sample_plate_quad(rng, p, pb, vb);
      render_plate(img, rng, quad);

      bool occluded = rng.bernoulli(p.occlusion_prob);
      if (occluded) {
        HBox qb = quad_aabb(quad);
        double cover = rng.uniform(0.35, 0.7);
        double ox0 = rng.bernoulli(0.5) ? qb.xmin() : qb.xmax() - cover * qb.w;
        double g = rng.uniform(0.25, 0.75);
        double rgb[3] = {g, g, g};
        double pad = 1.5 / img.s;
        img.fill_rect(ox0 - pad, qb.ymin() - pad, ox0 + cover * qb.w + pad, qb.ymax() + pad, rgb);
      }

      double area_px = quad_aabb(quad).area() * img.s * img.s;
      if (!occluded && area_px >= p.min_plate_area_px) {
        vl.has_lp = true;
        vl.plate = quad;
        vl.plate_box = quad_aabb(quad);
      }
    }
    label.vehicles.push_back(vl);
  }

  Scene out;
  out.label = std::move(label);
  out.image = Tensor::from({1, 3, img.s, img.s}, img.px);
  return out;
}

void generate_split(std::uint64_t seed, int count, const SynthParams& p, const std::string& out_dir) {
  if (count < 10) throw std::invalid_argument("generate_split: count must be at least 10");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "images");

  std::vector<LabeledImage> entries;
  entries.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Scene scene = generate_scene(derive_seed(seed, static_cast<std::uint64_t>(i)), p);
    LabeledImage e;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06d", i);
    e.id = buf;
    e.test = (i % 10) == 9;
    e.label = std::move(scene.label);
    write_ppm((fs::path(out_dir) / "images" / (e.id + ".ppm")).string(), scene.image);
    entries.push_back(std::move(e));
  }
  write_labels((fs::path(out_dir) / "labels.jsonl").string(), entries);
}

}  // namespace lpdet
