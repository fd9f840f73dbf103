#include "lpdet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "lpdet/codec.hpp"
#include "lpdet/region_chain.hpp"

namespace lpdet {

using nlohmann::json;

std::vector<std::size_t> nms(const std::vector<HBox>& boxes, const std::vector<double>& scores,
                             double iou_threshold) {
  if (boxes.size() != scores.size()) throw std::invalid_argument("nms: size mismatch");
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::vector<std::size_t> kept;
  std::vector<char> dead(boxes.size(), 0);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    std::size_t i = order[oi];
    if (dead[i]) continue;
    kept.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      std::size_t j = order[oj];
      if (!dead[j] && iou_hbox(boxes[i], boxes[j]) > iou_threshold) dead[j] = 1;
    }
  }
  return kept;
}

// ---------------------------------------------------------------------------
// detection records

namespace {
json box_json(const HBox& b) { return {b.cx, b.cy, b.w, b.h}; }
HBox box_from(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}
}  // namespace

void write_detections(const std::string& path, const std::vector<Detection>& dets) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_detections: cannot open " + path);
  for (const auto& d : dets) {
    json j;
    j["v"] = 1;
    j["image"] = d.image_id;
    j["stage"] = d.stage == Detection::Stage::Coarse ? "coarse" : "refined";
    j["vehicle"] = box_json(d.vehicle);
    j["vehicle_conf"] = d.vehicle_conf;
    j["has_lp"] = d.has_lp;
    if (d.plate_valid) {
      j["plate"] = box_json(d.plate_box);
      j["plate_conf"] = d.plate_conf;
      auto p = d.plate_quad.points();
      j["quad"] = {p[0].x, p[0].y, p[1].x, p[1].y, p[2].x, p[2].y, p[3].x, p[3].y};
    }
    f << j.dump() << "\n";
  }
}

std::vector<Detection> read_detections(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_detections: cannot open " + path);
  std::vector<Detection> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Detection d;
    d.image_id = j.at("image").get<std::string>();
    d.stage = j.at("stage").get<std::string>() == "refined" ? Detection::Stage::Refined : Detection::Stage::Coarse;
    d.vehicle = box_from(j.at("vehicle"));
    d.vehicle_conf = j.at("vehicle_conf").get<double>();
    d.has_lp = j.at("has_lp").get<double>();
    if (j.contains("plate")) {
      d.plate_valid = true;
      d.plate_box = box_from(j.at("plate"));
      d.plate_conf = j.at("plate_conf").get<double>();
      auto q = j.at("quad");
      d.plate_quad = {{q.at(0).get<double>(), q.at(1).get<double>()},
                      {q.at(2).get<double>(), q.at(3).get<double>()},
                      {q.at(4).get<double>(), q.at(5).get<double>()},
                      {q.at(6).get<double>(), q.at(7).get<double>()}};
    }
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// optimizer

Adam::Adam(double lr, double beta1, double beta2, double weight_decay, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay), eps_(eps) {}

void Adam::step(NamedParams& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      m_[p].assign(params[p].second.numel(), 0.0);
      v_[p].assign(params[p].second.numel(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::logic_error("Adam: parameter list changed");
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, t_);
  double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = params[p].second;
    for (std::size_t i = 0; i < t.numel(); ++i) {
      double w = t.value(i);
      double g = t.grad_value(i) + weight_decay_ * w;
      m_[p][i] = beta1_ * m_[p][i] + (1 - beta1_) * g;
      v_[p][i] = beta2_ * v_[p][i] + (1 - beta2_) * g * g;
      double mhat = m_[p][i] / bc1;
      double vhat = v_[p][i] / bc2;
      t.set_value(i, w - lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

// ---------------------------------------------------------------------------
// region chain (decode -> expand -> clip), differentiable

std::optional<RegionChain> RegionChain::build(const HBox& prior, const std::array<double, 4>& loc,
                                              const std::array<double, 2>& off,
                                              const std::array<double, 2>& lpwh, double ratio) {
  RegionChain c;
  c.prior_ = prior;
  c.ratio_ = ratio;
  double vcx = prior.cx + loc[0] * prior.w;
  double vcy = prior.cy + loc[1] * prior.h;
  c.vw_ = prior.w * std::exp(loc[2]);
  c.vh_ = prior.h * std::exp(loc[3]);
  double hcx = vcx + off[0] * prior.w;
  double hcy = vcy + off[1] * prior.h;
  c.hw_ = prior.w * std::exp(lpwh[0]);
  c.hh_ = prior.h * std::exp(lpwh[1]);

  double ex0, ey0, ex1, ey1;
  if (std::isinf(ratio)) {
    ex0 = vcx - c.vw_ / 2;
    ex1 = vcx + c.vw_ / 2;
    ey0 = vcy - c.vh_ / 2;
    ey1 = vcy + c.vh_ / 2;
  } else {
    ex0 = hcx - ratio * c.hw_ / 2;
    ex1 = hcx + ratio * c.hw_ / 2;
    ey0 = hcy - ratio * c.hh_ / 2;
    ey1 = hcy + ratio * c.hh_ / 2;
  }
  double vx0 = vcx - c.vw_ / 2, vx1 = vcx + c.vw_ / 2;
  double vy0 = vcy - c.vh_ / 2, vy1 = vcy + c.vh_ / 2;

  auto pick_max = [](double a, double b, double cst, int* pick) {
    // max of expanded bound, vehicle bound, unit constant
    if (a >= b && a >= cst) {
      *pick = 0;
      return a;
    }
    if (b >= cst) {
      *pick = 1;
      return b;
    }
    *pick = 2;
    return cst;
  };
  auto pick_min = [](double a, double b, double cst, int* pick) {
    if (a <= b && a <= cst) {
      *pick = 0;
      return a;
    }
    if (b <= cst) {
      *pick = 1;
      return b;
    }
    *pick = 2;
    return cst;
  };

  double x0 = pick_max(ex0, vx0, 0.0, &c.pick_[0]);
  double y0 = pick_max(ey0, vy0, 0.0, &c.pick_[1]);
  double x1 = pick_min(ex1, vx1, 1.0, &c.pick_[2]);
  double y1 = pick_min(ey1, vy1, 1.0, &c.pick_[3]);
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  c.region_ = HBox::from_corners(x0, y0, x1, y1);
  return c;
}

void RegionChain::backprop(const std::array<double, 4>& dcoord, std::array<double, 4>& dloc,
                           std::array<double, 2>& doff, std::array<double, 2>& dlpwh) const {
  // region params are (x0, y0, w, h) with w = x1-x0: translate to corners
  double dx0 = dcoord[0] - dcoord[2];
  double dx1 = dcoord[2];
  double dy0 = dcoord[1] - dcoord[3];
  double dy1 = dcoord[3];

  // accumulate into the decoded quantities
  double dvcx = 0, dvcy = 0, dvw = 0, dvh = 0, dhcx = 0, dhcy = 0, dhw = 0, dhh = 0;
  bool whole_vehicle = std::isinf(ratio_);

  auto route_x = [&](double g, int pick, double sign) {
    if (pick == 2) return;
    if (pick == 1 || whole_vehicle) {
      dvcx += g;
      dvw += sign * 0.5 * g;
    } else {
      dhcx += g;
      dhw += sign * 0.5 * ratio_ * g;
    }
  };
  auto route_y = [&](double g, int pick, double sign) {
    if (pick == 2) return;
    if (pick == 1 || whole_vehicle) {
      dvcy += g;
      dvh += sign * 0.5 * g;
    } else {
      dhcy += g;
      dhh += sign * 0.5 * ratio_ * g;
    }
  };
  route_x(dx0, pick_[0], -1.0);
  route_y(dy0, pick_[1], -1.0);
  route_x(dx1, pick_[2], +1.0);
  route_y(dy1, pick_[3], +1.0);

  // hint center rides on the vehicle center
  dvcx += dhcx;
  dvcy += dhcy;

  dloc[0] += dvcx * prior_.w;
  dloc[1] += dvcy * prior_.h;
  dloc[2] += dvw * vw_;  // d(vw)/d(t_w) = vw
  dloc[3] += dvh * vh_;
  doff[0] += dhcx * prior_.w;
  doff[1] += dhcy * prior_.h;
  dlpwh[0] += dhw * hw_;
  dlpwh[1] += dhh * hh_;
}

// ---------------------------------------------------------------------------
// augmentation

AugmentedSample augment_sample(const std::vector<double>& image01, int size, const SceneLabel& label,
                               Rng& rng, bool photometric, bool crop) {
  AugmentedSample out;
  out.image01 = image01;
  out.label = label;
  const std::size_t hw = static_cast<std::size_t>(size) * size;
  if (out.image01.size() != 3 * hw) throw std::invalid_argument("augment_sample: buffer/size mismatch");

  if (crop) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      double s = rng.uniform(0.7, 1.0);
      double x0 = rng.uniform(0.0, 1.0 - s);
      double y0 = rng.uniform(0.0, 1.0 - s);
      HBox window = HBox::from_corners(x0, y0, x0 + s, y0 + s);
      bool ok = true;
      for (const auto& v : label.vehicles) {
        if (!contains(window, v.box)) {
          ok = false;
          break;
        }
        if (v.has_lp && !contains(window, v.plate_box)) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;

      // bilinear resample of the window back to full resolution
      std::vector<double> cropped(3 * hw);
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
          for (int x = 0; x < size; ++x) {
            double sx = (x0 + (x + 0.5) / size * s) * size - 0.5;
            double sy = (y0 + (y + 0.5) / size * s) * size - 0.5;
            int ix = static_cast<int>(std::floor(sx)), iy = static_cast<int>(std::floor(sy));
            double fx = sx - ix, fy = sy - iy;
            auto at = [&](int yy, int xx) {
              yy = std::clamp(yy, 0, size - 1);
              xx = std::clamp(xx, 0, size - 1);
              return image01[(static_cast<std::size_t>(c) * size + yy) * size + xx];
            };
            cropped[(static_cast<std::size_t>(c) * size + y) * size + x] =
                (1 - fy) * ((1 - fx) * at(iy, ix) + fx * at(iy, ix + 1)) +
                fy * ((1 - fx) * at(iy + 1, ix) + fx * at(iy + 1, ix + 1));
          }
      out.image01 = std::move(cropped);
      for (auto& v : out.label.vehicles) {
        v.box = {(v.box.cx - x0) / s, (v.box.cy - y0) / s, v.box.w / s, v.box.h / s};
        if (v.has_lp) {
          auto map = [&](Point p) { return Point{(p.x - x0) / s, (p.y - y0) / s}; };
          v.plate = {map(v.plate.tl), map(v.plate.tr), map(v.plate.br), map(v.plate.bl)};
          v.plate_box = quad_aabb(v.plate);
        }
      }
      break;
    }
  }

  if (photometric) {
    double delta = rng.uniform(-0.1, 0.1);
    double gain = rng.uniform(0.85, 1.15);
    for (auto& v : out.image01) v = std::clamp((v - 0.5) * gain + 0.5 + delta, 0.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// pipeline

Pipeline::Pipeline(const RunConfig& cfg)
    : cfg_(cfg), adam_(cfg.lr, cfg.beta1, cfg.beta2, cfg.weight_decay) {
  cfg_.validate();
  engine::set_dtype(cfg_.dtype == "f64" ? DType::F64 : DType::F32);
  Rng master(cfg_.seed);
  alpd_ = std::make_unique<TinyAlpd>(cfg_.image_size, cfg_.alpd_layer_specs(), master.fork(1));
  if (cfg_.e2e)
    molpr_ = std::make_unique<TinyMolpr>(cfg_.patch_size, alpd_->delta_channels(), cfg_.molpr_layer_specs(),
                                         master.fork(2));
}

NamedParams Pipeline::named_params() {
  NamedParams out;
  alpd_->append_params(out);
  if (molpr_) molpr_->append_params(out);
  return out;
}

void Pipeline::save(const std::string& path) {
  NamedParams p = named_params();
  save_checkpoint(path, p);
}

void Pipeline::load(const std::string& path) {
  NamedParams p = named_params();
  load_checkpoint(path, p);
}

std::vector<Pipeline::VehicleCandidate> Pipeline::decode_vehicles(const AlpdHeads& heads, int image,
                                                                  bool clip) const {
  const std::size_t p = alpd_->priors().size();
  const std::size_t base = static_cast<std::size_t>(image) * p;
  std::vector<HBox> boxes;
  std::vector<double> scores;
  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < p; ++j) {
    std::size_t r = base + j;
    double z0 = heads.conf.value(2 * r), z1 = heads.conf.value(2 * r + 1);
    double m = std::max(z0, z1);
    double pv = std::exp(z1 - m) / (std::exp(z0 - m) + std::exp(z1 - m));
    if (pv < cfg_.vehicle_conf_threshold) continue;
    VehicleTarget t{heads.loc.value(4 * r), heads.loc.value(4 * r + 1), heads.loc.value(4 * r + 2),
                    heads.loc.value(4 * r + 3)};
    HBox box = decode_vehicle(t, alpd_->priors().boxes[j]);
    if (clip) {
      auto clipped = clip_to_unit(box);
      if (!clipped) continue;
      box = *clipped;
    }
    boxes.push_back(box);
    scores.push_back(pv);
    rows.push_back(r);
  }
  std::vector<VehicleCandidate> out;
  for (std::size_t k : nms(boxes, scores, cfg_.nms_threshold)) {
    VehicleCandidate c;
    c.box = boxes[k];
    c.conf = scores[k];
    c.prior_row = rows[k];
    c.has_lp_prob = 1.0 / (1.0 + std::exp(-heads.plate.value(5 * rows[k])));
    out.push_back(c);
  }
  return out;
}

TrainStepStats Pipeline::train_step(const Tensor& input, const std::vector<SceneLabel>& labels, int iter) {
  if (input.dim(0) != static_cast<int>(labels.size()))
    throw std::invalid_argument("train_step: batch/label size mismatch");

  AlpdForward fwd = alpd_->forward(input);

  std::vector<MatchResult> matches;
  matches.reserve(labels.size());
  for (const auto& lab : labels) {
    std::vector<HBox> gts;
    for (const auto& v : lab.vehicles) gts.push_back(v.box);
    matches.push_back(match_priors(alpd_->priors(), gts, cfg_.match_threshold));
  }
  AlpdLossBreakdown l1 = alpd_loss(fwd.heads, alpd_->priors(), matches, labels, cfg_.neg_pos_ratio);

  TrainStepStats stats;
  stats.l1_conf = l1.conf;
  stats.l1_loc = l1.loc;
  stats.l1_has_lp = l1.has_lp;
  stats.l1_off = l1.off;
  stats.l1_lp_wh = l1.lp_wh;
  stats.l1_pos = l1.n_pos;
  stats.l1_total = l1.total_value;

  std::optional<MolprLossBreakdown> l2;
  if (molpr_) {
    bool teacher = cfg_.teacher_forcing_fraction > 0 &&
                   iter < static_cast<int>(cfg_.teacher_forcing_fraction * cfg_.iters);
    stats.teacher_forced = teacher;

    std::vector<LocalRegion> regions;
    std::vector<const VehicleLabel*> sources;  // GT plate source per region, may be null
    std::vector<RegionCoordHook> hooks;
    bool with_coord_grad = cfg_.warp_coord_grad && !teacher;

    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (teacher) {
        for (std::size_t vi = 0; vi < labels[i].vehicles.size(); ++vi) {
          const VehicleLabel& v = labels[i].vehicles[vi];
          if (!v.has_lp) continue;
          auto r = expand_region(v.plate_box, v.box, cfg_.expansion_ratio, static_cast<int>(i),
                                 static_cast<int>(vi));
          if (!r) continue;
          regions.push_back(*r);
          sources.push_back(&v);
          if (with_coord_grad) hooks.push_back(nullptr);
        }
        continue;
      }

      auto candidates = decode_vehicles(fwd.heads, static_cast<int>(i), /*clip=*/false);
      int taken = 0;
      for (const auto& c : candidates) {
        if (taken >= cfg_.max_regions_per_image) break;
        if (c.has_lp_prob < cfg_.has_lp_threshold) continue;
        std::size_t r = c.prior_row;
        std::array<double, 4> loc{fwd.heads.loc.value(4 * r), fwd.heads.loc.value(4 * r + 1),
                                  fwd.heads.loc.value(4 * r + 2), fwd.heads.loc.value(4 * r + 3)};
        std::array<double, 2> off{fwd.heads.plate.value(5 * r + 1), fwd.heads.plate.value(5 * r + 2)};
        std::array<double, 2> lpwh{fwd.heads.plate.value(5 * r + 3), fwd.heads.plate.value(5 * r + 4)};
        auto chain = RegionChain::build(alpd_->priors().boxes[r % alpd_->priors().size()], loc, off, lpwh,
                                        cfg_.expansion_ratio);
        if (!chain) continue;
        LocalRegion region;
        region.region = chain->region();
        region.image_index = static_cast<int>(i);
        region.vehicle_index = taken;
        region.plate_hint = decode_plate_hint({off[0], off[1], lpwh[0], lpwh[1]},
                                              alpd_->priors().boxes[r % alpd_->priors().size()],
                                              {c.box.cx, c.box.cy});
        regions.push_back(region);
        ++taken;

        // best-overlap GT supplies the patch labels
        const VehicleLabel* src = nullptr;
        double best = 0.5;
        for (const auto& v : labels[i].vehicles) {
          double iou = iou_hbox(v.box, c.box);
          if (iou >= best) {
            best = iou;
            src = &v;
          }
        }
        sources.push_back(src && src->has_lp ? src : nullptr);

        if (with_coord_grad) {
          Tensor loc_t = fwd.heads.loc, plate_t = fwd.heads.plate;
          RegionChain cc = *chain;
          hooks.push_back([loc_t, plate_t, cc, r](const std::array<double, 4>& dcoord) mutable {
            std::array<double, 4> dloc{0, 0, 0, 0};
            std::array<double, 2> doff{0, 0}, dlpwh{0, 0};
            cc.backprop(dcoord, dloc, doff, dlpwh);
            for (int k = 0; k < 4; ++k) loc_t.grad_add(4 * r + static_cast<std::size_t>(k), dloc[static_cast<std::size_t>(k)]);
            plate_t.grad_add(5 * r + 1, doff[0]);
            plate_t.grad_add(5 * r + 2, doff[1]);
            plate_t.grad_add(5 * r + 3, dlpwh[0]);
            plate_t.grad_add(5 * r + 4, dlpwh[1]);
          });
        }
      }
    }

    if (!regions.empty()) {
      std::vector<Tensor> coord_parents;
      if (with_coord_grad && !hooks.empty()) coord_parents = {fwd.heads.loc, fwd.heads.plate};
      PatchBatch batch = aggregate(regions, fwd.delta_features, cfg_.patch_size,
                                   with_coord_grad ? hooks : std::vector<RegionCoordHook>{}, coord_parents);
      MolprForward mfwd = molpr_->forward(batch);

      std::vector<PatchLabel> plabels(regions.size());
      std::vector<MatchResult> pmatches;
      for (std::size_t ri = 0; ri < regions.size(); ++ri) {
        if (sources[ri]) {
          Quad q = batch.transforms[ri].quad_to_patch(sources[ri]->plate);
          plabels[ri].plate_quads = {q};
          plabels[ri].plate_boxes = {quad_aabb(q)};
        }
        pmatches.push_back(match_priors(molpr_->priors(), plabels[ri].plate_boxes, cfg_.match_threshold));
      }
      l2 = molpr_loss(mfwd.heads, molpr_->priors(), pmatches, plabels, cfg_.neg_pos_ratio);
      stats.l2_conf = l2->conf;
      stats.l2_loc = l2->loc;
      stats.l2_corner = l2->corner;
      stats.l2_pos = l2->n_pos;
      stats.l2_total = l2->total_value;
      stats.regions = static_cast<int>(regions.size());
    }
  }

  Tensor total = total_loss(l1, l2, cfg_.alpha);
  total.check_finite("total_loss");
  stats.total = total.value(0);

  backward(total);

  double lr = cfg_.lr;
  for (int m : cfg_.lr_milestones)
    if (iter >= m) lr *= cfg_.lr_decay;
  adam_.set_lr(lr);
  stats.lr = lr;

  NamedParams params = named_params();
  adam_.step(params);
  for (auto& [name, t] : params) t.zero_grad();
  return stats;
}

std::vector<Detection> Pipeline::infer(const Tensor& input, const std::string& image_id) const {
  if (input.dim(0) != 1) throw std::invalid_argument("infer: one image at a time");
  AlpdForward fwd = alpd_->forward(input);
  auto candidates = decode_vehicles(fwd.heads, 0, /*clip=*/true);

  std::vector<Detection> out;
  for (const auto& c : candidates) {
    Detection d;
    d.image_id = image_id;
    d.vehicle = c.box;
    d.vehicle_conf = c.conf;
    d.has_lp = c.has_lp_prob;
    d.stage = Detection::Stage::Coarse;
    bool pass_gate = !cfg_.use_has_lp_gate || c.has_lp_prob >= cfg_.has_lp_threshold;
    if (pass_gate) {
      std::size_t r = c.prior_row;
      PlateHintTarget t{fwd.heads.plate.value(5 * r + 1), fwd.heads.plate.value(5 * r + 2),
                        fwd.heads.plate.value(5 * r + 3), fwd.heads.plate.value(5 * r + 4)};
      HBox hint = decode_plate_hint(t, alpd_->priors().boxes[r % alpd_->priors().size()],
                                    {c.box.cx, c.box.cy});
      if (auto clipped = clip_to_unit(hint)) {
        d.plate_valid = true;
        d.plate_box = *clipped;
        d.plate_conf = c.conf;  // coarse hints score by vehicle confidence
        d.plate_quad = Quad::from_box(*clipped);
      }
    }
    out.push_back(d);
  }

  if (!molpr_) return out;

  // refinement: expand gated hints, warp, detect plates in patch frame
  std::vector<LocalRegion> regions;
  std::vector<std::size_t> region_src;  // index into `out`
  int taken = 0;
  for (std::size_t di = 0; di < out.size(); ++di) {
    const Detection& d = out[di];
    if (!d.plate_valid) continue;
    if (taken >= cfg_.max_regions_per_image) break;
    auto r = expand_region(d.plate_box, d.vehicle, cfg_.expansion_ratio, 0, taken);
    if (!r) continue;
    regions.push_back(*r);
    region_src.push_back(di);
    ++taken;
  }
  if (regions.empty()) return out;

  PatchBatch batch = aggregate(regions, fwd.delta_features, cfg_.patch_size);
  MolprForward mfwd = molpr_->forward(batch);
  const std::size_t pp = molpr_->priors().size();

  std::vector<HBox> plate_boxes;
  std::vector<double> plate_scores;
  std::vector<Quad> plate_quads;
  std::vector<std::size_t> plate_src;
  for (std::size_t ri = 0; ri < regions.size(); ++ri) {
    for (std::size_t j = 0; j < pp; ++j) {
      std::size_t r = ri * pp + j;
      double z0 = mfwd.heads.conf.value(2 * r), z1 = mfwd.heads.conf.value(2 * r + 1);
      double m = std::max(z0, z1);
      double pl = std::exp(z1 - m) / (std::exp(z0 - m) + std::exp(z1 - m));
      if (pl < cfg_.plate_conf_threshold) continue;
      VehicleTarget t{mfwd.heads.loc.value(4 * r), mfwd.heads.loc.value(4 * r + 1),
                      mfwd.heads.loc.value(4 * r + 2), mfwd.heads.loc.value(4 * r + 3)};
      HBox pbox_patch = decode_vehicle(t, molpr_->priors().boxes[j]);
      CornerTarget ct;
      for (int k = 0; k < 8; ++k) ct.v[static_cast<std::size_t>(k)] = mfwd.heads.corner.value(8 * r + static_cast<std::size_t>(k));
      Quad quad_patch = decode_corners(ct, molpr_->priors().boxes[j]);

      HBox pbox = batch.transforms[ri].box_to_image(pbox_patch);
      auto clipped = clip_to_unit(pbox);
      if (!clipped) continue;
      plate_boxes.push_back(*clipped);
      plate_scores.push_back(pl);
      plate_quads.push_back(batch.transforms[ri].quad_to_image(quad_patch));
      plate_src.push_back(region_src[ri]);
    }
  }

  for (std::size_t k : nms(plate_boxes, plate_scores, cfg_.nms_threshold)) {
    Detection d = out[plate_src[k]];
    d.stage = Detection::Stage::Refined;
    d.plate_valid = true;
    d.plate_box = plate_boxes[k];
    d.plate_conf = plate_scores[k];
    d.plate_quad = plate_quads[k];
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<LocalRegion> Pipeline::regions_for_detections(const std::vector<Detection>& vehicle_dets,
                                                          double ratio) const {
  std::vector<LocalRegion> regions;
  int idx = 0;
  for (const auto& d : vehicle_dets) {
    if (!d.plate_valid || d.stage != Detection::Stage::Coarse) continue;
    auto r = expand_region(d.plate_box, d.vehicle, ratio, 0, idx++);
    if (r) regions.push_back(*r);
  }
  return regions;
}

}  // namespace lpdet
