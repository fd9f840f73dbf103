#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lpdet/metrics.hpp"
#include "testutil.hpp"

using namespace lpdet;
using testutil::Rng;

namespace {

struct FlatRef {
  std::size_t image, index;
  double conf;
};

// Exhaustive reference: recomputes the greedy matching from scratch for
// every confidence prefix, then interpolates the 11 points literally.
double oracle_ap(const std::vector<std::vector<ScoredBox>>& dets, const std::vector<std::vector<HBox>>& gts,
                 double thr) {
  std::vector<FlatRef> flat;
  for (std::size_t i = 0; i < dets.size(); ++i)
    for (std::size_t k = 0; k < dets[i].size(); ++k) flat.push_back({i, k, dets[i][k].conf});
  std::stable_sort(flat.begin(), flat.end(), [](const FlatRef& a, const FlatRef& b) {
    if (a.conf != b.conf) return a.conf > b.conf;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });
  std::size_t n_gt = 0;
  for (const auto& g : gts) n_gt += g.size();
  if (n_gt == 0) return 0.0;

  std::vector<std::pair<double, double>> pr;  // (recall, precision)
  for (std::size_t len = 1; len <= flat.size(); ++len) {
    std::vector<std::vector<char>> claimed(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) claimed[i].assign(gts[i].size(), 0);
    std::size_t tp = 0;
    for (std::size_t k = 0; k < len; ++k) {
      const auto& d = flat[k];
      const HBox& box = dets[d.image][d.index].box;
      double best = 0;
      int bj = -1;
      for (std::size_t j = 0; j < gts[d.image].size(); ++j) {
        double v = iou_hbox(box, gts[d.image][j]);
        if (v > best) {
          best = v;
          bj = static_cast<int>(j);
        }
      }
      if (bj >= 0 && best >= thr && !claimed[d.image][static_cast<std::size_t>(bj)]) {
        claimed[d.image][static_cast<std::size_t>(bj)] = 1;
        ++tp;
      }
    }
    pr.emplace_back(static_cast<double>(tp) / static_cast<double>(n_gt),
                    static_cast<double>(tp) / static_cast<double>(len));
  }

  double ap = 0;
  for (int r = 0; r <= 10; ++r) {
    double level = r / 10.0;
    double best = 0;
    for (const auto& [rec, prec] : pr)
      if (rec >= level) best = std::max(best, prec);
    ap += best;
  }
  return ap / 11.0;
}

// Optimal matcher: maximizes TP over all injective det->gt assignments.
int oracle_max_tp(const std::vector<ScoredQuad>& dets, const std::vector<Quad>& gts, double thr,
                  double conf_thr) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < dets.size(); ++i)
    if (dets[i].conf >= conf_thr) usable.push_back(i);
  std::vector<char> taken(gts.size(), 0);
  std::function<int(std::size_t)> go = [&](std::size_t k) -> int {
    if (k == usable.size()) return 0;
    int best = go(k + 1);  // detection unmatched
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (taken[j]) continue;
      if (quad_iou(dets[usable[k]].quad, gts[j]) >= thr) {
        taken[j] = 1;
        best = std::max(best, 1 + go(k + 1));
        taken[j] = 0;
      }
    }
    return best;
  };
  return go(0);
}

HBox rand_box(Rng& rng) {
  return {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4)};
}

}  // namespace

TEST_CASE("ap_voc07 perfect single detection") {
  std::vector<std::vector<HBox>> gts = {{HBox{0.5, 0.5, 0.2, 0.2}}};
  std::vector<std::vector<ScoredBox>> dets = {{{HBox{0.5, 0.5, 0.2, 0.2}, 0.9}}};
  CHECK(ap_voc07(dets, gts, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("ap_voc07 FP before TP halves the score") {
  std::vector<std::vector<HBox>> gts = {{HBox{0.5, 0.5, 0.2, 0.2}}};
  std::vector<std::vector<ScoredBox>> dets = {
      {{HBox{0.1, 0.1, 0.05, 0.05}, 0.9}, {HBox{0.5, 0.5, 0.2, 0.2}, 0.8}}};
  CHECK(ap_voc07(dets, gts, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("ap_voc07 degenerate cases") {
  std::vector<std::vector<HBox>> gts = {{HBox{0.5, 0.5, 0.2, 0.2}}};
  CHECK(ap_voc07({{}}, gts, 0.5) == 0.0);

  bool degenerate = false;
  CHECK(ap_voc07({{}}, {{}}, 0.5, &degenerate) == 0.0);
  CHECK(degenerate);
}

TEST_CASE("ap_voc07 duplicate detections on one GT count as FP") {
  std::vector<std::vector<HBox>> gts = {{HBox{0.5, 0.5, 0.2, 0.2}}};
  std::vector<std::vector<ScoredBox>> dets = {
      {{HBox{0.5, 0.5, 0.2, 0.2}, 0.9}, {HBox{0.5, 0.5, 0.21, 0.21}, 0.8}}};
  // second detection matches a claimed GT -> FP; recall stays 1 from k=1
  CHECK(ap_voc07(dets, gts, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("ap_voc07 equals the exhaustive reference on random instances") {
  Rng rng(404);
  for (int t = 0; t < 200; ++t) {
    int n_img = rng.uniform_int(1, 3);
    std::vector<std::vector<HBox>> gts(static_cast<std::size_t>(n_img));
    std::vector<std::vector<ScoredBox>> dets(static_cast<std::size_t>(n_img));
    for (auto& g : gts) {
      int n = rng.uniform_int(0, 3);
      for (int i = 0; i < n; ++i) g.push_back(rand_box(rng));
    }
    int total = rng.uniform_int(1, 10);
    for (int i = 0; i < total; ++i) {
      std::size_t img = static_cast<std::size_t>(rng.uniform_int(0, n_img - 1));
      HBox b = !gts[img].empty() && rng.bernoulli(0.6)
                   ? HBox{gts[img][0].cx + rng.uniform(-0.05, 0.05), gts[img][0].cy + rng.uniform(-0.05, 0.05),
                          gts[img][0].w * rng.uniform(0.8, 1.2), gts[img][0].h * rng.uniform(0.8, 1.2)}
                   : rand_box(rng);
      dets[img].push_back({b, rng.uniform(0.01, 0.99)});
    }
    for (double thr : {0.5, 0.75}) {
      CHECK(ap_voc07(dets, gts, thr) == oracle_ap(dets, gts, thr));
    }
  }
}

TEST_CASE("ap is invariant to order-preserving confidence rescaling") {
  Rng rng(405);
  std::vector<std::vector<HBox>> gts = {{rand_box(rng), rand_box(rng)}};
  std::vector<std::vector<ScoredBox>> dets(1);
  for (int i = 0; i < 6; ++i) dets[0].push_back({rand_box(rng), rng.uniform(0.1, 0.9)});
  double base = ap_voc07(dets, gts, 0.5);
  auto rescaled = dets;
  for (auto& d : rescaled[0]) d.conf = 0.1 + 0.5 * d.conf * d.conf + 0.2 * d.conf;  // monotone on (0,1)
  CHECK(ap_voc07(rescaled, gts, 0.5) == doctest::Approx(base));
}

TEST_CASE("adding a zero-IOU lowest-confidence detection never raises AP") {
  Rng rng(406);
  for (int t = 0; t < 30; ++t) {
    std::vector<std::vector<HBox>> gts = {{rand_box(rng)}};
    std::vector<std::vector<ScoredBox>> dets(1);
    int n = rng.uniform_int(1, 5);
    for (int i = 0; i < n; ++i) dets[0].push_back({rand_box(rng), rng.uniform(0.2, 0.9)});
    double base = ap_voc07(dets, gts, 0.5);
    auto more = dets;
    more[0].push_back({HBox{0.95, 0.95, 0.02, 0.02}, 0.01});  // disjoint from all GTs
    CHECK(ap_voc07(more, gts, 0.5) <= base + 1e-12);
  }
}

TEST_CASE("c_recall basics") {
  HBox gt{0.5, 0.5, 0.1, 0.05};
  HBox covering{0.5, 0.5, 0.3, 0.2};

  auto r1 = c_recall({{covering}}, {{gt}});
  REQUIRE(r1);
  CHECK(*r1 == doctest::Approx(1.0));

  auto r0 = c_recall({{}}, {{gt}});
  REQUIRE(r0);
  CHECK(*r0 == doctest::Approx(0.0));

  auto rhalf = c_recall({{covering}}, {{gt, HBox{0.9, 0.9, 0.1, 0.1}}});
  REQUIRE(rhalf);
  CHECK(*rhalf == doctest::Approx(0.5));

  CHECK_FALSE(c_recall({{covering}}, {{}}));  // M = 0 -> absent

  // boundary-inclusive: region exactly equal to the GT counts
  auto redge = c_recall({{gt}}, {{gt}});
  REQUIRE(redge);
  CHECK(*redge == doctest::Approx(1.0));
}

TEST_CASE("prf_quad arithmetic cases") {
  Quad gt = Quad::from_box(HBox{0.5, 0.5, 0.2, 0.1});
  // one TP (same quad), one FP far away, no FN
  std::vector<std::vector<ScoredQuad>> dets = {
      {{gt, 0.9}, {Quad::from_box(HBox{0.1, 0.1, 0.05, 0.05}), 0.8}}};
  Prf r = prf_quad(dets, {{gt}}, 0.5);
  CHECK(r.tp == 1);
  CHECK(r.fp == 1);
  CHECK(r.fn == 0);
  CHECK(r.precision == doctest::Approx(0.5));
  CHECK(r.recall == doctest::Approx(1.0));
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0));

  // zero detections, three GTs
  Prf z = prf_quad({{}}, {{gt, gt, gt}}, 0.5);
  CHECK(z.precision == 0.0);
  CHECK(z.recall == 0.0);
  CHECK(z.f1 == 0.0);

  // the confidence threshold filters
  std::vector<std::vector<ScoredQuad>> weak = {{{gt, 0.4}}};
  Prf w = prf_quad(weak, {{gt}}, 0.5);
  CHECK(w.tp == 0);
  CHECK(w.fn == 1);
}

TEST_CASE("prf_quad matches the exhaustive optimal matcher on small instances") {
  Rng rng(407);
  for (int t = 0; t < 60; ++t) {
    std::vector<Quad> gts;
    int ng = rng.uniform_int(1, 3);
    for (int i = 0; i < ng; ++i)
      gts.push_back(Quad::from_box(
          HBox{rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75), rng.uniform(0.15, 0.35), rng.uniform(0.1, 0.3)}));
    std::vector<ScoredQuad> dets;
    int nd = rng.uniform_int(1, 6);
    for (int i = 0; i < nd; ++i) {
      const Quad& base = gts[static_cast<std::size_t>(rng.uniform_int(0, ng - 1))];
      HBox bb = quad_aabb(base);
      HBox jit{bb.cx + rng.uniform(-0.05, 0.05), bb.cy + rng.uniform(-0.05, 0.05),
               bb.w * rng.uniform(0.7, 1.3), bb.h * rng.uniform(0.7, 1.3)};
      dets.push_back({Quad::from_box(jit), rng.uniform(0.3, 0.99)});
    }
    Prf got = prf_quad({dets}, {gts}, 0.5);
    CHECK(got.tp == oracle_max_tp(dets, gts, 0.5, 0.5));
  }
}
