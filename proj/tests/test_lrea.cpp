#include <doctest.h>

#include <cmath>

#include "lpdet/lrea.hpp"
#include "lpdet/ops.hpp"
#include "testutil.hpp"

using namespace lpdet;
using testutil::gradcheck;
using testutil::random_tensor;
using testutil::Rng;

TEST_CASE("expand_region arithmetic and clipping") {
  HBox vehicle{0.5, 0.5, 0.9, 0.9};
  HBox hint{0.5, 0.5, 0.1, 0.05};

  SUBCASE("ratio 1 returns the clipped hint") {
    auto r = expand_region(hint, vehicle, 1.0);
    REQUIRE(r);
    CHECK(r->region.cx == doctest::Approx(0.5));
    CHECK(r->region.w == doctest::Approx(0.1));
    CHECK(r->region.h == doctest::Approx(0.05));
  }

  SUBCASE("ratio 3 scales about the hint center") {
    auto r = expand_region(hint, vehicle, 3.0);
    REQUIRE(r);
    CHECK(r->region.cx == doctest::Approx(0.5));
    CHECK(r->region.cy == doctest::Approx(0.5));
    CHECK(r->region.w == doctest::Approx(0.3));
    CHECK(r->region.h == doctest::Approx(0.15));
  }

  SUBCASE("expansion clamps to the vehicle boundary") {
    HBox near_edge{0.12, 0.5, 0.1, 0.05};
    HBox veh{0.3, 0.5, 0.4, 0.8};  // xmin 0.1
    auto r = expand_region(near_edge, veh, 3.0);
    REQUIRE(r);
    CHECK(r->region.xmin() == doctest::Approx(veh.xmin()));
    CHECK(r->region.xmax() == doctest::Approx(0.12 + 0.15));
  }

  SUBCASE("infinite ratio selects the whole vehicle") {
    auto r = expand_region(hint, vehicle, kWholeVehicleRatio);
    REQUIRE(r);
    CHECK(r->region.w == doctest::Approx(vehicle.w));
  }

  SUBCASE("hint entirely outside the vehicle is dropped") {
    HBox outside{0.95, 0.95, 0.04, 0.04};
    HBox veh{0.3, 0.3, 0.3, 0.3};
    CHECK_FALSE(expand_region(outside, veh, 2.0));
  }

  CHECK_THROWS(expand_region(hint, vehicle, 0.5));
}

TEST_CASE("region is always inside vehicle and unit square") {
  Rng rng(71);
  for (int t = 0; t < 300; ++t) {
    HBox veh{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.7), rng.uniform(0.2, 0.7)};
    HBox hint{veh.cx + rng.uniform(-0.6, 0.6) * veh.w, veh.cy + rng.uniform(-0.6, 0.6) * veh.h,
              rng.uniform(0.02, 0.2), rng.uniform(0.02, 0.2)};
    double ratio = rng.bernoulli(0.1) ? kWholeVehicleRatio : rng.uniform(1.0, 6.0);
    auto r = expand_region(hint, veh, ratio);
    if (!r) continue;
    CHECK(r->region.area() > 0);
    CHECK(r->region.xmin() >= std::max(0.0, veh.xmin()) - 1e-12);
    CHECK(r->region.ymin() >= std::max(0.0, veh.ymin()) - 1e-12);
    CHECK(r->region.xmax() <= std::min(1.0, veh.xmax()) + 1e-12);
    CHECK(r->region.ymax() <= std::min(1.0, veh.ymax()) + 1e-12);
  }
}

TEST_CASE("roi_warp on an aligned pixel block reproduces it") {
  int h = 8, w = 8, s = 4;
  std::vector<double> v(static_cast<std::size_t>(h) * w);
  for (int i = 0; i < h * w; ++i) v[static_cast<std::size_t>(i)] = i * 0.37 - 3.0;
  Tensor feat = Tensor::from({1, 1, h, w}, v);
  // region covering pixels [2,6) x [2,6): a 4x4 block, sample points land
  // exactly on pixel centers
  HBox region = HBox::from_corners(2.0 / w, 2.0 / h, 6.0 / w, 6.0 / h);
  Tensor patch = roi_warp(feat, 0, region, s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      CHECK(patch.value(static_cast<std::size_t>(i) * s + j) ==
            doctest::Approx(v[static_cast<std::size_t>((i + 2) * w + j + 2)]));
}

TEST_CASE("roi_warp of a constant map is constant") {
  Tensor feat = Tensor::full({1, 2, 10, 10}, 1.75);
  Tensor patch = roi_warp(feat, 0, HBox{0.43, 0.58, 0.31, 0.22}, 5);
  for (std::size_t i = 0; i < patch.numel(); ++i) CHECK(patch.value(i) == doctest::Approx(1.75));
}

TEST_CASE("roi_warp rejects empty regions") {
  Tensor feat = Tensor::zeros({1, 1, 8, 8});
  CHECK_THROWS(roi_warp(feat, 0, HBox{0.5, 0.5, 0.0, 0.1}, 4));
}

TEST_CASE("roi_warp feature gradient matches finite differences") {
  Rng rng(72);
  Tensor feat = random_tensor({1, 3, 9, 9}, rng);
  HBox region{0.47, 0.52, 0.4, 0.33};
  Tensor mix = random_tensor({3 * 5 * 5}, rng);
  auto make_loss = [&]() {
    Tensor patch = roi_warp(feat, 0, region, 5);
    Tensor weighted = Tensor::node({static_cast<int>(patch.numel())}, {patch});
    for (std::size_t i = 0; i < patch.numel(); ++i) weighted.set_value(i, patch.value(i) * mix.value(i));
    weighted.set_backward([wv = Tensor::borrow(weighted.raw()), patch, mix]() mutable {
      for (std::size_t i = 0; i < patch.numel(); ++i) patch.grad_add(i, wv.grad_value(i) * mix.value(i));
    });
    return ops::sum(weighted);
  };
  CHECK(gradcheck({feat}, make_loss) < 1e-4);
}

TEST_CASE("aggregate batches regions in order with invertible transforms") {
  Rng rng(73);
  Tensor feat = random_tensor({2, 2, 12, 12}, rng);
  std::vector<LocalRegion> regions;
  auto r0 = expand_region(HBox{0.4, 0.4, 0.1, 0.06}, HBox{0.45, 0.45, 0.5, 0.5}, 3.0, 0, 0);
  auto r1 = expand_region(HBox{0.6, 0.6, 0.12, 0.05}, HBox{0.6, 0.6, 0.5, 0.5}, 3.0, 1, 0);
  REQUIRE(r0);
  REQUIRE(r1);
  regions = {*r0, *r1};

  PatchBatch batch = aggregate(regions, feat, 6);
  REQUIRE(batch.size() == 2);
  CHECK(batch.patches.shape() == std::vector<int>({2, 2, 6, 6}));

  // each patch equals the single-region warp of its own image slab
  Tensor lone = roi_warp(feat, 1, r1->region, 6);
  std::size_t patch_elems = 2 * 6 * 6;
  for (std::size_t i = 0; i < patch_elems; ++i)
    CHECK(batch.patches.value(patch_elems + i) == doctest::Approx(lone.value(i)));

  // transform round-trip: patch -> image -> patch within 1e-9
  for (const auto& t : batch.transforms) {
    for (int k = 0; k < 20; ++k) {
      Point p{rng.uniform(0, 1), rng.uniform(0, 1)};
      Point back = t.to_patch(t.to_image(p));
      CHECK(std::abs(back.x - p.x) < 1e-9);
      CHECK(std::abs(back.y - p.y) < 1e-9);
    }
    // a patch-frame quad mapped to the image lands inside the region
    Quad q{{0.1, 0.2}, {0.9, 0.25}, {0.85, 0.8}, {0.12, 0.75}};
    Quad img = t.quad_to_image(q);
    HBox bb = quad_aabb(img);
    CHECK(bb.xmin() >= t.x0 - 1e-12);
    CHECK(bb.xmax() <= t.x0 + t.w + 1e-12);
    CHECK(bb.ymin() >= t.y0 - 1e-12);
    CHECK(bb.ymax() <= t.y0 + t.h + 1e-12);
  }

  SUBCASE("empty input gives an empty batch") {
    PatchBatch none = aggregate({}, feat, 6);
    CHECK(none.empty());
    CHECK_FALSE(none.patches.defined());
  }
}

TEST_CASE("aggregate coordinate hooks receive warp coordinate gradients") {
  Rng rng(74);
  Tensor feat = random_tensor({1, 1, 16, 16}, rng);
  // keep sample taps away from pixel-grid boundaries so the FD step stays
  // inside one bilinear cell
  HBox region = HBox::from_corners(3.37 / 16, 4.13 / 16, 9.37 / 16, 10.13 / 16);
  LocalRegion lr;
  lr.region = region;
  lr.image_index = 0;

  std::array<double, 4> captured{};
  std::vector<RegionCoordHook> hooks = {[&](const std::array<double, 4>& d) { captured = d; }};

  PatchBatch batch = aggregate({lr}, feat, 4, hooks);
  backward(ops::sum(batch.patches));

  // finite differences on (x0, y0, w, h) of the same weighted sum
  auto eval = [&](double dx0, double dy0, double dw, double dh) {
    HBox r2 = HBox::from_corners(region.xmin() + dx0, region.ymin() + dy0,
                                 region.xmin() + dx0 + region.w + dw, region.ymin() + dy0 + region.h + dh);
    LocalRegion l2;
    l2.region = r2;
    l2.image_index = 0;
    Tensor p = aggregate({l2}, feat, 4).patches;
    double s = 0;
    for (std::size_t i = 0; i < p.numel(); ++i) s += p.value(i);
    return s;
  };
  double h = 1e-6;
  double fd[4] = {(eval(h, 0, 0, 0) - eval(-h, 0, 0, 0)) / (2 * h),
                  (eval(0, h, 0, 0) - eval(0, -h, 0, 0)) / (2 * h),
                  (eval(0, 0, h, 0) - eval(0, 0, -h, 0)) / (2 * h),
                  (eval(0, 0, 0, h) - eval(0, 0, 0, h == 0 ? 0 : -h)) / (2 * h)};
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(captured[static_cast<std::size_t>(i)] - fd[i]) /
              std::max({std::abs(fd[i]), std::abs(captured[static_cast<std::size_t>(i)]), 1e-3}) < 1e-3);
}
