#include <doctest.h>

#include <cmath>

#include "lpdet/codec.hpp"
#include "testutil.hpp"

using namespace lpdet;
using testutil::Rng;

namespace {
HBox random_box(Rng& rng) {
  return {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5)};
}
}  // namespace

TEST_CASE("encode_vehicle identity and direct arithmetic") {
  HBox d{0.5, 0.5, 0.2, 0.2};
  VehicleTarget t0 = encode_vehicle(d, d);
  CHECK(t0.t_cx == doctest::Approx(0.0));
  CHECK(t0.t_cy == doctest::Approx(0.0));
  CHECK(t0.t_w == doctest::Approx(0.0));
  CHECK(t0.t_h == doctest::Approx(0.0));

  HBox g{0.6, 0.5, 0.4, 0.2};
  VehicleTarget t = encode_vehicle(g, d);
  CHECK(t.t_cx == doctest::Approx(0.5));
  CHECK(t.t_cy == doctest::Approx(0.0));
  CHECK(t.t_w == doctest::Approx(std::log(2.0)));
  CHECK(t.t_h == doctest::Approx(0.0));

  CHECK_THROWS(encode_vehicle(HBox{0.5, 0.5, -0.1, 0.2}, d));
}

TEST_CASE("vehicle codec round-trips to 1e-9") {
  Rng rng(91);
  for (int i = 0; i < 1000; ++i) {
    HBox g = random_box(rng), d = random_box(rng);
    HBox r = decode_vehicle(encode_vehicle(g, d), d);
    CHECK(std::abs(r.cx - g.cx) < 1e-9);
    CHECK(std::abs(r.cy - g.cy) < 1e-9);
    CHECK(std::abs(r.w - g.w) < 1e-9);
    CHECK(std::abs(r.h - g.h) < 1e-9);
  }
}

TEST_CASE("plate hint encoding follows the offset/log-size form") {
  HBox d{0.5, 0.5, 0.2, 0.2};
  // plate center on the vehicle center, plate size equal to the prior size
  HBox vehicle{0.4, 0.4, 0.5, 0.5};
  HBox plate{0.4, 0.4, 0.2, 0.2};
  PlateHintTarget t0 = encode_plate_hint(plate, vehicle, d);
  CHECK(t0.t_offx == doctest::Approx(0.0));
  CHECK(t0.t_offy == doctest::Approx(0.0));
  CHECK(t0.t_lpw == doctest::Approx(0.0));
  CHECK(t0.t_lph == doctest::Approx(0.0));

  // off_x = 0.05, d_w = 0.2 -> t_offx = 0.25
  HBox plate2{0.45, 0.4, 0.1, 0.05};
  PlateHintTarget t = encode_plate_hint(plate2, vehicle, d);
  CHECK(t.t_offx == doctest::Approx(0.25));
}

TEST_CASE("plate hint codec round-trips through the predicted center") {
  Rng rng(92);
  for (int i = 0; i < 1000; ++i) {
    HBox vehicle = random_box(rng);
    HBox plate = random_box(rng);
    HBox d = random_box(rng);
    PlateHintTarget t = encode_plate_hint(plate, vehicle, d);
    // decoding about the true vehicle center must reproduce the plate
    HBox r = decode_plate_hint(t, d, {vehicle.cx, vehicle.cy});
    CHECK(std::abs(r.cx - plate.cx) < 1e-9);
    CHECK(std::abs(r.cy - plate.cy) < 1e-9);
    CHECK(std::abs(r.w - plate.w) < 1e-9);
    CHECK(std::abs(r.h - plate.h) < 1e-9);
    CHECK(r.w > 0);
    CHECK(r.h > 0);
  }
}

TEST_CASE("decoded plate size stays positive for any finite target") {
  HBox d{0.5, 0.5, 0.2, 0.1};
  for (double t : {-30.0, -5.0, 0.0, 5.0, 30.0}) {
    HBox r = decode_plate_hint({0, 0, t, t}, d, {0.5, 0.5});
    CHECK(r.w > 0);
    CHECK(r.h > 0);
  }
}

TEST_CASE("corner codec arithmetic and round-trip") {
  HBox d{0.5, 0.5, 0.2, 0.1};
  // every corner at the prior center -> zero target
  Quad degenerate{{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
  CornerTarget t0 = encode_corners(degenerate, d);
  for (double v : t0.v) CHECK(v == doctest::Approx(0.0));

  // corner at (cx + w, cy) -> X target 1, Y target 0
  Quad q{{0.7, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
  CornerTarget t = encode_corners(q, d);
  CHECK(t.v[0] == doctest::Approx(1.0));
  CHECK(t.v[1] == doctest::Approx(0.0));

  Rng rng(93);
  for (int i = 0; i < 1000; ++i) {
    Quad src{{rng.uniform(0, 1), rng.uniform(0, 1)},
             {rng.uniform(0, 1), rng.uniform(0, 1)},
             {rng.uniform(0, 1), rng.uniform(0, 1)},
             {rng.uniform(0, 1), rng.uniform(0, 1)}};
    HBox prior = random_box(rng);
    Quad r = decode_corners(encode_corners(src, prior), prior);
    auto ps = src.points();
    auto pr = r.points();
    for (int c = 0; c < 4; ++c) {
      CHECK(std::abs(ps[c].x - pr[c].x) < 1e-9);
      CHECK(std::abs(ps[c].y - pr[c].y) < 1e-9);
    }
  }
}

TEST_CASE("encodings are translation covariant") {
  Rng rng(94);
  for (int i = 0; i < 100; ++i) {
    HBox g = random_box(rng), d = random_box(rng);
    double dx = rng.uniform(-0.1, 0.1), dy = rng.uniform(-0.1, 0.1);
    HBox g2{g.cx + dx, g.cy + dy, g.w, g.h};
    HBox d2{d.cx + dx, d.cy + dy, d.w, d.h};
    VehicleTarget a = encode_vehicle(g, d), b = encode_vehicle(g2, d2);
    CHECK(a.t_cx == doctest::Approx(b.t_cx).epsilon(1e-9));
    CHECK(a.t_cy == doctest::Approx(b.t_cy).epsilon(1e-9));
    CHECK(a.t_w == doctest::Approx(b.t_w).epsilon(1e-12));
    CHECK(a.t_h == doctest::Approx(b.t_h).epsilon(1e-12));
  }
}
