#pragma once

#include <cstdint>
#include <vector>

#include "lpdet/geometry.hpp"

namespace lpdet {

// Ground truth for one vehicle. `plate`/`plate_box` are meaningful only
// when has_lp is set; vehicles without a visible plate carry no plate
// record.
struct VehicleLabel {
  HBox box;
  bool has_lp = false;
  Quad plate{};
  HBox plate_box{};  // quad_aabb(plate)
};

struct SceneLabel {
  std::vector<VehicleLabel> vehicles;
  std::uint64_t seed = 0;
};

}  // namespace lpdet
