#pragma once

#include <string>

#include "lpdet/scene.hpp"
#include "lpdet/tensor.hpp"

namespace lpdet {

// Scene generator parameters. Plates render as high-frequency striped
// quadrilaterals on solid bordered vehicles over a textured background, so
// labels are exact by construction.
struct SynthParams {
  int image_size = 128;
  int min_vehicles = 1;
  int max_vehicles = 4;
  double vehicle_min_w = 0.28;
  double vehicle_max_w = 0.60;
  double large_vehicle_prob = 0.10;  // oversized vehicle with a relatively tiny plate
  double plate_frac_min = 0.22;      // plate width as a fraction of vehicle width
  double plate_frac_max = 0.36;
  double plate_aspect_min = 2.6;  // plate w/h
  double plate_aspect_max = 3.8;
  double tilt = 0.25;             // projective corner jitter, fraction of plate size
  double occlusion_prob = 0.18;   // partially occluded plate -> labeled absent
  double no_plate_prob = 0.06;    // vehicle rendered without any plate
  double min_plate_area_px = 30;  // smaller plates are labeled absent
};

struct Scene {
  Tensor image;  // (1, 3, S, S), values in [0,1]
  SceneLabel label;
};

// Deterministic per seed: the same seed reproduces the image and label
// bit for bit.
Scene generate_scene(std::uint64_t seed, const SynthParams& p);

// Writes count scenes as images/NNNNNN.ppm plus labels.jsonl, assigning
// every tenth scene (index % 10 == 9) to the test split.
void generate_split(std::uint64_t seed, int count, const SynthParams& p, const std::string& out_dir);

}  // namespace lpdet
