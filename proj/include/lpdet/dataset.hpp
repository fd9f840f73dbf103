#pragma once

#include <string>
#include <vector>

#include "lpdet/scene.hpp"
#include "lpdet/tensor.hpp"

namespace lpdet {

struct PpmImage {
  int w = 0, h = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, row-major
};

// Binary P6, 8-bit. Tensors are (1,3,H,W) in [0,1].
void write_ppm(const std::string& path, const Tensor& image01);
PpmImage read_ppm(const std::string& path);

// Network input normalization: byte/255 mapped to [-1, 1].
Tensor ppm_to_input(const PpmImage& img);
Tensor image01_to_input(const Tensor& image01);

struct LabeledImage {
  std::string id;
  bool test = false;
  SceneLabel label;
};

// labels.jsonl: one record per image,
// {"v":1,"image":id,"split":"train"|"test","seed":n,"vehicles":[
//   {"box":[cx,cy,w,h],"has_lp":bool,"quad":[8 floats]?}]}
void write_labels(const std::string& path, const std::vector<LabeledImage>& entries);
std::vector<LabeledImage> read_labels(const std::string& path);

struct DatasetIndex {
  std::string dir;
  std::vector<LabeledImage> entries;

  std::vector<std::size_t> train_indices() const;
  std::vector<std::size_t> test_indices() const;
};

DatasetIndex load_dataset(const std::string& dir);
PpmImage load_image(const DatasetIndex& ds, std::size_t index);

}  // namespace lpdet
