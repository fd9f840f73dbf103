#include "lpdet/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace lpdet {

namespace fs = std::filesystem;
using nlohmann::json;

void write_ppm(const std::string& path, const Tensor& image01) {
  if (image01.ndim() != 4 || image01.dim(0) != 1 || image01.dim(1) != 3)
    throw std::invalid_argument("write_ppm: expected (1,3,H,W)");
  int h = image01.dim(2), w = image01.dim(3);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
  f << "P6\n" << w << " " << h << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = image01.value((static_cast<std::size_t>(c) * h + y) * w + x);
        int b = static_cast<int>(std::lround(v * 255.0));
        row[static_cast<std::size_t>(x) * 3 + c] = static_cast<std::uint8_t>(std::clamp(b, 0, 255));
      }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw std::runtime_error("write_ppm: write failed for " + path);
}

PpmImage read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw std::runtime_error("read_ppm: not a P6 file: " + path);
  int w, h, maxv;
  f >> w >> h >> maxv;
  if (maxv != 255 || w <= 0 || h <= 0) throw std::runtime_error("read_ppm: unsupported header in " + path);
  f.get();  // single whitespace after header
  PpmImage img;
  img.w = w;
  img.h = h;
  img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!f) throw std::runtime_error("read_ppm: truncated file " + path);
  return img;
}

Tensor ppm_to_input(const PpmImage& img) {
  std::vector<double> v(3 * static_cast<std::size_t>(img.h) * img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) {
        double b = img.rgb[(static_cast<std::size_t>(y) * img.w + x) * 3 + c] / 255.0;
        v[(static_cast<std::size_t>(c) * img.h + y) * img.w + x] = (b - 0.5) * 2.0;
      }
  return Tensor::from({1, 3, img.h, img.w}, v);
}

Tensor image01_to_input(const Tensor& image01) {
  std::vector<double> v(image01.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (image01.value(i) - 0.5) * 2.0;
  return Tensor::from(image01.shape(), v);
}

namespace {

json vehicle_to_json(const VehicleLabel& v) {
  json j;
  j["box"] = {v.box.cx, v.box.cy, v.box.w, v.box.h};
  j["has_lp"] = v.has_lp;
  if (v.has_lp) {
    auto p = v.plate.points();
    j["quad"] = {p[0].x, p[0].y, p[1].x, p[1].y, p[2].x, p[2].y, p[3].x, p[3].y};
  }
  return j;
}

VehicleLabel vehicle_from_json(const json& j) {
  VehicleLabel v;
  auto b = j.at("box");
  v.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
  v.has_lp = j.at("has_lp").get<bool>();
  if (v.has_lp) {
    auto q = j.at("quad");
    v.plate = {{q.at(0).get<double>(), q.at(1).get<double>()},
               {q.at(2).get<double>(), q.at(3).get<double>()},
               {q.at(4).get<double>(), q.at(5).get<double>()},
               {q.at(6).get<double>(), q.at(7).get<double>()}};
    v.plate_box = quad_aabb(v.plate);
  }
  return v;
}

}  // namespace

void write_labels(const std::string& path, const std::vector<LabeledImage>& entries) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_labels: cannot open " + path);
  for (const auto& e : entries) {
    json j;
    j["v"] = 1;
    j["image"] = e.id;
    j["split"] = e.test ? "test" : "train";
    j["seed"] = e.label.seed;
    json vs = json::array();
    for (const auto& v : e.label.vehicles) vs.push_back(vehicle_to_json(v));
    j["vehicles"] = vs;
    f << j.dump() << "\n";
  }
  if (!f) throw std::runtime_error("write_labels: write failed for " + path);
}

std::vector<LabeledImage> read_labels(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_labels: cannot open " + path);
  std::vector<LabeledImage> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (j.at("v").get<int>() != 1) throw std::runtime_error("read_labels: unsupported record version");
    LabeledImage e;
    e.id = j.at("image").get<std::string>();
    e.test = j.at("split").get<std::string>() == "test";
    e.label.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& vj : j.at("vehicles")) e.label.vehicles.push_back(vehicle_from_json(vj));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::size_t> DatasetIndex::train_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (!entries[i].test) out.push_back(i);
  return out;
}

std::vector<std::size_t> DatasetIndex::test_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].test) out.push_back(i);
  return out;
}

DatasetIndex load_dataset(const std::string& dir) {
  DatasetIndex ds;
  ds.dir = dir;
  ds.entries = read_labels((fs::path(dir) / "labels.jsonl").string());
  if (ds.entries.empty()) throw std::runtime_error("load_dataset: no label records in " + dir);
  return ds;
}

PpmImage load_image(const DatasetIndex& ds, std::size_t index) {
  return read_ppm((fs::path(ds.dir) / "images" / (ds.entries.at(index).id + ".ppm")).string());
}

}  // namespace lpdet
