#include "lpdet/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace lpdet {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

double parse_double(const std::string& v) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double d = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("bad number: " + v);
  return d;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("bad bool (want true/false): " + v);
}

std::string fmt_double(double d) {
  if (std::isinf(d)) return "inf";
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d);  // shortest round-trip form
  return std::string(buf, end);
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& v, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse(item));
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

struct Key {
  std::string name;
  std::string doc;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::vector<Key> registry() {
  std::vector<Key> keys;
  auto add_int = [&](const std::string& n, int RunConfig::*f, const std::string& doc) {
    keys.push_back({n, doc, [f](RunConfig& c, const std::string& v) { c.*f = std::stoi(v); },
                    [f](const RunConfig& c) { return std::to_string(c.*f); }});
  };
  auto add_u64 = [&](const std::string& n, std::uint64_t RunConfig::*f, const std::string& doc) {
    keys.push_back({n, doc, [f](RunConfig& c, const std::string& v) { c.*f = std::stoull(v); },
                    [f](const RunConfig& c) { return std::to_string(c.*f); }});
  };
  auto add_dbl = [&](const std::string& n, double RunConfig::*f, const std::string& doc) {
    keys.push_back({n, doc, [f](RunConfig& c, const std::string& v) { c.*f = parse_double(v); },
                    [f](const RunConfig& c) { return fmt_double(c.*f); }});
  };
  auto add_bool = [&](const std::string& n, bool RunConfig::*f, const std::string& doc) {
    keys.push_back({n, doc, [f](RunConfig& c, const std::string& v) { c.*f = parse_bool(v); },
                    [f](const RunConfig& c) { return c.*f ? "true" : "false"; }});
  };
  auto add_str = [&](const std::string& n, std::string RunConfig::*f, const std::string& doc) {
    keys.push_back({n, doc, [f](RunConfig& c, const std::string& v) { c.*f = v; },
                    [f](const RunConfig& c) { return c.*f; }});
  };
  auto add_ints = [&](const std::string& n, std::vector<int> RunConfig::*f, const std::string& doc) {
    keys.push_back({n, doc,
                    [f](RunConfig& c, const std::string& v) {
                      c.*f = parse_list<int>(v, [](const std::string& s) { return std::stoi(s); });
                    },
                    [f](const RunConfig& c) {
                      std::string s;
                      for (int x : c.*f) s += (s.empty() ? "" : ",") + std::to_string(x);
                      return s;
                    }});
  };
  auto add_dbls = [&](const std::string& n, std::vector<double> RunConfig::*f, const std::string& doc) {
    keys.push_back({n, doc,
                    [f](RunConfig& c, const std::string& v) { c.*f = parse_list<double>(v, parse_double); },
                    [f](const RunConfig& c) {
                      std::string s;
                      for (double x : c.*f) s += (s.empty() ? "" : ",") + fmt_double(x);
                      return s;
                    }});
  };

  add_int("image_size", &RunConfig::image_size, "input image side, multiple of 32");
  add_int("patch_size", &RunConfig::patch_size, "warped local-region side, multiple of 4");
  add_ints("alpd_grids", &RunConfig::alpd_grids, "coarse-stage head grids (image/8, /16, /32)");
  add_dbls("alpd_scales", &RunConfig::alpd_scales, "coarse-stage prior scales per grid");
  add_dbls("alpd_ratios", &RunConfig::alpd_ratios, "coarse-stage prior aspect ratios");
  add_ints("molpr_grids", &RunConfig::molpr_grids, "refinement head grids (patch/2, /4)");
  add_dbls("molpr_scales", &RunConfig::molpr_scales, "refinement prior scales per grid");
  add_dbls("molpr_ratios", &RunConfig::molpr_ratios, "refinement prior aspect ratios");
  add_dbl("match_threshold", &RunConfig::match_threshold, "prior-to-GT IOU threshold");
  add_int("neg_pos_ratio", &RunConfig::neg_pos_ratio, "hard negative mining ratio");
  add_dbl("alpha", &RunConfig::alpha, "weight of the refinement loss in the total");
  add_dbl("expansion_ratio", &RunConfig::expansion_ratio, "local-region expansion about the plate hint; inf = whole vehicle");
  add_bool("warp_coord_grad", &RunConfig::warp_coord_grad, "backprop through region coordinates into the coarse heads");
  add_dbl("teacher_forcing_fraction", &RunConfig::teacher_forcing_fraction,
          "fraction of iterations building regions from GT plates");
  add_dbl("has_lp_threshold", &RunConfig::has_lp_threshold, "has-plate gate probability");
  add_bool("use_has_lp_gate", &RunConfig::use_has_lp_gate, "gate plate emission by has-plate confidence");
  add_dbl("vehicle_conf_threshold", &RunConfig::vehicle_conf_threshold, "min vehicle confidence kept");
  add_dbl("plate_conf_threshold", &RunConfig::plate_conf_threshold, "min refined plate confidence kept");
  add_dbl("nms_threshold", &RunConfig::nms_threshold, "greedy NMS IOU threshold");
  add_int("max_regions_per_image", &RunConfig::max_regions_per_image, "cap on local regions per image");
  add_bool("e2e", &RunConfig::e2e, "train/run the refinement stage (false = coarse only)");
  add_int("iters", &RunConfig::iters, "training iterations");
  add_int("batch_size", &RunConfig::batch_size, "images per step");
  add_dbl("lr", &RunConfig::lr, "Adam learning rate");
  add_dbl("lr_decay", &RunConfig::lr_decay, "multiplicative decay at each milestone");
  add_ints("lr_milestones", &RunConfig::lr_milestones, "iterations at which lr decays");
  add_dbl("beta1", &RunConfig::beta1, "Adam beta1");
  add_dbl("beta2", &RunConfig::beta2, "Adam beta2");
  add_dbl("weight_decay", &RunConfig::weight_decay, "L2 weight decay added to gradients");
  add_str("dtype", &RunConfig::dtype, "f32 (training) or f64 (gradient checks)");
  add_u64("seed", &RunConfig::seed, "master seed; fixes init, batches, augmentation");
  add_bool("augment_photometric", &RunConfig::augment_photometric, "brightness/contrast jitter");
  add_bool("augment_crop", &RunConfig::augment_crop, "label-preserving random crop");
  add_int("synth_count", &RunConfig::synth_count, "scenes to synthesize");
  add_int("synth_min_vehicles", &RunConfig::synth_min_vehicles, "min vehicles per scene");
  add_int("synth_max_vehicles", &RunConfig::synth_max_vehicles, "max vehicles per scene");
  add_dbl("synth_vehicle_min_w", &RunConfig::synth_vehicle_min_w, "min vehicle width");
  add_dbl("synth_vehicle_max_w", &RunConfig::synth_vehicle_max_w, "max vehicle width");
  add_dbl("synth_large_vehicle_prob", &RunConfig::synth_large_vehicle_prob, "oversized-vehicle probability");
  add_dbl("synth_plate_frac_min", &RunConfig::synth_plate_frac_min, "min plate/vehicle width fraction");
  add_dbl("synth_plate_frac_max", &RunConfig::synth_plate_frac_max, "max plate/vehicle width fraction");
  add_dbl("synth_plate_aspect_min", &RunConfig::synth_plate_aspect_min, "min plate w/h");
  add_dbl("synth_plate_aspect_max", &RunConfig::synth_plate_aspect_max, "max plate w/h");
  add_dbl("synth_tilt", &RunConfig::synth_tilt, "plate corner jitter as a fraction of plate size");
  add_dbl("synth_occlusion_prob", &RunConfig::synth_occlusion_prob, "occluded-plate probability (labeled absent)");
  add_dbl("synth_no_plate_prob", &RunConfig::synth_no_plate_prob, "plateless-vehicle probability");
  add_dbl("synth_min_plate_area_px", &RunConfig::synth_min_plate_area_px, "plates below this area are labeled absent");
  return keys;
}

const std::vector<Key>& keys() {
  static const std::vector<Key> k = registry();
  return k;
}

void apply(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where) {
  for (const auto& k : keys()) {
    if (k.name == key) {
      try {
        k.set(cfg, value);
      } catch (const std::exception& e) {
        throw std::invalid_argument(where + ": bad value for " + key + ": " + e.what());
      }
      return;
    }
  }
  throw std::invalid_argument(where + ": unknown config key '" + key + "'");
}

void apply_line(RunConfig& cfg, const std::string& raw, const std::string& where) {
  std::string line = raw;
  if (auto h = line.find('#'); h != std::string::npos) line = line.substr(0, h);
  line = trim(line);
  if (line.empty()) return;
  auto eq = line.find('=');
  if (eq == std::string::npos) throw std::invalid_argument(where + ": expected key=value, got '" + raw + "'");
  apply(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
}

}  // namespace

std::vector<LayerSpec> RunConfig::alpd_layer_specs() const {
  if (alpd_grids.size() != alpd_scales.size())
    throw std::invalid_argument("config: alpd_grids and alpd_scales must align");
  std::vector<LayerSpec> out;
  for (std::size_t i = 0; i < alpd_grids.size(); ++i) out.push_back({alpd_grids[i], alpd_scales[i], alpd_ratios});
  return out;
}

std::vector<LayerSpec> RunConfig::molpr_layer_specs() const {
  if (molpr_grids.size() != molpr_scales.size())
    throw std::invalid_argument("config: molpr_grids and molpr_scales must align");
  std::vector<LayerSpec> out;
  for (std::size_t i = 0; i < molpr_grids.size(); ++i) out.push_back({molpr_grids[i], molpr_scales[i], molpr_ratios});
  return out;
}

SynthParams RunConfig::synth_params() const {
  SynthParams p;
  p.image_size = image_size;
  p.min_vehicles = synth_min_vehicles;
  p.max_vehicles = synth_max_vehicles;
  p.vehicle_min_w = synth_vehicle_min_w;
  p.vehicle_max_w = synth_vehicle_max_w;
  p.large_vehicle_prob = synth_large_vehicle_prob;
  p.plate_frac_min = synth_plate_frac_min;
  p.plate_frac_max = synth_plate_frac_max;
  p.plate_aspect_min = synth_plate_aspect_min;
  p.plate_aspect_max = synth_plate_aspect_max;
  p.tilt = synth_tilt;
  p.occlusion_prob = synth_occlusion_prob;
  p.no_plate_prob = synth_no_plate_prob;
  p.min_plate_area_px = synth_min_plate_area_px;
  return p;
}

void RunConfig::validate() const {
  if (dtype != "f32" && dtype != "f64") throw std::invalid_argument("config: dtype must be f32 or f64");
  if (!(expansion_ratio >= 1.0)) throw std::invalid_argument("config: expansion_ratio must be >= 1 (or inf)");
  if (match_threshold <= 0 || match_threshold >= 1)
    throw std::invalid_argument("config: match_threshold must be in (0,1)");
  if (batch_size < 1 || iters < 0) throw std::invalid_argument("config: bad training sizes");
  if (teacher_forcing_fraction < 0 || teacher_forcing_fraction > 1)
    throw std::invalid_argument("config: teacher_forcing_fraction must be in [0,1]");
  if (alpha <= 0) throw std::invalid_argument("config: alpha must be positive");
  alpd_layer_specs();
  molpr_layer_specs();
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    apply_line(cfg, line, path + ":" + std::to_string(lineno));
  }
  for (const auto& o : overrides) apply_line(cfg, o, "--set " + o);
  cfg.validate();
  return cfg;
}

RunConfig config_from_overrides(const std::vector<std::string>& overrides) {
  RunConfig cfg;
  for (const auto& o : overrides) apply_line(cfg, o, "--set " + o);
  cfg.validate();
  return cfg;
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

std::string describe_config_keys() {
  std::string out;
  RunConfig defaults;
  for (const auto& k : keys()) out += k.name + " (default " + k.get(defaults) + "): " + k.doc + "\n";
  return out;
}

}  // namespace lpdet
