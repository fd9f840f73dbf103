#include "lpdet/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "lpdet/dataset.hpp"
#include "lpdet/gradcheck.hpp"
#include "lpdet/synthgen.hpp"

namespace lpdet::commands {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int fail(const std::string& cmd, const std::string& what) {
  std::cerr << "error: " << cmd << ": " << what << "\n";
  return 1;
}

void write_resolved_config(const RunConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream f(fs::path(dir) / "config.resolved");
  if (!f) throw std::runtime_error("cannot write resolved config into " + dir);
  f << dump_config(cfg);
}

void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
}

std::vector<double> ppm_to_image01(const PpmImage& img) {
  std::vector<double> v(3 * static_cast<std::size_t>(img.h) * img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c)
        v[(static_cast<std::size_t>(c) * img.h + y) * img.w + x] =
            img.rgb[(static_cast<std::size_t>(y) * img.w + x) * 3 + c] / 255.0;
  return v;
}

json stats_to_json(int iter, const TrainStepStats& s) {
  json j;
  j["iter"] = iter;
  j["l1"] = {{"conf", s.l1_conf}, {"loc", s.l1_loc},     {"has_lp", s.l1_has_lp},
             {"off", s.l1_off},   {"lp_wh", s.l1_lp_wh}, {"n_pos", s.l1_pos},
             {"total", s.l1_total}};
  j["l2"] = {{"conf", s.l2_conf},     {"loc", s.l2_loc},   {"corner", s.l2_corner},
             {"n_pos", s.l2_pos},     {"total", s.l2_total}};
  j["total"] = s.total;
  j["lr"] = s.lr;
  j["regions"] = s.regions;
  j["teacher_forced"] = s.teacher_forced;
  return j;
}

}  // namespace

int cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
  try {
    generate_split(cfg.seed, cfg.synth_count, cfg.synth_params(), out_dir);
    write_resolved_config(cfg, out_dir);
    std::cout << "synth: wrote " << cfg.synth_count << " scenes to " << out_dir << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail("synth", e.what());
  }
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& run_dir) {
  try {
    DatasetIndex ds = load_dataset(data_dir);
    auto train_idx = ds.train_indices();
    if (train_idx.empty()) throw std::runtime_error("no training images in " + data_dir);

    // preload image bytes; per-batch conversion stays cheap
    std::vector<PpmImage> images(ds.entries.size());
    for (std::size_t i : train_idx) images[i] = load_image(ds, i);

    Pipeline pipe(cfg);
    write_resolved_config(cfg, run_dir);
    std::ofstream log(fs::path(run_dir) / "loss_log.jsonl");
    if (!log) throw std::runtime_error("cannot write loss log into " + run_dir);

    Rng rng_batches(derive_seed(cfg.seed, 100));
    Rng rng_augment(derive_seed(cfg.seed, 200));

    std::vector<std::size_t> order = train_idx;
    shuffle_indices(order, rng_batches);
    std::size_t cursor = 0;
    const int size = cfg.image_size;

    for (int iter = 0; iter < cfg.iters; ++iter) {
      Tensor batch = Tensor::zeros({cfg.batch_size, 3, size, size});
      std::vector<SceneLabel> labels;
      for (int b = 0; b < cfg.batch_size; ++b) {
        if (cursor >= order.size()) {
          shuffle_indices(order, rng_batches);
          cursor = 0;
        }
        std::size_t idx = order[cursor++];
        AugmentedSample s = augment_sample(ppm_to_image01(images[idx]), size, ds.entries[idx].label,
                                           rng_augment, cfg.augment_photometric, cfg.augment_crop);
        std::size_t base = static_cast<std::size_t>(b) * 3 * size * size;
        for (std::size_t i = 0; i < s.image01.size(); ++i) batch.set_value(base + i, (s.image01[i] - 0.5) * 2.0);
        labels.push_back(std::move(s.label));
      }
      TrainStepStats stats = pipe.train_step(batch, labels, iter);
      log << stats_to_json(iter, stats).dump() << "\n";
      if (iter % 50 == 0 || iter + 1 == cfg.iters)
        std::cout << "iter " << iter << " total " << stats.total << " l1 " << stats.l1_total << " l2 "
                  << stats.l2_total << " regions " << stats.regions << "\n";
    }

    pipe.save((fs::path(run_dir) / "checkpoint.lpwt").string());
    std::cout << "train: checkpoint written to " << run_dir << "/checkpoint.lpwt\n";
    return 0;
  } catch (const std::exception& e) {
    return fail("train", e.what());
  }
}

EvalReport evaluate_split(Pipeline& pipe, const std::string& data_dir, std::vector<Detection>* all_detections) {
  DatasetIndex ds = load_dataset(data_dir);
  auto test_idx = ds.test_indices();
  if (test_idx.empty()) throw std::runtime_error("no test images in " + data_dir);

  const bool refined = pipe.has_molpr();
  std::vector<std::vector<ScoredBox>> det_boxes;
  std::vector<std::vector<ScoredQuad>> det_quads;
  std::vector<std::vector<HBox>> gt_boxes;
  std::vector<std::vector<Quad>> gt_quads;
  std::vector<std::vector<HBox>> regions;

  EvalReport report;
  for (std::size_t i : test_idx) {
    Tensor input = ppm_to_input(load_image(ds, i));
    auto dets = pipe.infer(input, ds.entries[i].id);
    if (all_detections) all_detections->insert(all_detections->end(), dets.begin(), dets.end());

    std::vector<ScoredBox> boxes;
    std::vector<ScoredQuad> quads;
    std::vector<HBox> region_boxes;
    for (const auto& d : dets) {
      bool use = d.plate_valid && (refined ? d.stage == Detection::Stage::Refined
                                           : d.stage == Detection::Stage::Coarse);
      if (use) {
        boxes.push_back({d.plate_box, d.plate_conf});
        quads.push_back({d.plate_quad, d.plate_conf});
      }
    }
    for (const auto& r : pipe.regions_for_detections(dets, pipe.config().expansion_ratio))
      region_boxes.push_back(r.region);

    std::vector<HBox> gts;
    std::vector<Quad> gtq;
    for (const auto& v : ds.entries[i].label.vehicles)
      if (v.has_lp) {
        gts.push_back(v.plate_box);
        gtq.push_back(v.plate);
        ++report.num_plates;
      }

    det_boxes.push_back(std::move(boxes));
    det_quads.push_back(std::move(quads));
    gt_boxes.push_back(std::move(gts));
    gt_quads.push_back(std::move(gtq));
    regions.push_back(std::move(region_boxes));
  }

  report.num_images = static_cast<int>(test_idx.size());
  report.ap50 = ap_voc07(det_boxes, gt_boxes, 0.5, &report.ap_degenerate);
  report.ap75 = ap_voc07(det_boxes, gt_boxes, 0.75);
  report.c_recall = c_recall(regions, gt_boxes);
  report.prf50 = prf_quad(det_quads, gt_quads, 0.5);
  report.prf75 = prf_quad(det_quads, gt_quads, 0.75);
  return report;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& data_dir,
             const std::string& out_dir) {
  try {
    Pipeline pipe(cfg);
    pipe.load(checkpoint);
    std::vector<Detection> dets;
    EvalReport report = evaluate_split(pipe, data_dir, &dets);
    std::cout << report_table(report);
    if (!out_dir.empty()) {
      write_resolved_config(cfg, out_dir);
      std::ofstream f(fs::path(out_dir) / "report.json");
      f << report_json(report) << "\n";
      write_detections((fs::path(out_dir) / "detections.jsonl").string(), dets);
    }
    return 0;
  } catch (const std::exception& e) {
    return fail("eval", e.what());
  }
}

int cmd_infer(const RunConfig& cfg, const std::string& checkpoint, const std::vector<std::string>& images,
              const std::string& out_path) {
  try {
    if (images.empty()) throw std::runtime_error("no input images");
    Pipeline pipe(cfg);
    pipe.load(checkpoint);
    std::vector<Detection> all;
    for (const auto& path : images) {
      Tensor input = ppm_to_input(read_ppm(path));
      auto dets = pipe.infer(input, fs::path(path).stem().string());
      all.insert(all.end(), dets.begin(), dets.end());
    }
    write_detections(out_path, all);
    std::cout << "infer: " << all.size() << " records written to " << out_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail("infer", e.what());
  }
}

int cmd_sweep_ratio(const RunConfig& cfg, const std::string& checkpoint, const std::string& data_dir,
                    const std::string& out_path) {
  try {
    Pipeline pipe(cfg);
    pipe.load(checkpoint);
    const double ratios[] = {1, 2, 3, 4, 5, kWholeVehicleRatio};

    std::string table = "ratio   AP@0.50  AP@0.75  C_recall\n";
    json rows = json::array();
    for (double r : ratios) {
      pipe.set_expansion_ratio(r);
      EvalReport rep = evaluate_split(pipe, data_dir);
      char buf[128];
      std::snprintf(buf, sizeof buf, "%-7s %.4f   %.4f   %s\n", std::isinf(r) ? "inf" : std::to_string(static_cast<int>(r)).c_str(),
                    rep.ap50, rep.ap75, rep.c_recall ? std::to_string(*rep.c_recall).c_str() : "absent");
      table += buf;
      json row;
      row["ratio"] = std::isinf(r) ? json("inf") : json(r);
      row["ap50"] = rep.ap50;
      row["ap75"] = rep.ap75;
      if (rep.c_recall) row["c_recall"] = *rep.c_recall;
      rows.push_back(row);
    }
    std::cout << table;
    if (!out_path.empty()) {
      std::ofstream f(out_path);
      f << rows.dump(2) << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    return fail("sweep-ratio", e.what());
  }
}

int cmd_gradcheck(const RunConfig& cfg, int seeds) {
  try {
    (void)cfg;
    engine::set_dtype(DType::F64);  // finite differences are meaningless at f32
    auto results = run_gradcheck_suite(seeds);
    bool all_pass = true;
    for (const auto& r : results) {
      std::printf("%s %-16s max_rel_err %.3e (tol %.0e, %d seeds)\n", r.pass ? "PASS" : "FAIL",
                  r.name.c_str(), r.max_err, r.tolerance, r.seeds);
      all_pass = all_pass && r.pass;
    }
    if (!all_pass) return fail("gradcheck", "finite-difference comparison failed");
    return 0;
  } catch (const std::exception& e) {
    return fail("gradcheck", e.what());
  }
}

}  // namespace lpdet::commands
