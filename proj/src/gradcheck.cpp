#include "lpdet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lpdet/codec.hpp"
#include "lpdet/losses.hpp"
#include "lpdet/lrea.hpp"
#include "lpdet/ops.hpp"
#include "lpdet/rng.hpp"

namespace lpdet {

double max_rel_grad_error(std::vector<Tensor> leaves, const std::function<Tensor()>& make_loss, double step) {
  if (engine::dtype() != DType::F64)
    throw std::logic_error("max_rel_grad_error: finite differences need the f64 engine mode");
  for (auto& l : leaves) l.zero_grad();
  Tensor loss = make_loss();
  backward(loss);

  double worst = 0;
  for (auto& leaf : leaves) {
    for (std::size_t i = 0; i < leaf.numel(); ++i) {
      double analytic = leaf.grad_value(i);
      double orig = leaf.value(i);
      leaf.set_value(i, orig + step);
      double lp = make_loss().value(0);
      leaf.set_value(i, orig - step);
      double lm = make_loss().value(0);
      leaf.set_value(i, orig);
      double fd = (lp - lm) / (2 * step);
      double err = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

namespace {

Tensor rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), v);
}

// weighted sum with fixed random weights; exercises non-uniform output grads
Tensor weighted_sum(const Tensor& t, const Tensor& mix) {
  Tensor flat = Tensor::node({static_cast<int>(t.numel())}, {t});
  for (std::size_t i = 0; i < t.numel(); ++i) flat.set_value(i, t.value(i) * mix.value(i));
  flat.set_backward([f = Tensor::borrow(flat.raw()), t = t, mix = mix]() mutable {
    for (std::size_t i = 0; i < t.numel(); ++i) t.grad_add(i, f.grad_value(i) * mix.value(i));
  });
  return ops::sum(flat);
}

struct LossFixture {
  PriorSet priors;
  std::vector<SceneLabel> labels;
  std::vector<MatchResult> matches;
  AlpdHeads heads;
};

LossFixture make_scene_fixture(Rng& rng) {
  LossFixture f;
  f.priors = generate_priors({{3, 0.35, {1.0, 2.0}}});
  SceneLabel lab;
  VehicleLabel v1;
  v1.box = {rng.uniform(0.25, 0.4), rng.uniform(0.25, 0.4), rng.uniform(0.25, 0.4), rng.uniform(0.25, 0.4)};
  v1.has_lp = true;
  v1.plate_box = {v1.box.cx, v1.box.cy + 0.2 * v1.box.h, 0.3 * v1.box.w, 0.12 * v1.box.h};
  v1.plate = Quad::from_box(v1.plate_box);
  VehicleLabel v2;
  v2.box = {rng.uniform(0.6, 0.75), rng.uniform(0.6, 0.75), rng.uniform(0.2, 0.35), rng.uniform(0.2, 0.35)};
  v2.has_lp = false;
  lab.vehicles = {v1, v2};
  f.labels = {lab};
  f.matches = {match_priors(f.priors, {v1.box, v2.box})};
  int rows = static_cast<int>(f.priors.size());
  f.heads.conf = rand_tensor({rows, 2}, rng, -1.5, 1.5);
  f.heads.loc = rand_tensor({rows, 4}, rng, -0.8, 0.8);
  f.heads.plate = rand_tensor({rows, 5}, rng, -0.8, 0.8);
  return f;
}

struct PatchFixture {
  PriorSet priors;
  std::vector<PatchLabel> labels;
  std::vector<MatchResult> matches;
  MolprHeads heads;
};

PatchFixture make_patch_fixture(Rng& rng) {
  PatchFixture f;
  f.priors = generate_priors({{3, 0.4, {2.0, 3.0}}});
  PatchLabel lab;
  HBox plate{rng.uniform(0.4, 0.6), rng.uniform(0.35, 0.55), rng.uniform(0.3, 0.5), rng.uniform(0.15, 0.25)};
  Quad q = Quad::from_box(plate);
  q.tl.y += rng.uniform(0, 0.04);
  q.br.x -= rng.uniform(0, 0.04);
  lab.plate_boxes = {plate};
  lab.plate_quads = {q};
  f.labels = {lab};
  f.matches = {match_priors(f.priors, lab.plate_boxes)};
  int rows = static_cast<int>(f.priors.size());
  f.heads.conf = rand_tensor({rows, 2}, rng, -1.5, 1.5);
  f.heads.loc = rand_tensor({rows, 4}, rng, -0.8, 0.8);
  f.heads.corner = rand_tensor({rows, 8}, rng, -0.8, 0.8);
  return f;
}

using CaseFn = std::function<double(Rng&)>;

GradCheckResult run_case(const std::string& name, double tol, int seeds, std::uint64_t seed_base,
                         const CaseFn& fn) {
  GradCheckResult r;
  r.name = name;
  r.tolerance = tol;
  r.seeds = seeds;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(derive_seed(seed_base, static_cast<std::uint64_t>(s)));
    r.max_err = std::max(r.max_err, fn(rng));
  }
  r.pass = r.max_err < tol;
  return r;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(int seeds) {
  if (engine::dtype() != DType::F64)
    throw std::logic_error("run_gradcheck_suite: requires the f64 engine mode");
  std::vector<GradCheckResult> out;
  const double tol = 1e-4;

  out.push_back(run_case("conv2d", tol, seeds, 101, [](Rng& rng) {
    Tensor in = rand_tensor({1, 2, 6, 6}, rng);
    Tensor w = rand_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
    Tensor b = rand_tensor({3}, rng, -0.2, 0.2);
    Tensor mix = rand_tensor({3 * 6 * 6}, rng);
    int stride = rng.bernoulli(0.5) ? 1 : 2;
    Tensor mix_s = stride == 1 ? mix : rand_tensor({3 * 3 * 3}, rng);
    return max_rel_grad_error({in, w, b}, [&]() {
      return weighted_sum(ops::conv2d(in, w, b, stride, 1), mix_s);
    });
  }));

  out.push_back(run_case("maxpool2d", tol, seeds, 102, [](Rng& rng) {
    // well-separated values keep argmax stable under the FD step
    std::vector<double> v(1 * 2 * 6 * 6);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((i * 131) % 97) / 11.0 + rng.uniform(0, 0.005);
    Tensor in = Tensor::from({1, 2, 6, 6}, v);
    Tensor mix = rand_tensor({2 * 3 * 3}, rng);
    return max_rel_grad_error({in}, [&]() { return weighted_sum(ops::maxpool2d(in, 2, 2), mix); });
  }));

  out.push_back(run_case("relu", tol, seeds, 103, [](Rng& rng) {
    Tensor in = rand_tensor({4, 9}, rng);
    Tensor mix = rand_tensor({4 * 9}, rng);
    return max_rel_grad_error({in}, [&]() { return weighted_sum(ops::relu(in), mix); });
  }));

  out.push_back(run_case("linear", tol, seeds, 104, [](Rng& rng) {
    Tensor in = rand_tensor({3, 7}, rng);
    Tensor w = rand_tensor({4, 7}, rng);
    Tensor b = rand_tensor({4}, rng);
    Tensor mix = rand_tensor({3 * 4}, rng);
    return max_rel_grad_error({in, w, b}, [&]() { return weighted_sum(ops::linear(in, w, b), mix); });
  }));

  out.push_back(run_case("l2norm", tol, seeds, 105, [](Rng& rng) {
    Tensor in = rand_tensor({1, 4, 3, 3}, rng, 0.15, 1.5);
    Tensor sc = rand_tensor({4}, rng, 0.5, 2.0);
    Tensor mix = rand_tensor({4 * 3 * 3}, rng);
    return max_rel_grad_error({in, sc}, [&]() { return weighted_sum(ops::l2norm(in, sc), mix); });
  }));

  out.push_back(run_case("roi_warp", tol, seeds, 106, [](Rng& rng) {
    Tensor feat = rand_tensor({1, 2, 9, 9}, rng);
    HBox region{rng.uniform(0.4, 0.6), rng.uniform(0.4, 0.6), rng.uniform(0.25, 0.45), rng.uniform(0.25, 0.45)};
    Tensor mix = rand_tensor({2 * 5 * 5}, rng);
    return max_rel_grad_error({feat}, [&]() { return weighted_sum(roi_warp(feat, 0, region, 5), mix); });
  }));

  out.push_back(run_case("smooth_l1_terms", tol, seeds, 107, [](Rng& rng) {
    Tensor pred = rand_tensor({5, 4}, rng, -2, 2);
    std::vector<double> targets(20);
    for (auto& t : targets) t = rng.uniform(-1.5, 1.5);
    std::vector<double> w(5, 0.0);
    for (auto& x : w)
      if (rng.bernoulli(0.6)) x = 1.0;
    w[0] = 1.0;
    return max_rel_grad_error({pred}, [&]() { return masked_smooth_l1(pred, targets, w); });
  }));

  out.push_back(run_case("softmax_ce", tol, seeds, 108, [](Rng& rng) {
    Tensor logits = rand_tensor({10, 2}, rng, -2, 2);
    std::vector<int> labels(10);
    std::vector<char> mask(10, 0);
    for (int i = 0; i < 10; ++i) {
      labels[static_cast<std::size_t>(i)] = rng.uniform_int(0, 1);
      mask[static_cast<std::size_t>(i)] = static_cast<char>(rng.uniform_int(0, 1));
    }
    mask[0] = 1;
    return max_rel_grad_error({logits}, [&]() { return softmax_ce(logits, labels, mask); });
  }));

  out.push_back(run_case("bce_has_lp", tol, seeds, 109, [](Rng& rng) {
    Tensor z = rand_tensor({8, 1}, rng, -3, 3);
    std::vector<char> flags(8), pos(8, 0);
    for (int i = 0; i < 8; ++i) flags[static_cast<std::size_t>(i)] = static_cast<char>(rng.uniform_int(0, 1));
    pos[0] = pos[3] = pos[6] = 1;
    return max_rel_grad_error({z}, [&]() { return bce_has_lp(z, flags, pos); });
  }));

  out.push_back(run_case("alpd_loss", tol, seeds, 110, [](Rng& rng) {
    LossFixture f = make_scene_fixture(rng);
    return max_rel_grad_error({f.heads.conf, f.heads.loc, f.heads.plate}, [&]() {
      return alpd_loss(f.heads, f.priors, f.matches, f.labels).total;
    });
  }));

  out.push_back(run_case("molpr_loss", tol, seeds, 111, [](Rng& rng) {
    PatchFixture f = make_patch_fixture(rng);
    return max_rel_grad_error({f.heads.conf, f.heads.loc, f.heads.corner}, [&]() {
      return molpr_loss(f.heads, f.priors, f.matches, f.labels).total;
    });
  }));

  out.push_back(run_case("total_loss", tol, seeds, 112, [](Rng& rng) {
    LossFixture f = make_scene_fixture(rng);
    PatchFixture g = make_patch_fixture(rng);
    double alpha = rng.uniform(0.5, 2.0);
    return max_rel_grad_error(
        {f.heads.conf, f.heads.loc, f.heads.plate, g.heads.conf, g.heads.loc, g.heads.corner}, [&]() {
          AlpdLossBreakdown l1 = alpd_loss(f.heads, f.priors, f.matches, f.labels);
          MolprLossBreakdown l2 = molpr_loss(g.heads, g.priors, g.matches, g.labels);
          return total_loss(l1, l2, alpha);
        });
  }));

  return out;
}

}  // namespace lpdet
