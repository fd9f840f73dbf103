#include "lpdet/model.hpp"

#include <cmath>
#include <stdexcept>

#include "lpdet/ops.hpp"

namespace lpdet {

namespace {

Tensor init_conv_weight(int oc, int ic, int k, Rng& rng) {
  // fan-in scaled uniform
  double bound = 1.0 / std::sqrt(static_cast<double>(ic) * k * k);
  std::vector<double> v(static_cast<std::size_t>(oc) * ic * k * k);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from({oc, ic, k, k}, v);
}

ConvParam make_conv(int oc, int ic, int k, int stride, int pad, Rng& rng) {
  ConvParam p;
  p.w = init_conv_weight(oc, ic, k, rng);
  p.b = Tensor::zeros({oc});
  p.stride = stride;
  p.pad = pad;
  return p;
}

// Prediction heads start near zero (normal, sd 0.01) so initial logits sit
// at their biases and initial regressions at the priors.
ConvParam make_head_conv(int oc, int ic, Rng& rng) {
  ConvParam p;
  std::vector<double> v(static_cast<std::size_t>(oc) * ic * 9);
  for (auto& x : v) x = rng.normal(0.0, 0.01);
  p.w = Tensor::from({oc, ic, 3, 3}, v);
  p.b = Tensor::zeros({oc});
  p.stride = 1;
  p.pad = 1;
  return p;
}

// Head biases start detection-negative so an untrained net emits nothing:
// background logit +2 per ratio, has-plate logit -2.
void bias_background(ConvParam& conf_head, int per_ratio, int channel, double value) {
  for (int c = channel; c < conf_head.b.dim(0); c += per_ratio) conf_head.b.set_value(static_cast<std::size_t>(c), value);
}

Tensor conv_block(const Tensor& x, const ConvParam& p) { return ops::relu(ops::conv2d(x, p.w, p.b, p.stride, p.pad)); }

void append_conv(NamedParams& out, const std::string& name, ConvParam& p) {
  out.emplace_back(name + ".w", p.w);
  out.emplace_back(name + ".b", p.b);
}

}  // namespace

TinyAlpd::TinyAlpd(int image_size, std::vector<LayerSpec> layers, Rng rng)
    : image_size_(image_size), layers_(std::move(layers)) {
  if (layers_.size() != 3) throw std::invalid_argument("TinyAlpd: expected three head scales");
  if (image_size_ % 32 != 0) throw std::invalid_argument("TinyAlpd: image size must be a multiple of 32");
  int grids[3] = {image_size_ / 8, image_size_ / 16, image_size_ / 32};
  num_ratios_ = static_cast<int>(layers_[0].ratios.size());
  for (int i = 0; i < 3; ++i) {
    if (layers_[static_cast<std::size_t>(i)].grid != grids[i])
      throw std::invalid_argument("TinyAlpd: prior grid does not match the head layout (want " +
                                  std::to_string(grids[i]) + ")");
    if (static_cast<int>(layers_[static_cast<std::size_t>(i)].ratios.size()) != num_ratios_)
      throw std::invalid_argument("TinyAlpd: all scales must share the aspect-ratio count");
  }
  priors_ = generate_priors(layers_);

  c1a_ = make_conv(16, 3, 3, 1, 1, rng);
  c1b_ = make_conv(16, 16, 3, 1, 1, rng);
  c2a_ = make_conv(32, 16, 3, 1, 1, rng);
  c2b_ = make_conv(32, 32, 3, 1, 1, rng);
  c3_ = make_conv(64, 32, 3, 2, 1, rng);
  c4_ = make_conv(64, 64, 3, 2, 1, rng);
  c5_ = make_conv(64, 64, 3, 2, 1, rng);
  l2scale_ = Tensor::full({64}, 20.0);

  for (int s = 0; s < 3; ++s) {
    head_conf_.push_back(make_head_conv(num_ratios_ * 2, 64, rng));
    bias_background(head_conf_.back(), 2, 0, 2.0);
    head_loc_.push_back(make_head_conv(num_ratios_ * 4, 64, rng));
    head_plate_.push_back(make_head_conv(num_ratios_ * 5, 64, rng));
    bias_background(head_plate_.back(), 5, 0, -2.0);
  }
}

AlpdForward TinyAlpd::forward(const Tensor& input) const {
  if (input.ndim() != 4 || input.dim(1) != 3 || input.dim(2) != image_size_ || input.dim(3) != image_size_)
    throw std::invalid_argument("TinyAlpd: input must be (B,3," + std::to_string(image_size_) + "," +
                                std::to_string(image_size_) + ")");

  Tensor delta = conv_block(input, c1a_);
  Tensor x = ops::maxpool2d(conv_block(delta, c1b_), 2, 2);
  x = ops::maxpool2d(conv_block(conv_block(x, c2a_), c2b_), 2, 2);
  Tensor f1 = conv_block(x, c3_);
  Tensor f1n = ops::l2norm(f1, l2scale_);
  Tensor f2 = conv_block(f1, c4_);
  Tensor f3 = conv_block(f2, c5_);

  const Tensor* feats[3] = {&f1n, &f2, &f3};
  std::vector<Tensor> conf_maps, loc_maps, plate_maps;
  for (int s = 0; s < 3; ++s) {
    const auto& f = *feats[s];
    conf_maps.push_back(ops::conv2d(f, head_conf_[static_cast<std::size_t>(s)].w, head_conf_[static_cast<std::size_t>(s)].b, 1, 1));
    loc_maps.push_back(ops::conv2d(f, head_loc_[static_cast<std::size_t>(s)].w, head_loc_[static_cast<std::size_t>(s)].b, 1, 1));
    plate_maps.push_back(ops::conv2d(f, head_plate_[static_cast<std::size_t>(s)].w, head_plate_[static_cast<std::size_t>(s)].b, 1, 1));
  }

  AlpdForward out;
  out.heads.conf = ops::gather_heads(conf_maps, num_ratios_, 2);
  out.heads.loc = ops::gather_heads(loc_maps, num_ratios_, 4);
  out.heads.plate = ops::gather_heads(plate_maps, num_ratios_, 5);
  out.delta_features = delta;
  return out;
}

void TinyAlpd::append_params(NamedParams& out) {
  append_conv(out, "alpd.conv1a", c1a_);
  append_conv(out, "alpd.conv1b", c1b_);
  append_conv(out, "alpd.conv2a", c2a_);
  append_conv(out, "alpd.conv2b", c2b_);
  append_conv(out, "alpd.conv3", c3_);
  append_conv(out, "alpd.conv4", c4_);
  append_conv(out, "alpd.conv5", c5_);
  out.emplace_back("alpd.l2norm.scale", l2scale_);
  for (int s = 0; s < 3; ++s) {
    std::string base = "alpd.head" + std::to_string(s);
    append_conv(out, base + ".conf", head_conf_[static_cast<std::size_t>(s)]);
    append_conv(out, base + ".loc", head_loc_[static_cast<std::size_t>(s)]);
    append_conv(out, base + ".plate", head_plate_[static_cast<std::size_t>(s)]);
  }
}

TinyMolpr::TinyMolpr(int patch_size, int in_channels, std::vector<LayerSpec> layers, Rng rng)
    : patch_size_(patch_size), layers_(std::move(layers)) {
  if (layers_.size() != 2) throw std::invalid_argument("TinyMolpr: expected two head scales");
  if (patch_size_ % 4 != 0) throw std::invalid_argument("TinyMolpr: patch size must be a multiple of 4");
  int grids[2] = {patch_size_ / 2, patch_size_ / 4};
  num_ratios_ = static_cast<int>(layers_[0].ratios.size());
  for (int i = 0; i < 2; ++i) {
    if (layers_[static_cast<std::size_t>(i)].grid != grids[i])
      throw std::invalid_argument("TinyMolpr: prior grid does not match the head layout (want " +
                                  std::to_string(grids[i]) + ")");
    if (static_cast<int>(layers_[static_cast<std::size_t>(i)].ratios.size()) != num_ratios_)
      throw std::invalid_argument("TinyMolpr: all scales must share the aspect-ratio count");
  }
  priors_ = generate_priors(layers_);

  m1_ = make_conv(32, in_channels, 3, 2, 1, rng);
  m2_ = make_conv(32, 32, 3, 1, 1, rng);
  m3_ = make_conv(32, 32, 3, 1, 1, rng);
  m4_ = make_conv(32, 32, 3, 1, 1, rng);
  for (int s = 0; s < 2; ++s) {
    head_conf_.push_back(make_head_conv(num_ratios_ * 2, 32, rng));
    bias_background(head_conf_.back(), 2, 0, 2.0);
    head_loc_.push_back(make_head_conv(num_ratios_ * 4, 32, rng));
    head_corner_.push_back(make_head_conv(num_ratios_ * 8, 32, rng));
  }
}

MolprForward TinyMolpr::forward(const PatchBatch& batch) const {
  MolprForward out;
  if (batch.empty()) return out;
  const Tensor& patches = batch.patches;
  if (patches.dim(2) != patch_size_ || patches.dim(3) != patch_size_)
    throw std::invalid_argument("TinyMolpr: patch size mismatch");

  Tensor s0 = conv_block(conv_block(patches, m1_), m2_);           // S'/2
  Tensor s1 = conv_block(conv_block(ops::maxpool2d(s0, 2, 2), m3_), m4_);  // S'/4

  const Tensor* feats[2] = {&s0, &s1};
  std::vector<Tensor> conf_maps, loc_maps, corner_maps;
  for (int s = 0; s < 2; ++s) {
    const auto& f = *feats[s];
    conf_maps.push_back(ops::conv2d(f, head_conf_[static_cast<std::size_t>(s)].w, head_conf_[static_cast<std::size_t>(s)].b, 1, 1));
    loc_maps.push_back(ops::conv2d(f, head_loc_[static_cast<std::size_t>(s)].w, head_loc_[static_cast<std::size_t>(s)].b, 1, 1));
    corner_maps.push_back(ops::conv2d(f, head_corner_[static_cast<std::size_t>(s)].w, head_corner_[static_cast<std::size_t>(s)].b, 1, 1));
  }
  out.heads.conf = ops::gather_heads(conf_maps, num_ratios_, 2);
  out.heads.loc = ops::gather_heads(loc_maps, num_ratios_, 4);
  out.heads.corner = ops::gather_heads(corner_maps, num_ratios_, 8);
  out.empty = false;
  return out;
}

void TinyMolpr::append_params(NamedParams& out) {
  append_conv(out, "molpr.conv1", m1_);
  append_conv(out, "molpr.conv2", m2_);
  append_conv(out, "molpr.conv3", m3_);
  append_conv(out, "molpr.conv4", m4_);
  for (int s = 0; s < 2; ++s) {
    std::string base = "molpr.head" + std::to_string(s);
    append_conv(out, base + ".conf", head_conf_[static_cast<std::size_t>(s)]);
    append_conv(out, base + ".loc", head_loc_[static_cast<std::size_t>(s)]);
    append_conv(out, base + ".corner", head_corner_[static_cast<std::size_t>(s)]);
  }
}

}  // namespace lpdet
