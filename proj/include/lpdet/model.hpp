#pragma once

#include <string>
#include <vector>

#include "lpdet/checkpoint.hpp"
#include "lpdet/losses.hpp"
#include "lpdet/lrea.hpp"
#include "lpdet/priors.hpp"
#include "lpdet/rng.hpp"
#include "lpdet/tensor.hpp"

namespace lpdet {

struct ConvParam {
  Tensor w, b;
  int stride = 1, pad = 1;
};

struct AlpdForward {
  AlpdHeads heads;        // rows = batch * priors
  Tensor delta_features;  // first-conv features at input resolution (B,16,S,S)
};

// Coarse-stage network. Backbone: two full-resolution 16-channel convs,
// pool, two 32-channel convs, pool, then three stride-2 64-channel convs
// feeding heads at S/8, S/16, S/32 cells. The shallowest head input is
// L2-normalized. Heads are 3x3 convs emitting (2+4+5) values per prior.
class TinyAlpd {
 public:
  TinyAlpd(int image_size, std::vector<LayerSpec> layers, Rng rng);

  AlpdForward forward(const Tensor& input) const;
  void append_params(NamedParams& out);
  const PriorSet& priors() const { return priors_; }
  int image_size() const { return image_size_; }
  int num_ratios() const { return num_ratios_; }
  int delta_channels() const { return 16; }

 private:
  int image_size_;
  int num_ratios_;
  std::vector<LayerSpec> layers_;
  PriorSet priors_;
  ConvParam c1a_, c1b_, c2a_, c2b_, c3_, c4_, c5_;
  Tensor l2scale_;
  std::vector<ConvParam> head_conf_, head_loc_, head_plate_;
};

struct MolprForward {
  MolprHeads heads;  // rows = patches * priors; tensors undefined when empty
  bool empty = true;
};

// Refinement network over warped patches: a stride-2 32-channel conv to
// S'/2 cells (first head scale), pool, two more convs at S'/4 (second head
// scale). Heads emit (2+4+8) values per prior.
class TinyMolpr {
 public:
  TinyMolpr(int patch_size, int in_channels, std::vector<LayerSpec> layers, Rng rng);

  MolprForward forward(const PatchBatch& batch) const;
  void append_params(NamedParams& out);
  const PriorSet& priors() const { return priors_; }
  int patch_size() const { return patch_size_; }

 private:
  int patch_size_;
  int num_ratios_;
  std::vector<LayerSpec> layers_;
  PriorSet priors_;
  ConvParam m1_, m2_, m3_, m4_;
  std::vector<ConvParam> head_conf_, head_loc_, head_corner_;
};

}  // namespace lpdet
