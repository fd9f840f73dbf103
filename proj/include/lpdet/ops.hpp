#pragma once

#include <vector>

#include "lpdet/tensor.hpp"

namespace lpdet::ops {

// All ops build graph nodes; gradients flow to every differentiable input.
// Feature maps are NCHW.

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride, int pad);
Tensor maxpool2d(const Tensor& input, int k, int stride);
Tensor relu(const Tensor& input);
Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias);
// Channelwise L2 normalization at every spatial position; `scale` holds one
// multiplier per channel.
Tensor l2norm(const Tensor& input, const Tensor& scale);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor sum(const Tensor& a);
// Columns [c0, c1) of a 2-D tensor.
Tensor slice_cols(const Tensor& a, int c0, int c1);

// Flattens per-scale head maps (N, A*K, H, W) into per-prior rows (N*P, K),
// ordered (image, layer, cell row-major, aspect ratio) to match prior
// generation order.
Tensor gather_heads(const std::vector<Tensor>& layers, int num_ratios, int k);

}  // namespace lpdet::ops
