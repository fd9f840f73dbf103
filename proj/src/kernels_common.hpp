#pragma once

#include <algorithm>
#include <cmath>

#include "lpdet/kernels.hpp"

namespace lpdet::kernels::detail {

struct Tap {
  int x0, x1, y0, y1;
  double fx, fy;
};

// Bilinear tap for patch cell (i,j). Border-clamped; both kernel variants
// must use this exact arithmetic.
inline Tap warp_tap(const WarpDims& d, int i, int j) {
  double x = d.x0 + (j + 0.5) / d.s * d.w;
  double y = d.y0 + (i + 0.5) / d.s * d.h;
  double px = x * d.iw - 0.5;
  double py = y * d.ih - 0.5;
  double fpx = std::floor(px), fpy = std::floor(py);
  Tap t;
  t.fx = px - fpx;
  t.fy = py - fpy;
  t.x0 = std::clamp(static_cast<int>(fpx), 0, d.iw - 1);
  t.x1 = std::clamp(static_cast<int>(fpx) + 1, 0, d.iw - 1);
  t.y0 = std::clamp(static_cast<int>(fpy), 0, d.ih - 1);
  t.y1 = std::clamp(static_cast<int>(fpy) + 1, 0, d.ih - 1);
  return t;
}

// Range of ow with 0 <= ow*stride - pad + kw < iw, clamped to [0, ow).
inline void ow_range(int kw, int pad, int stride, int iw, int ow, int* lo, int* hi) {
  int l = pad - kw > 0 ? (pad - kw + stride - 1) / stride : 0;
  int h = (iw - 1 + pad - kw) / stride;
  if (h > ow - 1) h = ow - 1;
  *lo = l;
  *hi = h;  // inclusive; empty when hi < lo
}

}  // namespace lpdet::kernels::detail
