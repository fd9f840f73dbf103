// Naive reference kernels. These are the semantics the OpenMP kernels are
// tested against; keep them simple, not fast.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kernels_common.hpp"
#include "lpdet/kernels.hpp"

namespace lpdet::kernels {

ConvDims conv_dims(int n, int ic, int ih, int iw, int oc, int k, int stride, int pad) {
  if (stride <= 0) throw std::invalid_argument("conv2d: non-positive stride");
  if (k <= 0 || pad < 0) throw std::invalid_argument("conv2d: bad kernel/pad");
  ConvDims d{n, ic, ih, iw, oc, k, stride, pad, 0, 0};
  d.oh = (ih + 2 * pad - k) / stride + 1;
  d.ow = (iw + 2 * pad - k) / stride + 1;
  if (d.oh <= 0 || d.ow <= 0) throw std::invalid_argument("conv2d: kernel larger than padded input");
  return d;
}

PoolDims pool_dims(int n, int c, int ih, int iw, int k, int stride) {
  if (stride <= 0 || k <= 0) throw std::invalid_argument("maxpool2d: bad kernel/stride");
  if (k > ih || k > iw) throw std::invalid_argument("maxpool2d: window larger than input");
  PoolDims d{n, c, ih, iw, k, stride, 0, 0};
  d.oh = (ih - k) / stride + 1;
  d.ow = (iw - k) / stride + 1;
  return d;
}

namespace serial {

template <class T>
void conv2d_forward(const T* in, const T* w, const T* b, T* out, const ConvDims& d) {
  for (int n = 0; n < d.n; ++n)
    for (int oc = 0; oc < d.oc; ++oc)
      for (int oh = 0; oh < d.oh; ++oh)
        for (int ow = 0; ow < d.ow; ++ow) {
          T acc = b[oc];
          for (int ic = 0; ic < d.ic; ++ic)
            for (int kh = 0; kh < d.k; ++kh)
              for (int kw = 0; kw < d.k; ++kw) {
                int ih = oh * d.stride - d.pad + kh;
                int iw = ow * d.stride - d.pad + kw;
                if (ih < 0 || ih >= d.ih || iw < 0 || iw >= d.iw) continue;
                acc += w[((oc * d.ic + ic) * d.k + kh) * d.k + kw] *
                       in[((n * d.ic + ic) * d.ih + ih) * d.iw + iw];
              }
          out[((n * d.oc + oc) * d.oh + oh) * d.ow + ow] = acc;
        }
}

template <class T>
void conv2d_backward_input(const T* w, const T* dout, T* din, const ConvDims& d) {
  for (int n = 0; n < d.n; ++n)
    for (int ic = 0; ic < d.ic; ++ic)
      for (int ih = 0; ih < d.ih; ++ih)
        for (int iw = 0; iw < d.iw; ++iw) {
          T acc = 0;
          for (int oc = 0; oc < d.oc; ++oc)
            for (int kh = 0; kh < d.k; ++kh)
              for (int kw = 0; kw < d.k; ++kw) {
                int th = ih + d.pad - kh;
                int tw = iw + d.pad - kw;
                if (th < 0 || tw < 0 || th % d.stride || tw % d.stride) continue;
                int oh = th / d.stride, ow = tw / d.stride;
                if (oh >= d.oh || ow >= d.ow) continue;
                acc += w[((oc * d.ic + ic) * d.k + kh) * d.k + kw] *
                       dout[((n * d.oc + oc) * d.oh + oh) * d.ow + ow];
              }
          din[((n * d.ic + ic) * d.ih + ih) * d.iw + iw] += acc;
        }
}

template <class T>
void conv2d_backward_weights(const T* in, const T* dout, T* dw, T* db, const ConvDims& d) {
  for (int oc = 0; oc < d.oc; ++oc) {
    for (int ic = 0; ic < d.ic; ++ic)
      for (int kh = 0; kh < d.k; ++kh)
        for (int kw = 0; kw < d.k; ++kw) {
          T acc = 0;
          for (int n = 0; n < d.n; ++n)
            for (int oh = 0; oh < d.oh; ++oh)
              for (int ow = 0; ow < d.ow; ++ow) {
                int ih = oh * d.stride - d.pad + kh;
                int iw = ow * d.stride - d.pad + kw;
                if (ih < 0 || ih >= d.ih || iw < 0 || iw >= d.iw) continue;
                acc += in[((n * d.ic + ic) * d.ih + ih) * d.iw + iw] *
                       dout[((n * d.oc + oc) * d.oh + oh) * d.ow + ow];
              }
          dw[((oc * d.ic + ic) * d.k + kh) * d.k + kw] += acc;
        }
    T acc = 0;
    for (int n = 0; n < d.n; ++n)
      for (int oh = 0; oh < d.oh; ++oh)
        for (int ow = 0; ow < d.ow; ++ow) acc += dout[((n * d.oc + oc) * d.oh + oh) * d.ow + ow];
    db[oc] += acc;
  }
}

template <class T>
void maxpool_forward(const T* in, T* out, int* argmax, const PoolDims& d) {
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c)
      for (int oh = 0; oh < d.oh; ++oh)
        for (int ow = 0; ow < d.ow; ++ow) {
          int best = -1;
          T bv = 0;
          for (int kh = 0; kh < d.k; ++kh)
            for (int kw = 0; kw < d.k; ++kw) {
              int ih = oh * d.stride + kh;
              int iw = ow * d.stride + kw;
              int idx = ((n * d.c + c) * d.ih + ih) * d.iw + iw;
              // strict > keeps the first element in row-major order on ties
              if (best < 0 || in[idx] > bv) {
                best = idx;
                bv = in[idx];
              }
            }
          std::size_t o = static_cast<std::size_t>(((n * d.c + c) * d.oh + oh) * d.ow + ow);
          out[o] = bv;
          argmax[o] = best;
        }
}

template <class T>
void maxpool_backward(const T* dout, const int* argmax, T* din, std::size_t n_out) {
  for (std::size_t i = 0; i < n_out; ++i) din[argmax[i]] += dout[i];
}

template <class T>
void relu_forward(const T* in, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <class T>
void relu_backward(const T* in, const T* dout, T* din, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (in[i] > T(0)) din[i] += dout[i];
}

template <class T>
void linear_forward(const T* in, const T* w, const T* b, T* out, int n, int fin, int fout) {
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < fout; ++o) {
      T acc = b[o];
      for (int f = 0; f < fin; ++f) acc += in[i * fin + f] * w[o * fin + f];
      out[i * fout + o] = acc;
    }
}

template <class T>
void linear_backward(const T* in, const T* w, const T* dout, T* din, T* dw, T* db, int n, int fin, int fout) {
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < fin; ++f) {
      T acc = 0;
      for (int o = 0; o < fout; ++o) acc += dout[i * fout + o] * w[o * fin + f];
      din[i * fin + f] += acc;
    }
  for (int o = 0; o < fout; ++o) {
    for (int f = 0; f < fin; ++f) {
      T acc = 0;
      for (int i = 0; i < n; ++i) acc += dout[i * fout + o] * in[i * fin + f];
      dw[o * fin + f] += acc;
    }
    T acc = 0;
    for (int i = 0; i < n; ++i) acc += dout[i * fout + o];
    db[o] += acc;
  }
}

template <class T>
void l2norm_forward(const T* in, const T* scale, T* out, int n, int c, int hw) {
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < hw; ++p) {
      T r = 0;
      for (int ch = 0; ch < c; ++ch) {
        T v = in[(i * c + ch) * hw + p];
        r += v * v;
      }
      T denom = std::sqrt(r) + T(kL2NormEps);
      for (int ch = 0; ch < c; ++ch) {
        std::size_t idx = static_cast<std::size_t>((i * c + ch) * hw + p);
        out[idx] = in[idx] * scale[ch] / denom;
      }
    }
}

template <class T>
void l2norm_backward(const T* in, const T* scale, const T* dout, T* din, T* dscale, int n, int c, int hw) {
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < hw; ++p) {
      T r = 0;
      for (int ch = 0; ch < c; ++ch) {
        T v = in[(i * c + ch) * hw + p];
        r += v * v;
      }
      T s = std::sqrt(r);
      T denom = s + T(kL2NormEps);
      T inv_sd2 = s > T(0) ? T(1) / (s * denom * denom) : T(0);
      T dot = 0;  // sum_c dout_c * scale_c * x_c
      for (int ch = 0; ch < c; ++ch) {
        std::size_t idx = static_cast<std::size_t>((i * c + ch) * hw + p);
        dot += dout[idx] * scale[ch] * in[idx];
        dscale[ch] += dout[idx] * in[idx] / denom;
      }
      for (int ch = 0; ch < c; ++ch) {
        std::size_t idx = static_cast<std::size_t>((i * c + ch) * hw + p);
        din[idx] += dout[idx] * scale[ch] / denom - in[idx] * inv_sd2 * dot;
      }
    }
}

using detail::Tap;
using detail::warp_tap;

template <class T>
void roi_warp_forward(const T* feat, T* out, const WarpDims& d) {
  for (int c = 0; c < d.c; ++c)
    for (int i = 0; i < d.s; ++i)
      for (int j = 0; j < d.s; ++j) {
        Tap t = warp_tap(d, i, j);
        const T* f = feat + static_cast<std::size_t>(c) * d.ih * d.iw;
        double v00 = f[t.y0 * d.iw + t.x0], v01 = f[t.y0 * d.iw + t.x1];
        double v10 = f[t.y1 * d.iw + t.x0], v11 = f[t.y1 * d.iw + t.x1];
        double v = (1 - t.fy) * ((1 - t.fx) * v00 + t.fx * v01) + t.fy * ((1 - t.fx) * v10 + t.fx * v11);
        out[(c * d.s + i) * d.s + j] = static_cast<T>(v);
      }
}

template <class T>
void roi_warp_backward(const T* dout, T* dfeat, const WarpDims& d) {
  for (int c = 0; c < d.c; ++c)
    for (int i = 0; i < d.s; ++i)
      for (int j = 0; j < d.s; ++j) {
        Tap t = warp_tap(d, i, j);
        T g = dout[(c * d.s + i) * d.s + j];
        T* f = dfeat + static_cast<std::size_t>(c) * d.ih * d.iw;
        f[t.y0 * d.iw + t.x0] += static_cast<T>((1 - t.fy) * (1 - t.fx)) * g;
        f[t.y0 * d.iw + t.x1] += static_cast<T>((1 - t.fy) * t.fx) * g;
        f[t.y1 * d.iw + t.x0] += static_cast<T>(t.fy * (1 - t.fx)) * g;
        f[t.y1 * d.iw + t.x1] += static_cast<T>(t.fy * t.fx) * g;
      }
}

template <class T>
void roi_warp_backward_coords(const T* feat, const T* dout, double* dcoord, const WarpDims& d) {
  for (int c = 0; c < d.c; ++c)
    for (int i = 0; i < d.s; ++i)
      for (int j = 0; j < d.s; ++j) {
        Tap t = warp_tap(d, i, j);
        const T* f = feat + static_cast<std::size_t>(c) * d.ih * d.iw;
        double v00 = f[t.y0 * d.iw + t.x0], v01 = f[t.y0 * d.iw + t.x1];
        double v10 = f[t.y1 * d.iw + t.x0], v11 = f[t.y1 * d.iw + t.x1];
        double g = dout[(c * d.s + i) * d.s + j];
        double dv_dpx = (1 - t.fy) * (v01 - v00) + t.fy * (v11 - v10);
        double dv_dpy = (1 - t.fx) * (v10 - v00) + t.fx * (v11 - v01);
        double gx = g * dv_dpx * d.iw;  // d(px)/d(x) = iw
        double gy = g * dv_dpy * d.ih;
        dcoord[0] += gx;                        // x0
        dcoord[1] += gy;                        // y0
        dcoord[2] += gx * (j + 0.5) / d.s;      // w
        dcoord[3] += gy * (i + 0.5) / d.s;      // h
      }
}

#define LPDET_INSTANTIATE(T)                                                                       \
  template void conv2d_forward<T>(const T*, const T*, const T*, T*, const ConvDims&);              \
  template void conv2d_backward_input<T>(const T*, const T*, T*, const ConvDims&);                 \
  template void conv2d_backward_weights<T>(const T*, const T*, T*, T*, const ConvDims&);           \
  template void maxpool_forward<T>(const T*, T*, int*, const PoolDims&);                           \
  template void maxpool_backward<T>(const T*, const int*, T*, std::size_t);                        \
  template void relu_forward<T>(const T*, T*, std::size_t);                                        \
  template void relu_backward<T>(const T*, const T*, T*, std::size_t);                             \
  template void linear_forward<T>(const T*, const T*, const T*, T*, int, int, int);                \
  template void linear_backward<T>(const T*, const T*, const T*, T*, T*, T*, int, int, int);       \
  template void l2norm_forward<T>(const T*, const T*, T*, int, int, int);                          \
  template void l2norm_backward<T>(const T*, const T*, const T*, T*, T*, int, int, int);           \
  template void roi_warp_forward<T>(const T*, T*, const WarpDims&);                                \
  template void roi_warp_backward<T>(const T*, T*, const WarpDims&);                               \
  template void roi_warp_backward_coords<T>(const T*, const T*, double*, const WarpDims&);

LPDET_INSTANTIATE(float)
LPDET_INSTANTIATE(double)
#undef LPDET_INSTANTIATE

}  // namespace serial
}  // namespace lpdet::kernels
