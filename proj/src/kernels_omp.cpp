// OpenMP kernels. All loops are gather-form: each output element is owned by
// exactly one thread and accumulated in a fixed order, so results do not
// depend on the thread count.

#include <cmath>

#include "kernels_common.hpp"
#include "lpdet/kernels.hpp"

namespace lpdet::kernels::omp {

using detail::ow_range;
using detail::Tap;
using detail::warp_tap;

template <class T>
void conv2d_forward(const T* in, const T* w, const T* b, T* out, const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < d.n; ++n)
    for (int oc = 0; oc < d.oc; ++oc)
      for (int oh = 0; oh < d.oh; ++oh) {
        T* orow = out + (static_cast<std::size_t>(n) * d.oc + oc) * d.oh * d.ow + static_cast<std::size_t>(oh) * d.ow;
        for (int ow = 0; ow < d.ow; ++ow) orow[ow] = b[oc];
        for (int ic = 0; ic < d.ic; ++ic)
          for (int kh = 0; kh < d.k; ++kh) {
            int ih = oh * d.stride - d.pad + kh;
            if (ih < 0 || ih >= d.ih) continue;
            const T* irow = in + (static_cast<std::size_t>(n) * d.ic + ic) * d.ih * d.iw + static_cast<std::size_t>(ih) * d.iw;
            const T* wrow = w + ((static_cast<std::size_t>(oc) * d.ic + ic) * d.k + kh) * d.k;
            for (int kw = 0; kw < d.k; ++kw) {
              int lo, hi;
              ow_range(kw, d.pad, d.stride, d.iw, d.ow, &lo, &hi);
              const T wv = wrow[kw];
              const T* ip = irow + (static_cast<std::ptrdiff_t>(lo) * d.stride - d.pad + kw);
              if (d.stride == 1) {
                for (int ow = lo; ow <= hi; ++ow) orow[ow] += wv * ip[ow - lo];
              } else {
                for (int ow = lo; ow <= hi; ++ow) orow[ow] += wv * ip[static_cast<std::ptrdiff_t>(ow - lo) * d.stride];
              }
            }
          }
      }
}

template <class T>
void conv2d_backward_input(const T* w, const T* dout, T* din, const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < d.n; ++n)
    for (int ic = 0; ic < d.ic; ++ic) {
      T* dslab = din + (static_cast<std::size_t>(n) * d.ic + ic) * d.ih * d.iw;
      for (int oc = 0; oc < d.oc; ++oc)
        for (int kh = 0; kh < d.k; ++kh) {
          const T* wrow = w + ((static_cast<std::size_t>(oc) * d.ic + ic) * d.k + kh) * d.k;
          for (int oh = 0; oh < d.oh; ++oh) {
            int ih = oh * d.stride - d.pad + kh;
            if (ih < 0 || ih >= d.ih) continue;
            T* drow = dslab + static_cast<std::size_t>(ih) * d.iw;
            const T* gorow = dout + (static_cast<std::size_t>(n) * d.oc + oc) * d.oh * d.ow + static_cast<std::size_t>(oh) * d.ow;
            for (int kw = 0; kw < d.k; ++kw) {
              int lo, hi;
              ow_range(kw, d.pad, d.stride, d.iw, d.ow, &lo, &hi);
              const T wv = wrow[kw];
              T* dp = drow + (static_cast<std::ptrdiff_t>(lo) * d.stride - d.pad + kw);
              if (d.stride == 1) {
                for (int ow = lo; ow <= hi; ++ow) dp[ow - lo] += wv * gorow[ow];
              } else {
                for (int ow = lo; ow <= hi; ++ow) dp[static_cast<std::ptrdiff_t>(ow - lo) * d.stride] += wv * gorow[ow];
              }
            }
          }
        }
    }
}

template <class T>
void conv2d_backward_weights(const T* in, const T* dout, T* dw, T* db, const ConvDims& d) {
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < d.oc; ++oc) {
    for (int ic = 0; ic < d.ic; ++ic)
      for (int kh = 0; kh < d.k; ++kh)
        for (int kw = 0; kw < d.k; ++kw) {
          T acc = 0;
          for (int n = 0; n < d.n; ++n)
            for (int oh = 0; oh < d.oh; ++oh) {
              int ih = oh * d.stride - d.pad + kh;
              if (ih < 0 || ih >= d.ih) continue;
              int lo, hi;
              ow_range(kw, d.pad, d.stride, d.iw, d.ow, &lo, &hi);
              const T* irow = in + (static_cast<std::size_t>(n) * d.ic + ic) * d.ih * d.iw + static_cast<std::size_t>(ih) * d.iw;
              const T* gorow = dout + (static_cast<std::size_t>(n) * d.oc + oc) * d.oh * d.ow + static_cast<std::size_t>(oh) * d.ow;
              const T* ip = irow + (static_cast<std::ptrdiff_t>(lo) * d.stride - d.pad + kw);
              if (d.stride == 1) {
                for (int ow = lo; ow <= hi; ++ow) acc += ip[ow - lo] * gorow[ow];
              } else {
                for (int ow = lo; ow <= hi; ++ow) acc += ip[static_cast<std::ptrdiff_t>(ow - lo) * d.stride] * gorow[ow];
              }
            }
          dw[((static_cast<std::size_t>(oc) * d.ic + ic) * d.k + kh) * d.k + kw] += acc;
        }
    T acc = 0;
    const T* g = dout + static_cast<std::size_t>(oc) * d.oh * d.ow;
    for (int n = 0; n < d.n; ++n) {
      const T* gn = g + static_cast<std::size_t>(n) * d.oc * d.oh * d.ow;
      for (int i = 0; i < d.oh * d.ow; ++i) acc += gn[i];
    }
    db[oc] += acc;
  }
}

template <class T>
void maxpool_forward(const T* in, T* out, int* argmax, const PoolDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c)
      for (int oh = 0; oh < d.oh; ++oh)
        for (int ow = 0; ow < d.ow; ++ow) {
          int best = -1;
          T bv = 0;
          for (int kh = 0; kh < d.k; ++kh) {
            int ih = oh * d.stride + kh;
            const T* irow = in + (static_cast<std::size_t>(n) * d.c + c) * d.ih * d.iw + static_cast<std::size_t>(ih) * d.iw;
            for (int kw = 0; kw < d.k; ++kw) {
              int iw = ow * d.stride + kw;
              if (best < 0 || irow[iw] > bv) {
                best = ((n * d.c + c) * d.ih + ih) * d.iw + iw;
                bv = irow[iw];
              }
            }
          }
          std::size_t o = static_cast<std::size_t>(((n * d.c + c) * d.oh + oh) * d.ow + ow);
          out[o] = bv;
          argmax[o] = best;
        }
}

// Scatter through argmax; kept serial (memory-bound, negligible next to conv).
template <class T>
void maxpool_backward(const T* dout, const int* argmax, T* din, std::size_t n_out) {
  for (std::size_t i = 0; i < n_out; ++i) din[argmax[i]] += dout[i];
}

template <class T>
void relu_forward(const T* in, T* out, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <class T>
void relu_backward(const T* in, const T* dout, T* din, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    if (in[i] > T(0)) din[i] += dout[i];
}

template <class T>
void linear_forward(const T* in, const T* w, const T* b, T* out, int n, int fin, int fout) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < fout; ++o) {
      T acc = b[o];
      const T* irow = in + static_cast<std::size_t>(i) * fin;
      const T* wrow = w + static_cast<std::size_t>(o) * fin;
      for (int f = 0; f < fin; ++f) acc += irow[f] * wrow[f];
      out[static_cast<std::size_t>(i) * fout + o] = acc;
    }
}

template <class T>
void linear_backward(const T* in, const T* w, const T* dout, T* din, T* dw, T* db, int n, int fin, int fout) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < fin; ++f) {
      T acc = 0;
      for (int o = 0; o < fout; ++o) acc += dout[static_cast<std::size_t>(i) * fout + o] * w[static_cast<std::size_t>(o) * fin + f];
      din[static_cast<std::size_t>(i) * fin + f] += acc;
    }
#pragma omp parallel for schedule(static)
  for (int o = 0; o < fout; ++o) {
    for (int f = 0; f < fin; ++f) {
      T acc = 0;
      for (int i = 0; i < n; ++i) acc += dout[static_cast<std::size_t>(i) * fout + o] * in[static_cast<std::size_t>(i) * fin + f];
      dw[static_cast<std::size_t>(o) * fin + f] += acc;
    }
    T acc = 0;
    for (int i = 0; i < n; ++i) acc += dout[static_cast<std::size_t>(i) * fout + o];
    db[o] += acc;
  }
}

template <class T>
void l2norm_forward(const T* in, const T* scale, T* out, int n, int c, int hw) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < hw; ++p) {
      T r = 0;
      for (int ch = 0; ch < c; ++ch) {
        T v = in[(static_cast<std::size_t>(i) * c + ch) * hw + p];
        r += v * v;
      }
      T denom = std::sqrt(r) + T(kL2NormEps);
      for (int ch = 0; ch < c; ++ch) {
        std::size_t idx = (static_cast<std::size_t>(i) * c + ch) * hw + p;
        out[idx] = in[idx] * scale[ch] / denom;
      }
    }
}

template <class T>
void l2norm_backward(const T* in, const T* scale, const T* dout, T* din, T* dscale, int n, int c, int hw) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < hw; ++p) {
      T r = 0;
      for (int ch = 0; ch < c; ++ch) {
        T v = in[(static_cast<std::size_t>(i) * c + ch) * hw + p];
        r += v * v;
      }
      T s = std::sqrt(r);
      T denom = s + T(kL2NormEps);
      T inv_sd2 = s > T(0) ? T(1) / (s * denom * denom) : T(0);
      T dot = 0;
      for (int ch = 0; ch < c; ++ch) {
        std::size_t idx = (static_cast<std::size_t>(i) * c + ch) * hw + p;
        dot += dout[idx] * scale[ch] * in[idx];
      }
      for (int ch = 0; ch < c; ++ch) {
        std::size_t idx = (static_cast<std::size_t>(i) * c + ch) * hw + p;
        din[idx] += dout[idx] * scale[ch] / denom - in[idx] * inv_sd2 * dot;
      }
    }
  // dscale reduced per channel in a second gather pass
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    T acc = 0;
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < hw; ++p) {
        T r = 0;
        for (int cc = 0; cc < c; ++cc) {
          T v = in[(static_cast<std::size_t>(i) * c + cc) * hw + p];
          r += v * v;
        }
        T denom = std::sqrt(r) + T(kL2NormEps);
        std::size_t idx = (static_cast<std::size_t>(i) * c + ch) * hw + p;
        acc += dout[idx] * in[idx] / denom;
      }
    dscale[ch] += acc;
  }
}

template <class T>
void roi_warp_forward(const T* feat, T* out, const WarpDims& d) {
#pragma omp parallel for schedule(static)
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

// Scatter into dfeat is split by channel: patch channel c only touches
// feature channel c, so threads never share a destination.
template <class T>
void roi_warp_backward(const T* dout, T* dfeat, const WarpDims& d) {
#pragma omp parallel for schedule(static)
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
  // Four shared scalars; serial reference is already cheap at S=28.
  serial::roi_warp_backward_coords(feat, dout, dcoord, d);
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

}  // namespace lpdet::kernels::omp
