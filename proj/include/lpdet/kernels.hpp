#pragma once

#include "lpdet/tensor.hpp"

namespace lpdet::kernels {

// Dense NCHW convolution geometry. oh/ow are derived by conv_dims().
struct ConvDims {
  int n, ic, ih, iw;
  int oc, k, stride, pad;
  int oh, ow;
};

ConvDims conv_dims(int n, int ic, int ih, int iw, int oc, int k, int stride, int pad);

struct PoolDims {
  int n, c, ih, iw;
  int k, stride;
  int oh, ow;
};

PoolDims pool_dims(int n, int c, int ih, int iw, int k, int stride);

// Bilinear region resampling. Sample grid is region-uniform: output cell
// (i,j) samples the image point (x0 + (j+.5)/S*w, y0 + (i+.5)/S*h) in
// normalized [0,1] coordinates, clamped to the feature border.
struct WarpDims {
  int c, ih, iw;  // source feature map (one image)
  int s;          // output patch is s x s
  double x0, y0, w, h;
};

// Every kernel below has a serial reference implementation and an OpenMP
// one. Both compute each output element with identical arithmetic order, so
// results are bit-identical regardless of thread count. Backward kernels
// accumulate (+=) into the destination gradient.

namespace serial {
template <class T>
void conv2d_forward(const T* in, const T* w, const T* b, T* out, const ConvDims& d);
template <class T>
void conv2d_backward_input(const T* w, const T* dout, T* din, const ConvDims& d);
template <class T>
void conv2d_backward_weights(const T* in, const T* dout, T* dw, T* db, const ConvDims& d);
template <class T>
void maxpool_forward(const T* in, T* out, int* argmax, const PoolDims& d);
template <class T>
void maxpool_backward(const T* dout, const int* argmax, T* din, std::size_t n_out);
template <class T>
void relu_forward(const T* in, T* out, std::size_t n);
template <class T>
void relu_backward(const T* in, const T* dout, T* din, std::size_t n);
template <class T>
void linear_forward(const T* in, const T* w, const T* b, T* out, int n, int fin, int fout);
template <class T>
void linear_backward(const T* in, const T* w, const T* dout, T* din, T* dw, T* db, int n, int fin, int fout);
template <class T>
void l2norm_forward(const T* in, const T* scale, T* out, int n, int c, int hw);
template <class T>
void l2norm_backward(const T* in, const T* scale, const T* dout, T* din, T* dscale, int n, int c, int hw);
template <class T>
void roi_warp_forward(const T* feat, T* out, const WarpDims& d);
template <class T>
void roi_warp_backward(const T* dout, T* dfeat, const WarpDims& d);
// d(sum of out*dout)/d(x0,y0,w,h); used when region-coordinate gradients
// are enabled. Adds into dcoord[4].
template <class T>
void roi_warp_backward_coords(const T* feat, const T* dout, double* dcoord, const WarpDims& d);
}  // namespace serial

namespace omp {
template <class T>
void conv2d_forward(const T* in, const T* w, const T* b, T* out, const ConvDims& d);
template <class T>
void conv2d_backward_input(const T* w, const T* dout, T* din, const ConvDims& d);
template <class T>
void conv2d_backward_weights(const T* in, const T* dout, T* dw, T* db, const ConvDims& d);
template <class T>
void maxpool_forward(const T* in, T* out, int* argmax, const PoolDims& d);
template <class T>
void maxpool_backward(const T* dout, const int* argmax, T* din, std::size_t n_out);
template <class T>
void relu_forward(const T* in, T* out, std::size_t n);
template <class T>
void relu_backward(const T* in, const T* dout, T* din, std::size_t n);
template <class T>
void linear_forward(const T* in, const T* w, const T* b, T* out, int n, int fin, int fout);
template <class T>
void linear_backward(const T* in, const T* w, const T* dout, T* din, T* dw, T* db, int n, int fin, int fout);
template <class T>
void l2norm_forward(const T* in, const T* scale, T* out, int n, int c, int hw);
template <class T>
void l2norm_backward(const T* in, const T* scale, const T* dout, T* din, T* dscale, int n, int c, int hw);
template <class T>
void roi_warp_forward(const T* feat, T* out, const WarpDims& d);
template <class T>
void roi_warp_backward(const T* dout, T* dfeat, const WarpDims& d);
template <class T>
void roi_warp_backward_coords(const T* feat, const T* dout, double* dcoord, const WarpDims& d);
}  // namespace omp

// Dispatch on engine::backend().
template <class T>
void conv2d_forward(const T* in, const T* w, const T* b, T* out, const ConvDims& d);
template <class T>
void conv2d_backward_input(const T* w, const T* dout, T* din, const ConvDims& d);
template <class T>
void conv2d_backward_weights(const T* in, const T* dout, T* dw, T* db, const ConvDims& d);
template <class T>
void maxpool_forward(const T* in, T* out, int* argmax, const PoolDims& d);
template <class T>
void maxpool_backward(const T* dout, const int* argmax, T* din, std::size_t n_out);
template <class T>
void relu_forward(const T* in, T* out, std::size_t n);
template <class T>
void relu_backward(const T* in, const T* dout, T* din, std::size_t n);
template <class T>
void linear_forward(const T* in, const T* w, const T* b, T* out, int n, int fin, int fout);
template <class T>
void linear_backward(const T* in, const T* w, const T* dout, T* din, T* dw, T* db, int n, int fin, int fout);
template <class T>
void l2norm_forward(const T* in, const T* scale, T* out, int n, int c, int hw);
template <class T>
void l2norm_backward(const T* in, const T* scale, const T* dout, T* din, T* dscale, int n, int c, int hw);
template <class T>
void roi_warp_forward(const T* feat, T* out, const WarpDims& d);
template <class T>
void roi_warp_backward(const T* dout, T* dfeat, const WarpDims& d);
template <class T>
void roi_warp_backward_coords(const T* feat, const T* dout, double* dcoord, const WarpDims& d);

constexpr double kL2NormEps = 1e-10;

}  // namespace lpdet::kernels
