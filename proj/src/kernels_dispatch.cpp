#include "lpdet/kernels.hpp"

namespace lpdet::kernels {

#define LPDET_DISPATCH(fn, ...)                     \
  if (engine::backend() == Backend::OpenMP)         \
    omp::fn(__VA_ARGS__);                           \
  else                                              \
    serial::fn(__VA_ARGS__);

template <class T>
void conv2d_forward(const T* in, const T* w, const T* b, T* out, const ConvDims& d) {
  LPDET_DISPATCH(conv2d_forward, in, w, b, out, d)
}
template <class T>
void conv2d_backward_input(const T* w, const T* dout, T* din, const ConvDims& d) {
  LPDET_DISPATCH(conv2d_backward_input, w, dout, din, d)
}
template <class T>
void conv2d_backward_weights(const T* in, const T* dout, T* dw, T* db, const ConvDims& d) {
  LPDET_DISPATCH(conv2d_backward_weights, in, dout, dw, db, d)
}
template <class T>
void maxpool_forward(const T* in, T* out, int* argmax, const PoolDims& d) {
  LPDET_DISPATCH(maxpool_forward, in, out, argmax, d)
}
template <class T>
void maxpool_backward(const T* dout, const int* argmax, T* din, std::size_t n_out) {
  LPDET_DISPATCH(maxpool_backward, dout, argmax, din, n_out)
}
template <class T>
void relu_forward(const T* in, T* out, std::size_t n) {
  LPDET_DISPATCH(relu_forward, in, out, n)
}
template <class T>
void relu_backward(const T* in, const T* dout, T* din, std::size_t n) {
  LPDET_DISPATCH(relu_backward, in, dout, din, n)
}
template <class T>
void linear_forward(const T* in, const T* w, const T* b, T* out, int n, int fin, int fout) {
  LPDET_DISPATCH(linear_forward, in, w, b, out, n, fin, fout)
}
template <class T>
void linear_backward(const T* in, const T* w, const T* dout, T* din, T* dw, T* db, int n, int fin, int fout) {
  LPDET_DISPATCH(linear_backward, in, w, dout, din, dw, db, n, fin, fout)
}
template <class T>
void l2norm_forward(const T* in, const T* scale, T* out, int n, int c, int hw) {
  LPDET_DISPATCH(l2norm_forward, in, scale, out, n, c, hw)
}
template <class T>
void l2norm_backward(const T* in, const T* scale, const T* dout, T* din, T* dscale, int n, int c, int hw) {
  LPDET_DISPATCH(l2norm_backward, in, scale, dout, din, dscale, n, c, hw)
}
template <class T>
void roi_warp_forward(const T* feat, T* out, const WarpDims& d) {
  LPDET_DISPATCH(roi_warp_forward, feat, out, d)
}
template <class T>
void roi_warp_backward(const T* dout, T* dfeat, const WarpDims& d) {
  LPDET_DISPATCH(roi_warp_backward, dout, dfeat, d)
}
template <class T>
void roi_warp_backward_coords(const T* feat, const T* dout, double* dcoord, const WarpDims& d) {
  LPDET_DISPATCH(roi_warp_backward_coords, feat, dout, dcoord, d)
}

#undef LPDET_DISPATCH

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

}  // namespace lpdet::kernels
