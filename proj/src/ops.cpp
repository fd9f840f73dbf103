#include "lpdet/ops.hpp"

#include <memory>
#include <stdexcept>

#include "lpdet/kernels.hpp"

namespace lpdet::ops {

namespace {

void expect(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <class T>
void conv2d_run(Tensor& out, Tensor& in, Tensor& w, Tensor& b, const kernels::ConvDims& d) {
  kernels::conv2d_forward(in.data_ptr<T>(), w.data_ptr<T>(), b.data_ptr<T>(), out.data_ptr<T>(), d);
}

template <class T>
void conv2d_back(Tensor& out, Tensor& in, Tensor& w, Tensor& b, const kernels::ConvDims& d) {
  const T* g = out.grad_ptr<T>();
  kernels::conv2d_backward_input(w.data_ptr<T>(), g, in.grad_ptr<T>(), d);
  kernels::conv2d_backward_weights(in.data_ptr<T>(), g, w.grad_ptr<T>(), b.grad_ptr<T>(), d);
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride, int pad) {
  expect(input.ndim() == 4, "conv2d: input must be NCHW");
  expect(weights.ndim() == 4, "conv2d: weights must be (oc, ic, k, k)");
  expect(weights.dim(2) == weights.dim(3), "conv2d: kernel must be square");
  expect(weights.dim(1) == input.dim(1), "conv2d: channel mismatch");
  expect(bias.ndim() == 1 && bias.dim(0) == weights.dim(0), "conv2d: bias/out-channel mismatch");
  auto d = kernels::conv_dims(input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                              weights.dim(0), weights.dim(2), stride, pad);

  Tensor out = Tensor::node({d.n, d.oc, d.oh, d.ow}, {input, weights, bias});
  Tensor in = input, w = weights, b = bias;
  if (out.dtype() == DType::F32)
    conv2d_run<float>(out, in, w, b, d);
  else
    conv2d_run<double>(out, in, w, b, d);
  if (engine::check_finite()) out.check_finite("conv2d");
  out.set_backward([o = Tensor::borrow(out.raw()), in, w, b, d]() mutable {
    if (o.dtype() == DType::F32)
      conv2d_back<float>(o, in, w, b, d);
    else
      conv2d_back<double>(o, in, w, b, d);
  });
  return out;
}

Tensor maxpool2d(const Tensor& input, int k, int stride) {
  expect(input.ndim() == 4, "maxpool2d: input must be NCHW");
  auto d = kernels::pool_dims(input.dim(0), input.dim(1), input.dim(2), input.dim(3), k, stride);
  Tensor out = Tensor::node({d.n, d.c, d.oh, d.ow}, {input});
  auto argmax = std::make_shared<std::vector<int>>(out.numel());
  Tensor in = input;
  if (out.dtype() == DType::F32)
    kernels::maxpool_forward(in.data_ptr<float>(), out.data_ptr<float>(), argmax->data(), d);
  else
    kernels::maxpool_forward(in.data_ptr<double>(), out.data_ptr<double>(), argmax->data(), d);
  out.set_backward([o = Tensor::borrow(out.raw()), in, argmax]() mutable {
    if (o.dtype() == DType::F32)
      kernels::maxpool_backward(o.grad_ptr<float>(), argmax->data(), in.grad_ptr<float>(), o.numel());
    else
      kernels::maxpool_backward(o.grad_ptr<double>(), argmax->data(), in.grad_ptr<double>(), o.numel());
  });
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out = Tensor::node(input.shape(), {input});
  Tensor in = input;
  if (out.dtype() == DType::F32)
    kernels::relu_forward(in.data_ptr<float>(), out.data_ptr<float>(), out.numel());
  else
    kernels::relu_forward(in.data_ptr<double>(), out.data_ptr<double>(), out.numel());
  out.set_backward([o = Tensor::borrow(out.raw()), in]() mutable {
    if (o.dtype() == DType::F32)
      kernels::relu_backward(in.data_ptr<float>(), o.grad_ptr<float>(), in.grad_ptr<float>(), o.numel());
    else
      kernels::relu_backward(in.data_ptr<double>(), o.grad_ptr<double>(), in.grad_ptr<double>(), o.numel());
  });
  return out;
}

Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  expect(input.ndim() == 2, "linear: input must be (n, fin)");
  expect(weights.ndim() == 2 && weights.dim(1) == input.dim(1), "linear: shape mismatch");
  expect(bias.ndim() == 1 && bias.dim(0) == weights.dim(0), "linear: bias mismatch");
  int n = input.dim(0), fin = input.dim(1), fout = weights.dim(0);
  Tensor out = Tensor::node({n, fout}, {input, weights, bias});
  Tensor in = input, w = weights, b = bias;
  if (out.dtype() == DType::F32)
    kernels::linear_forward(in.data_ptr<float>(), w.data_ptr<float>(), b.data_ptr<float>(), out.data_ptr<float>(), n, fin, fout);
  else
    kernels::linear_forward(in.data_ptr<double>(), w.data_ptr<double>(), b.data_ptr<double>(), out.data_ptr<double>(), n, fin, fout);
  if (engine::check_finite()) out.check_finite("linear");
  out.set_backward([o = Tensor::borrow(out.raw()), in, w, b, n, fin, fout]() mutable {
    if (o.dtype() == DType::F32)
      kernels::linear_backward(in.data_ptr<float>(), w.data_ptr<float>(), o.grad_ptr<float>(), in.grad_ptr<float>(),
                               w.grad_ptr<float>(), b.grad_ptr<float>(), n, fin, fout);
    else
      kernels::linear_backward(in.data_ptr<double>(), w.data_ptr<double>(), o.grad_ptr<double>(), in.grad_ptr<double>(),
                               w.grad_ptr<double>(), b.grad_ptr<double>(), n, fin, fout);
  });
  return out;
}

Tensor l2norm(const Tensor& input, const Tensor& scale) {
  expect(input.ndim() == 4, "l2norm: input must be NCHW");
  expect(scale.ndim() == 1 && scale.dim(0) == input.dim(1), "l2norm: one scale per channel");
  int n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  Tensor out = Tensor::node(input.shape(), {input, scale});
  Tensor in = input, sc = scale;
  if (out.dtype() == DType::F32)
    kernels::l2norm_forward(in.data_ptr<float>(), sc.data_ptr<float>(), out.data_ptr<float>(), n, c, hw);
  else
    kernels::l2norm_forward(in.data_ptr<double>(), sc.data_ptr<double>(), out.data_ptr<double>(), n, c, hw);
  if (engine::check_finite()) out.check_finite("l2norm");
  out.set_backward([o = Tensor::borrow(out.raw()), in, sc, n, c, hw]() mutable {
    if (o.dtype() == DType::F32)
      kernels::l2norm_backward(in.data_ptr<float>(), sc.data_ptr<float>(), o.grad_ptr<float>(), in.grad_ptr<float>(),
                               sc.grad_ptr<float>(), n, c, hw);
    else
      kernels::l2norm_backward(in.data_ptr<double>(), sc.data_ptr<double>(), o.grad_ptr<double>(), in.grad_ptr<double>(),
                               sc.grad_ptr<double>(), n, c, hw);
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  expect(a.shape() == b.shape(), "add: shape mismatch");
  Tensor out = Tensor::node(a.shape(), {a, b});
  for (std::size_t i = 0; i < out.numel(); ++i) out.set_value(i, a.value(i) + b.value(i));
  out.set_backward([o = Tensor::borrow(out.raw()), a = a, b = b]() mutable {
    for (std::size_t i = 0; i < o.numel(); ++i) {
      double g = o.grad_value(i);
      a.grad_add(i, g);
      b.grad_add(i, g);
    }
  });
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::node(a.shape(), {a});
  for (std::size_t i = 0; i < out.numel(); ++i) out.set_value(i, a.value(i) * c);
  out.set_backward([o = Tensor::borrow(out.raw()), a = a, c]() mutable {
    for (std::size_t i = 0; i < o.numel(); ++i) a.grad_add(i, o.grad_value(i) * c);
  });
  return out;
}

Tensor sum(const Tensor& a) {
  Tensor out = Tensor::node({1}, {a});
  double acc = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a.value(i);
  out.set_value(0, acc);
  out.set_backward([o = Tensor::borrow(out.raw()), a = a]() mutable {
    double g = o.grad_value(0);
    for (std::size_t i = 0; i < a.numel(); ++i) a.grad_add(i, g);
  });
  return out;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
  expect(a.ndim() == 2, "slice_cols: input must be 2-D");
  expect(0 <= c0 && c0 < c1 && c1 <= a.dim(1), "slice_cols: bad column range");
  int rows = a.dim(0), cols = a.dim(1), k = c1 - c0;
  Tensor out = Tensor::node({rows, k}, {a});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < k; ++c)
      out.set_value(static_cast<std::size_t>(r) * k + c, a.value(static_cast<std::size_t>(r) * cols + c0 + c));
  out.set_backward([o = Tensor::borrow(out.raw()), a = a, rows, cols, k, c0]() mutable {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < k; ++c)
        a.grad_add(static_cast<std::size_t>(r) * cols + c0 + c, o.grad_value(static_cast<std::size_t>(r) * k + c));
  });
  return out;
}

Tensor gather_heads(const std::vector<Tensor>& layers, int num_ratios, int k) {
  expect(!layers.empty(), "gather_heads: no layers");
  int n = layers[0].dim(0);
  std::size_t priors_per_image = 0;
  for (const auto& t : layers) {
    expect(t.ndim() == 4, "gather_heads: head maps must be NCHW");
    expect(t.dim(0) == n, "gather_heads: inconsistent batch");
    expect(t.dim(1) == num_ratios * k, "gather_heads: channel count must be ratios*k");
    priors_per_image += static_cast<std::size_t>(t.dim(2)) * t.dim(3) * num_ratios;
  }
  Tensor out = Tensor::node({static_cast<int>(priors_per_image) * n, k}, layers);

  auto for_each = [layers, n, num_ratios, k](auto&& fn) {
    std::size_t row = 0;
    for (int img = 0; img < n; ++img)
      for (const auto& t : layers) {
        int h = t.dim(2), w = t.dim(3);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            for (int a = 0; a < num_ratios; ++a) {
              for (int c = 0; c < k; ++c) {
                std::size_t src = ((static_cast<std::size_t>(img) * num_ratios * k + a * k + c) * h + y) * w + x;
                fn(t, src, row * k + c);
              }
              ++row;
            }
      }
  };

  for_each([&out](const Tensor& t, std::size_t src, std::size_t dst) { out.set_value(dst, t.value(src)); });
  out.set_backward([o = Tensor::borrow(out.raw()), for_each]() mutable {
    for_each([&o](const Tensor& t, std::size_t src, std::size_t dst) {
      Tensor parent = t;
      parent.grad_add(src, o.grad_value(dst));
    });
  });
  return out;
}

}  // namespace lpdet::ops
