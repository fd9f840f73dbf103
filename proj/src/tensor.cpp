#include "lpdet/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace lpdet {

namespace engine {
namespace {
DType g_dtype = DType::F64;
Backend g_backend = Backend::OpenMP;
bool g_check_finite = true;
}  // namespace
DType dtype() { return g_dtype; }
void set_dtype(DType d) { g_dtype = d; }
Backend backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }
bool check_finite() { return g_check_finite; }
void set_check_finite(bool on) { g_check_finite = on; }
}  // namespace engine

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: non-positive extent in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

namespace {
std::shared_ptr<TensorImpl> make_impl(std::vector<int> shape) {
  auto impl = std::make_shared<TensorImpl>();
  impl->numel = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->dtype = engine::dtype();
  if (impl->dtype == DType::F32)
    impl->data32.assign(impl->numel, 0.0f);
  else
    impl->data64.assign(impl->numel, 0.0);
  return impl;
}
}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(make_impl(std::move(shape))); }

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(make_impl(std::move(shape)));
  for (std::size_t i = 0; i < t.numel(); ++i) t.set_value(i, value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, const std::vector<double>& values) {
  Tensor t(make_impl(std::move(shape)));
  if (values.size() != t.numel())
    throw std::invalid_argument("tensor: data length " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(t.shape()));
  for (std::size_t i = 0; i < values.size(); ++i) t.set_value(i, values[i]);
  return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::node(std::vector<int> shape, std::vector<Tensor> parents) {
  auto impl = make_impl(std::move(shape));
  impl->parents.reserve(parents.size());
  for (auto& p : parents) {
    if (!p.defined()) throw std::invalid_argument("tensor: undefined parent");
    if (p.dtype() != impl->dtype) throw std::invalid_argument("tensor: mixed dtypes in one graph");
    impl->parents.push_back(p.impl_);
  }
  return Tensor(std::move(impl));
}

void Tensor::set_backward(std::function<void()> fn) { impl_->backward_fn = std::move(fn); }

Tensor Tensor::borrow(TensorImpl* impl) {
  return Tensor(std::shared_ptr<TensorImpl>(impl, [](TensorImpl*) {}));
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
int Tensor::dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }
int Tensor::ndim() const { return static_cast<int>(impl_->shape.size()); }
std::size_t Tensor::numel() const { return impl_->numel; }
DType Tensor::dtype() const { return impl_->dtype; }

double Tensor::value(std::size_t i) const {
  return impl_->dtype == DType::F32 ? static_cast<double>(impl_->data32[i]) : impl_->data64[i];
}

void Tensor::set_value(std::size_t i, double v) {
  if (impl_->dtype == DType::F32)
    impl_->data32[i] = static_cast<float>(v);
  else
    impl_->data64[i] = v;
}

std::vector<double> Tensor::values() const {
  std::vector<double> out(numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(i);
  return out;
}

namespace {
void ensure_grad(TensorImpl* impl) {
  if (impl->grad_alloc) return;
  if (impl->dtype == DType::F32)
    impl->grad32.assign(impl->numel, 0.0f);
  else
    impl->grad64.assign(impl->numel, 0.0);
  impl->grad_alloc = true;
}
}  // namespace

double Tensor::grad_value(std::size_t i) const {
  if (!impl_->grad_alloc) return 0.0;
  return impl_->dtype == DType::F32 ? static_cast<double>(impl_->grad32[i]) : impl_->grad64[i];
}

void Tensor::grad_add(std::size_t i, double v) {
  ensure_grad(impl_.get());
  if (impl_->dtype == DType::F32)
    impl_->grad32[i] += static_cast<float>(v);
  else
    impl_->grad64[i] += v;
}

bool Tensor::has_grad() const { return impl_ && impl_->grad_alloc; }

void Tensor::zero_grad() {
  if (!impl_->grad_alloc) return;
  if (impl_->dtype == DType::F32)
    impl_->grad32.assign(impl_->numel, 0.0f);
  else
    impl_->grad64.assign(impl_->numel, 0.0);
}

template <class T>
T* Tensor::data_ptr() {
  if constexpr (std::is_same_v<T, float>) {
    if (impl_->dtype != DType::F32) throw std::logic_error("tensor: dtype mismatch (want f32)");
    return impl_->data32.data();
  } else {
    if (impl_->dtype != DType::F64) throw std::logic_error("tensor: dtype mismatch (want f64)");
    return impl_->data64.data();
  }
}

template <class T>
const T* Tensor::data_ptr() const {
  return const_cast<Tensor*>(this)->data_ptr<T>();
}

template <class T>
T* Tensor::grad_ptr() {
  ensure_grad(impl_.get());
  if constexpr (std::is_same_v<T, float>) {
    if (impl_->dtype != DType::F32) throw std::logic_error("tensor: dtype mismatch (want f32)");
    return impl_->grad32.data();
  } else {
    if (impl_->dtype != DType::F64) throw std::logic_error("tensor: dtype mismatch (want f64)");
    return impl_->grad64.data();
  }
}

template float* Tensor::data_ptr<float>();
template double* Tensor::data_ptr<double>();
template const float* Tensor::data_ptr<float>() const;
template const double* Tensor::data_ptr<double>() const;
template float* Tensor::grad_ptr<float>();
template double* Tensor::grad_ptr<double>();

void Tensor::check_finite(const char* what) const {
  if (impl_->dtype == DType::F32) {
    for (float v : impl_->data32)
      if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite value in ") + what);
  } else {
    for (double v : impl_->data64)
      if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite value in ") + what);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined tensor");
  TensorImpl* root = loss.impl_.get();
  if (root->numel != 1) throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(root->shape));
  if (root->backward_consumed) throw std::logic_error("backward: repeated backward on the same loss");
  root->backward_consumed = true;

  // Iterative DFS; colors detect cycles (gray = on stack).
  std::unordered_map<TensorImpl*, int> color;
  std::vector<TensorImpl*> topo;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  color[root] = 1;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* p = node->parents[next++].get();
      int& c = color[p];
      if (c == 1) throw std::logic_error("backward: cyclic graph");
      if (c == 0) {
        c = 1;
        stack.emplace_back(p, 0);
      }
    } else {
      color[node] = 2;
      topo.push_back(node);
      stack.pop_back();
    }
  }

  ensure_grad(root);
  if (root->dtype == DType::F32)
    root->grad32[0] = 1.0f;
  else
    root->grad64[0] = 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn();
  }
}

}  // namespace lpdet
