#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lpdet {

enum class DType { F32, F64 };
enum class Backend { Serial, OpenMP };

// Global engine settings. Gradient checks run at F64; training runs at F32.
namespace engine {
DType dtype();
void set_dtype(DType d);
Backend backend();
void set_backend(Backend b);
bool check_finite();
void set_check_finite(bool on);
}  // namespace engine

struct TensorImpl;

// Handle to a node in a reverse-mode gradient graph. Copying a Tensor copies
// the handle, not the buffer. One graph is single-writer: do not run ops or
// backward() on the same graph from multiple threads.
class Tensor {
 public:
  Tensor() = default;

  // Leaf constructors; dtype is taken from the engine setting.
  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from(std::vector<int> shape, const std::vector<double>& values);
  static Tensor scalar(double value);

  // Interior node: allocates a zeroed output attached to `parents`. The
  // caller fills data and then installs the backward closure.
  static Tensor node(std::vector<int> shape, std::vector<Tensor> parents);
  void set_backward(std::function<void()> fn);

  // Non-owning handle. A backward closure must capture its own node this
  // way (capturing the owning handle would cycle the graph and leak it);
  // parents are captured as owning handles.
  static Tensor borrow(TensorImpl* impl);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int dim(int i) const;
  int ndim() const;
  std::size_t numel() const;
  DType dtype() const;

  // Element access in double regardless of storage dtype. Linear row-major
  // index. Used by glue code; kernels go through data_ptr<T>().
  double value(std::size_t i) const;
  void set_value(std::size_t i, double v);
  std::vector<double> values() const;

  double grad_value(std::size_t i) const;
  void grad_add(std::size_t i, double v);
  bool has_grad() const;
  void zero_grad();

  template <class T>
  T* data_ptr();
  template <class T>
  const T* data_ptr() const;
  // Allocates the gradient buffer (zeroed) on first use.
  template <class T>
  T* grad_ptr();

  // Throws if any stored value is NaN/Inf. `what` names the producing op.
  void check_finite(const char* what) const;

  TensorImpl* raw() const { return impl_.get(); }

  friend void backward(const Tensor& loss);

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Populates grads of every node reachable from `loss` (grads accumulate
// additively across fan-out). `loss` must be scalar. Calling backward twice
// on the same loss node is an error.
void backward(const Tensor& loss);

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

struct TensorImpl {
  std::vector<int> shape;
  DType dtype = DType::F64;
  std::vector<float> data32, grad32;
  std::vector<double> data64, grad64;
  bool grad_alloc = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void()> backward_fn;
  bool backward_consumed = false;
  std::size_t numel = 0;
};

}  // namespace lpdet
