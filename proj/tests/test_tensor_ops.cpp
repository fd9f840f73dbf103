#include <doctest.h>

#include <cstring>

#include "lpdet/ops.hpp"
#include "lpdet/tensor.hpp"
#include "testutil.hpp"

using namespace lpdet;
using testutil::gradcheck;
using testutil::random_tensor;
using testutil::Rng;

TEST_CASE("conv2d identity kernel reproduces the input") {
  Tensor in = Tensor::from({1, 1, 3, 3}, {1, 1, 1, 1, 1, 1, 1, 1, 1});
  Tensor w = Tensor::from({1, 1, 1, 1}, {1});
  Tensor b = Tensor::zeros({1});
  Tensor out = ops::conv2d(in, w, b, 1, 0);
  REQUIRE(out.shape() == std::vector<int>({1, 1, 3, 3}));
  for (std::size_t i = 0; i < 9; ++i) CHECK(out.value(i) == doctest::Approx(1.0));
}

TEST_CASE("conv2d same-padding shape arithmetic") {
  Rng rng(7);
  Tensor in = random_tensor({1, 1, 4, 4}, rng);
  Tensor w = random_tensor({1, 1, 3, 3}, rng);
  Tensor b = Tensor::zeros({1});
  Tensor out = ops::conv2d(in, w, b, 1, 1);
  CHECK(out.shape() == std::vector<int>({1, 1, 4, 4}));
  // floor((H + 2 pad - k)/stride) + 1 on a strided case
  Tensor out2 = ops::conv2d(random_tensor({1, 1, 7, 7}, rng), w, b, 2, 1);
  CHECK(out2.dim(2) == 4);
}

TEST_CASE("conv2d rejects bad arguments") {
  Rng rng(8);
  Tensor in = random_tensor({1, 2, 4, 4}, rng);
  Tensor w3 = random_tensor({1, 3, 3, 3}, rng);
  Tensor b = Tensor::zeros({1});
  CHECK_THROWS(ops::conv2d(in, w3, b, 1, 1));  // channel mismatch
  Tensor w2 = random_tensor({1, 2, 3, 3}, rng);
  CHECK_THROWS(ops::conv2d(in, w2, b, 0, 1));  // non-positive stride
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(42);
  Tensor in = random_tensor({2, 3, 8, 8}, rng);
  Tensor w = random_tensor({4, 3, 3, 3}, rng, -0.5, 0.5);
  Tensor b = random_tensor({4}, rng, -0.1, 0.1);
  Tensor mix = random_tensor({2 * 4 * 8 * 8}, rng);  // fixed projection to a scalar

  auto make_loss = [&]() {
    Tensor out = ops::conv2d(in, w, b, 1, 1);
    Tensor flat = Tensor::node({static_cast<int>(out.numel())}, {out});
    for (std::size_t i = 0; i < out.numel(); ++i) flat.set_value(i, out.value(i) * mix.value(i));
    flat.set_backward([f = Tensor::borrow(flat.raw()), out, mix]() mutable {
      for (std::size_t i = 0; i < out.numel(); ++i) out.grad_add(i, f.grad_value(i) * mix.value(i));
    });
    return ops::sum(flat);
  };
  CHECK(gradcheck({in, w, b}, make_loss) < 1e-6);
}

TEST_CASE("maxpool2d basics") {
  Tensor in = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor out = ops::maxpool2d(in, 2, 2);
  CHECK(out.numel() == 1);
  CHECK(out.value(0) == doctest::Approx(4.0));

  Tensor c = Tensor::full({1, 2, 4, 4}, 3.25);
  Tensor oc = ops::maxpool2d(c, 2, 2);
  for (std::size_t i = 0; i < oc.numel(); ++i) CHECK(oc.value(i) == doctest::Approx(3.25));

  CHECK_THROWS(ops::maxpool2d(Tensor::zeros({1, 1, 2, 2}), 3, 1));  // window larger than input
}

TEST_CASE("maxpool2d tie routes gradient to the first element row-major") {
  Tensor in = Tensor::from({1, 1, 2, 2}, {5, 5, 5, 5});
  Tensor out = ops::maxpool2d(in, 2, 2);
  backward(ops::sum(out));
  CHECK(in.grad_value(0) == doctest::Approx(1.0));
  CHECK(in.grad_value(1) == doctest::Approx(0.0));
  CHECK(in.grad_value(3) == doctest::Approx(0.0));
}

TEST_CASE("maxpool2d gradient matches finite differences on distinct values") {
  Rng rng(11);
  // distinct values keep the argmax stable under the FD step
  std::vector<double> v(1 * 2 * 6 * 6);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((i * 37) % 71) / 7.0 + rng.uniform(0, 0.01);
  Tensor in = Tensor::from({1, 2, 6, 6}, v);
  auto make_loss = [&]() { return ops::sum(ops::maxpool2d(in, 2, 2)); };
  CHECK(gradcheck({in}, make_loss) < 1e-6);
}

TEST_CASE("relu basics and gradient") {
  Tensor in = Tensor::from({2}, {-1, 2});
  Tensor out = ops::relu(in);
  CHECK(out.value(0) == doctest::Approx(0.0));
  CHECK(out.value(1) == doctest::Approx(2.0));

  Rng rng(12);
  Tensor x = random_tensor({3, 7}, rng);
  auto make_loss = [&]() { return ops::sum(ops::relu(x)); };
  CHECK(gradcheck({x}, make_loss) < 1e-6);
}

TEST_CASE("relu gradient at exactly zero is zero") {
  Tensor in = Tensor::from({1}, {0.0});
  Tensor out = ops::relu(in);
  backward(ops::sum(out));
  CHECK(in.grad_value(0) == 0.0);
}

TEST_CASE("linear identity weights pass input through") {
  Tensor in = Tensor::from({1, 3}, {1.5, -2.0, 0.25});
  Tensor w = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor b = Tensor::zeros({3});
  Tensor out = ops::linear(in, w, b);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out.value(i) == doctest::Approx(in.value(i)));
}

TEST_CASE("linear gradient matches finite differences") {
  Rng rng(13);
  Tensor in = random_tensor({4, 5}, rng);
  Tensor w = random_tensor({3, 5}, rng);
  Tensor b = random_tensor({3}, rng);
  auto make_loss = [&]() { return ops::sum(ops::linear(in, w, b)); };
  CHECK(gradcheck({in, w, b}, make_loss) < 1e-6);
}

TEST_CASE("l2norm normalizes channel vectors then applies scale") {
  // one position, channels (3,4): unit scale gives (0.6, 0.8)
  Tensor in = Tensor::from({1, 2, 1, 1}, {3, 4});
  Tensor sc = Tensor::from({2}, {1, 1});
  Tensor out = ops::l2norm(in, sc);
  CHECK(out.value(0) == doctest::Approx(0.6));
  CHECK(out.value(1) == doctest::Approx(0.8));
}

TEST_CASE("l2norm zero vector stays zero with finite gradient") {
  Tensor in = Tensor::zeros({1, 3, 1, 1});
  Tensor sc = Tensor::from({3}, {20, 20, 20});
  Tensor out = ops::l2norm(in, sc);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out.value(i) == 0.0);
  backward(ops::sum(out));
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::isfinite(in.grad_value(i)));
}

TEST_CASE("l2norm gradient matches finite differences") {
  Rng rng(14);
  Tensor in = random_tensor({2, 4, 3, 3}, rng, 0.2, 1.5);
  Tensor sc = random_tensor({4}, rng, 0.5, 2.0);
  Tensor mix = random_tensor({2 * 4 * 3 * 3}, rng);
  auto make_loss = [&]() {
    Tensor out = ops::l2norm(in, sc);
    Tensor flat = Tensor::node({static_cast<int>(out.numel())}, {out});
    for (std::size_t i = 0; i < out.numel(); ++i) flat.set_value(i, out.value(i) * mix.value(i));
    flat.set_backward([f = Tensor::borrow(flat.raw()), out, mix]() mutable {
      for (std::size_t i = 0; i < out.numel(); ++i) out.grad_add(i, f.grad_value(i) * mix.value(i));
    });
    return ops::sum(flat);
  };
  CHECK(gradcheck({in, sc}, make_loss) < 1e-5);
}

TEST_CASE("backward fills leaf grads; fan-out accumulates") {
  Tensor x = Tensor::from({4}, {1, 2, 3, 4});
  backward(ops::sum(x));
  for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad_value(i) == doctest::Approx(1.0));

  Tensor y = Tensor::from({2}, {1, 1});
  backward(ops::sum(ops::add(y, y)));
  CHECK(y.grad_value(0) == doctest::Approx(2.0));
  CHECK(y.grad_value(1) == doctest::Approx(2.0));
}

TEST_CASE("backward rejects non-scalar loss and repeated invocation") {
  Tensor x = Tensor::from({3}, {1, 2, 3});
  CHECK_THROWS(backward(x));
  Tensor s = ops::sum(x);
  backward(s);
  CHECK_THROWS(backward(s));
}

TEST_CASE("composite conv-relu-pool-linear graph passes finite differences") {
  Rng rng(21);
  Tensor in = random_tensor({1, 2, 8, 8}, rng);
  Tensor w1 = random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
  Tensor b1 = random_tensor({3}, rng, -0.2, 0.2);
  Tensor w2 = random_tensor({2, 3 * 4 * 4}, rng, -0.3, 0.3);
  Tensor b2 = random_tensor({2}, rng);

  auto make_loss = [&]() {
    Tensor h = ops::maxpool2d(ops::relu(ops::conv2d(in, w1, b1, 1, 1)), 2, 2);
    // reshape (1,3,4,4) -> (1,48) view node
    Tensor flat = Tensor::node({1, static_cast<int>(h.numel())}, {h});
    for (std::size_t i = 0; i < h.numel(); ++i) flat.set_value(i, h.value(i));
    flat.set_backward([f = Tensor::borrow(flat.raw()), h]() mutable {
      for (std::size_t i = 0; i < h.numel(); ++i) h.grad_add(i, f.grad_value(i));
    });
    return ops::sum(ops::linear(flat, w2, b2));
  };
  CHECK(gradcheck({in, w1, b1, w2, b2}, make_loss) < 1e-6);
}

TEST_CASE("forward pass is bit-deterministic") {
  Rng rng(31);
  Tensor in = random_tensor({2, 3, 9, 9}, rng);
  Tensor w = random_tensor({4, 3, 3, 3}, rng);
  Tensor b = random_tensor({4}, rng);
  Tensor o1 = ops::conv2d(in, w, b, 2, 1);
  Tensor o2 = ops::conv2d(in, w, b, 2, 1);
  REQUIRE(o1.numel() == o2.numel());
  CHECK(std::memcmp(o1.data_ptr<double>(), o2.data_ptr<double>(), o1.numel() * sizeof(double)) == 0);
}

TEST_CASE("gradient accumulation is order-independent within fp bounds") {
  Rng rng(32);
  Tensor a = random_tensor({16}, rng);
  Tensor b = random_tensor({16}, rng);

  backward(ops::sum(ops::add(a, b)));
  std::vector<double> g1(16), g2(16);
  for (int i = 0; i < 16; ++i) g1[i] = a.grad_value(i);

  a.zero_grad();
  b.zero_grad();
  backward(ops::sum(ops::add(b, a)));
  for (int i = 0; i < 16; ++i) g2[i] = a.grad_value(i);
  for (int i = 0; i < 16; ++i) CHECK(std::abs(g1[i] - g2[i]) < 1e-10);
}

TEST_CASE("finite check rejects NaN inputs to ops") {
  Tensor in = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
  in.set_value(0, std::numeric_limits<double>::quiet_NaN());
  Tensor w = Tensor::from({1, 1, 1, 1}, {1});
  Tensor b = Tensor::zeros({1});
  CHECK_THROWS(ops::conv2d(in, w, b, 1, 0));
}

TEST_CASE("slice_cols and gather_heads route values and gradients") {
  Rng rng(33);
  Tensor m = random_tensor({3, 5}, rng);
  Tensor s = ops::slice_cols(m, 1, 3);
  CHECK(s.dim(1) == 2);
  CHECK(s.value(0) == doctest::Approx(m.value(1)));
  backward(ops::sum(s));
  CHECK(m.grad_value(1) == doctest::Approx(1.0));
  CHECK(m.grad_value(0) == doctest::Approx(0.0));

  // two layers, 2 ratios, 3 channels per prior
  Tensor l0 = random_tensor({1, 6, 2, 2}, rng);
  Tensor l1 = random_tensor({1, 6, 1, 1}, rng);
  Tensor g = ops::gather_heads({l0, l1}, 2, 3);
  CHECK(g.dim(0) == 2 * 2 * 2 + 2);  // cells*ratios per layer
  CHECK(g.dim(1) == 3);
  // row 0 = layer 0, cell (0,0), ratio 0 -> channels 0..2 at (0,0)
  CHECK(g.value(0) == doctest::Approx(l0.value(0)));
  auto make_loss = [&]() { return ops::sum(ops::gather_heads({l0, l1}, 2, 3)); };
  CHECK(gradcheck({l0, l1}, make_loss) < 1e-6);
}
