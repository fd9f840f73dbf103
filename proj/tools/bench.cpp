// Kernel benchmark: serial reference vs OpenMP, on the shapes the trainer
// actually runs. Also cross-checks that both variants agree.

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "lpdet/kernels.hpp"
#include "lpdet/rng.hpp"

using namespace lpdet;

namespace {

std::vector<double> rand_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <class F>
double time_ms(F&& fn, int reps) {
  fn();  // warmup
  double t0 = omp_get_wtime();
  for (int r = 0; r < reps; ++r) fn();
  return (omp_get_wtime() - t0) * 1000.0 / reps;
}

struct Row {
  std::string name;
  double serial_ms, omp_ms, diff;
};

std::vector<Row> rows;

void report(const std::string& name, double serial_ms, double omp_ms, double diff) {
  rows.push_back({name, serial_ms, omp_ms, diff});
}

void bench_conv(const std::string& name, int n, int ic, int hw, int oc, int stride, int reps) {
  Rng rng(1);
  auto d = kernels::conv_dims(n, ic, hw, hw, oc, 3, stride, 1);
  auto in = rand_vec(static_cast<std::size_t>(n) * ic * hw * hw, rng);
  auto w = rand_vec(static_cast<std::size_t>(oc) * ic * 9, rng);
  auto b = rand_vec(static_cast<std::size_t>(oc), rng);
  std::vector<double> out_s(static_cast<std::size_t>(n) * oc * d.oh * d.ow), out_p(out_s.size());

  double ts = time_ms([&] { kernels::serial::conv2d_forward(in.data(), w.data(), b.data(), out_s.data(), d); }, reps);
  double tp = time_ms([&] { kernels::omp::conv2d_forward(in.data(), w.data(), b.data(), out_p.data(), d); }, reps);
  report(name + " fwd", ts, tp, max_abs_diff(out_s, out_p));

  auto dout = rand_vec(out_s.size(), rng);
  std::vector<double> din_s(in.size()), din_p(in.size());
  std::vector<double> dw_s(w.size()), dw_p(w.size()), db_s(b.size()), db_p(b.size());
  double tsb = time_ms(
      [&] {
        std::fill(din_s.begin(), din_s.end(), 0.0);
        std::fill(dw_s.begin(), dw_s.end(), 0.0);
        std::fill(db_s.begin(), db_s.end(), 0.0);
        kernels::serial::conv2d_backward_input(w.data(), dout.data(), din_s.data(), d);
        kernels::serial::conv2d_backward_weights(in.data(), dout.data(), dw_s.data(), db_s.data(), d);
      },
      reps);
  double tpb = time_ms(
      [&] {
        std::fill(din_p.begin(), din_p.end(), 0.0);
        std::fill(dw_p.begin(), dw_p.end(), 0.0);
        std::fill(db_p.begin(), db_p.end(), 0.0);
        kernels::omp::conv2d_backward_input(w.data(), dout.data(), din_p.data(), d);
        kernels::omp::conv2d_backward_weights(in.data(), dout.data(), dw_p.data(), db_p.data(), d);
      },
      reps);
  report(name + " bwd", tsb, tpb, std::max(max_abs_diff(din_s, din_p), max_abs_diff(dw_s, dw_p)));
}

void bench_l2norm(int reps) {
  Rng rng(2);
  int n = 4, c = 64, hw = 16 * 16;
  auto in = rand_vec(static_cast<std::size_t>(n) * c * hw, rng);
  auto sc = rand_vec(static_cast<std::size_t>(c), rng);
  std::vector<double> out_s(in.size()), out_p(in.size());
  double ts = time_ms([&] { kernels::serial::l2norm_forward(in.data(), sc.data(), out_s.data(), n, c, hw); }, reps);
  double tp = time_ms([&] { kernels::omp::l2norm_forward(in.data(), sc.data(), out_p.data(), n, c, hw); }, reps);
  report("l2norm fwd", ts, tp, max_abs_diff(out_s, out_p));
}

void bench_warp(int reps) {
  Rng rng(3);
  kernels::WarpDims d;
  d.c = 16;
  d.ih = d.iw = 128;
  d.s = 28;
  d.x0 = 0.31;
  d.y0 = 0.42;
  d.w = 0.2;
  d.h = 0.11;
  auto feat = rand_vec(static_cast<std::size_t>(d.c) * d.ih * d.iw, rng);
  std::vector<double> out_s(static_cast<std::size_t>(d.c) * d.s * d.s), out_p(out_s.size());
  double ts = time_ms([&] { kernels::serial::roi_warp_forward(feat.data(), out_s.data(), d); }, reps);
  double tp = time_ms([&] { kernels::omp::roi_warp_forward(feat.data(), out_p.data(), d); }, reps);
  report("roi_warp fwd", ts, tp, max_abs_diff(out_s, out_p));
}

void bench_pool(int reps) {
  Rng rng(4);
  auto d = kernels::pool_dims(4, 16, 128, 128, 2, 2);
  auto in = rand_vec(static_cast<std::size_t>(4) * 16 * 128 * 128, rng);
  std::vector<double> out_s(static_cast<std::size_t>(4) * 16 * 64 * 64), out_p(out_s.size());
  std::vector<int> am_s(out_s.size()), am_p(out_s.size());
  double ts = time_ms([&] { kernels::serial::maxpool_forward(in.data(), out_s.data(), am_s.data(), d); }, reps);
  double tp = time_ms([&] { kernels::omp::maxpool_forward(in.data(), out_p.data(), am_p.data(), d); }, reps);
  report("maxpool fwd", ts, tp, max_abs_diff(out_s, out_p));
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  std::printf("threads: %d, reps: %d\n\n", omp_get_max_threads(), reps);

  // batch-4 training shapes of the coarse backbone
  bench_conv("conv 3->16 @128", 4, 3, 128, 16, 1, reps);
  bench_conv("conv 16->16 @128", 4, 16, 128, 16, 1, reps);
  bench_conv("conv 32->32 @64", 4, 32, 64, 32, 1, reps);
  bench_conv("conv 32->64 s2 @32", 4, 32, 32, 64, 2, reps);
  bench_pool(reps);
  bench_l2norm(reps);
  bench_warp(reps);

  std::printf("%-22s %10s %10s %9s %12s\n", "kernel", "serial ms", "omp ms", "speedup", "max |diff|");
  bool ok = true;
  for (const auto& r : rows) {
    std::printf("%-22s %10.3f %10.3f %8.2fx %12.3e\n", r.name.c_str(), r.serial_ms, r.omp_ms,
                r.serial_ms / r.omp_ms, r.diff);
    ok = ok && r.diff < 1e-10;
  }
  if (!ok) {
    std::printf("\nFAIL: serial and OpenMP kernels disagree\n");
    return 1;
  }
  std::printf("\nall kernels agree within 1e-10\n");
  return 0;
}
