// Serial vs OpenMP timings of the conv and dense kernels at the shapes the
// desk preset actually runs, plus a bit-identity check of every pair.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "m3dseg/numerics/kernels.hpp"

namespace k = m3dseg::numerics::kernels;

namespace {

std::vector<float> noise(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<float> d;
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double seconds_per_call(const std::function<void()>& fn, int repeat) {
  fn();
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeat; ++i) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / repeat;
}

struct Row {
  std::string name;
  std::function<void(bool parallel, std::vector<float>& out)> run;
  std::size_t out_size;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs parallel kernel benchmark"};
  int repeat = 20;
  app.add_option("--repeat", repeat, "Calls per measurement")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  std::mt19937_64 rng(7);
  std::vector<Row> rows;

  // First and second desk conv layers on a 16³ grid.
  for (auto geo : {k::Conv3dGeometry{1, 16, 16, 16, 16, 4, 2, 1}, k::Conv3dGeometry{16, 32, 8, 8, 8, 4, 2, 1}}) {
    auto x = std::make_shared<std::vector<float>>(noise(geo.input_size(), rng));
    auto w = std::make_shared<std::vector<float>>(noise(geo.kernel_size(), rng));
    auto b = std::make_shared<std::vector<float>>(noise(geo.out_channels, rng));
    auto gy = std::make_shared<std::vector<float>>(noise(geo.output_size(), rng));
    const std::string tag = std::to_string(geo.in_channels) + "->" + std::to_string(geo.out_channels) + " @" +
                            std::to_string(geo.depth) + "^3";
    rows.push_back({"conv3d_forward " + tag,
                    [=](bool par, std::vector<float>& out) {
                      (par ? k::parallel::conv3d_forward<float> : k::serial::conv3d_forward<float>)(
                          geo, *x, *w, *b, out);
                    },
                    geo.output_size()});
    rows.push_back({"conv3d_backward_input " + tag,
                    [=](bool par, std::vector<float>& out) {
                      std::fill(out.begin(), out.end(), 0.0f);
                      (par ? k::parallel::conv3d_backward_input<float> : k::serial::conv3d_backward_input<float>)(
                          geo, *gy, *w, out);
                    },
                    geo.input_size()});
    rows.push_back({"conv3d_backward_kernel " + tag,
                    [=](bool par, std::vector<float>& out) {
                      std::fill(out.begin(), out.end(), 0.0f);
                      (par ? k::parallel::conv3d_backward_kernel<float> : k::serial::conv3d_backward_kernel<float>)(
                          geo, *gy, *x, out);
                    },
                    geo.kernel_size()});
  }

  // Predictor first layer over every cell of a 16³ grid.
  const k::DenseGeometry dense{4096, 131, 32};
  auto dx = std::make_shared<std::vector<float>>(noise(dense.rows * dense.in, rng));
  auto dw = std::make_shared<std::vector<float>>(noise(dense.out * dense.in, rng));
  auto db = std::make_shared<std::vector<float>>(noise(dense.out, rng));
  auto dgy = std::make_shared<std::vector<float>>(noise(dense.rows * dense.out, rng));
  rows.push_back({"dense_forward 4096x131->32",
                  [=](bool par, std::vector<float>& out) {
                    (par ? k::parallel::dense_forward<float> : k::serial::dense_forward<float>)(
                        dense, dx->data(), dw->data(), db->data(), out.data());
                  },
                  dense.rows * dense.out});
  rows.push_back({"dense_backward_input",
                  [=](bool par, std::vector<float>& out) {
                    std::fill(out.begin(), out.end(), 0.0f);
                    (par ? k::parallel::dense_backward_input<float> : k::serial::dense_backward_input<float>)(
                        dense, dgy->data(), dw->data(), out.data());
                  },
                  dense.rows * dense.in});
  rows.push_back({"dense_backward_weight",
                  [=](bool par, std::vector<float>& out) {
                    std::fill(out.begin(), out.end(), 0.0f);
                    (par ? k::parallel::dense_backward_weight<float> : k::serial::dense_backward_weight<float>)(
                        dense, dgy->data(), dx->data(), out.data());
                  },
                  dense.out * dense.in});

  std::printf("threads: %d\n%-40s %12s %12s %8s %s\n", omp_get_max_threads(), "kernel", "serial ms", "parallel ms",
              "speedup", "identical");
  bool all_identical = true;
  for (const Row& r : rows) {
    std::vector<float> a(r.out_size), b(r.out_size);
    const double ts = seconds_per_call([&] { r.run(false, a); }, repeat);
    const double tp = seconds_per_call([&] { r.run(true, b); }, repeat);
    const bool same = std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
    all_identical = all_identical && same;
    std::printf("%-40s %12.3f %12.3f %8.2f %s\n", r.name.c_str(), 1e3 * ts, 1e3 * tp, ts / tp, same ? "yes" : "NO");
  }
  return all_identical ? 0 : 1;
}
