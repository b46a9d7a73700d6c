#include "m3dseg/numerics/kernels.hpp"

#include <algorithm>

#include <omp.h>

namespace m3dseg::numerics::kernels {

std::size_t Conv3dGeometry::out_extent(std::size_t n) const {
  const std::size_t padded = n + 2 * padding;
  if (stride == 0 || kernel == 0 || padded < kernel) return 0;
  if ((padded - kernel) % stride != 0) return 0;
  return (padded - kernel) / stride + 1;
}

bool Conv3dGeometry::valid() const {
  return in_channels > 0 && out_channels > 0 && out_depth() > 0 && out_height() > 0 &&
         out_width() > 0;
}

namespace {

// Range of kernel taps [lo, hi) that land inside an axis of length `n` for
// output coordinate `o`.
struct TapRange {
  std::size_t lo, hi;
};

inline TapRange taps(std::size_t o, std::size_t n, const Conv3dGeometry& g) {
  const long start = static_cast<long>(o * g.stride) - static_cast<long>(g.padding);
  const long lo = std::max(0L, -start);
  const long hi = std::min(static_cast<long>(g.kernel), static_cast<long>(n) - start);
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// First input coordinate covered by output `o`; may be negative. Callers only
// add tap offsets from taps(), which make the sum non-negative.
inline std::ptrdiff_t origin(std::size_t o, const Conv3dGeometry& g) {
  return static_cast<std::ptrdiff_t>(o * g.stride) - static_cast<std::ptrdiff_t>(g.padding);
}

// One output channel of the forward pass.
template <class T>
void conv_forward_channel(const Conv3dGeometry& g, std::size_t co, const T* in, const T* k,
                          const T* bias, T* out) {
  const std::size_t D = g.depth, H = g.height, W = g.width, K = g.kernel;
  const std::size_t OD = g.out_depth(), OH = g.out_height(), OW = g.out_width();
  for (std::size_t od = 0; od < OD; ++od) {
    const TapRange rd = taps(od, D, g);
    for (std::size_t oh = 0; oh < OH; ++oh) {
      const TapRange rh = taps(oh, H, g);
      for (std::size_t ow = 0; ow < OW; ++ow) {
        const TapRange rw = taps(ow, W, g);
        T acc = 0;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          const T* kc = k + ((co * g.in_channels + ci) * K) * K * K;
          const T* ic = in + ci * D * H * W;
          for (std::size_t kd = rd.lo; kd < rd.hi; ++kd) {
            const auto id = static_cast<std::size_t>(origin(od, g) + static_cast<std::ptrdiff_t>(kd));
            for (std::size_t kh = rh.lo; kh < rh.hi; ++kh) {
              const auto ih = static_cast<std::size_t>(origin(oh, g) + static_cast<std::ptrdiff_t>(kh));
              const T* krow = kc + (kd * K + kh) * K;
              const T* irow = ic + (id * H + ih) * W;
              for (std::size_t kw = rw.lo; kw < rw.hi; ++kw) acc += krow[kw] * irow[static_cast<std::size_t>(origin(ow, g) + static_cast<std::ptrdiff_t>(kw))];
            }
          }
        }
        out[((co * OD + od) * OH + oh) * OW + ow] = acc + bias[co];
      }
    }
  }
}

// Gradient w.r.t. one input channel (gather over every output that touches it).
template <class T>
void conv_backward_input_channel(const Conv3dGeometry& g, std::size_t ci, const T* gy,
                                 const T* k, T* gx) {
  const std::size_t D = g.depth, H = g.height, W = g.width, K = g.kernel;
  const std::size_t OD = g.out_depth(), OH = g.out_height(), OW = g.out_width();
  T* gc = gx + ci * D * H * W;
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    const T* kc = k + ((co * g.in_channels + ci) * K) * K * K;
    const T* gyc = gy + co * OD * OH * OW;
    for (std::size_t od = 0; od < OD; ++od) {
      const TapRange rd = taps(od, D, g);
      for (std::size_t oh = 0; oh < OH; ++oh) {
        const TapRange rh = taps(oh, H, g);
        for (std::size_t ow = 0; ow < OW; ++ow) {
          const TapRange rw = taps(ow, W, g);
          const T gval = gyc[(od * OH + oh) * OW + ow];
          if (gval == T(0)) continue;
          for (std::size_t kd = rd.lo; kd < rd.hi; ++kd) {
            const auto id = static_cast<std::size_t>(origin(od, g) + static_cast<std::ptrdiff_t>(kd));
            for (std::size_t kh = rh.lo; kh < rh.hi; ++kh) {
              const auto ih = static_cast<std::size_t>(origin(oh, g) + static_cast<std::ptrdiff_t>(kh));
              const T* krow = kc + (kd * K + kh) * K;
              T* grow = gc + (id * H + ih) * W;
              for (std::size_t kw = rw.lo; kw < rw.hi; ++kw) grow[static_cast<std::size_t>(origin(ow, g) + static_cast<std::ptrdiff_t>(kw))] += gval * krow[kw];
            }
          }
        }
      }
    }
  }
}

// Gradient w.r.t. the kernel slab of one output channel.
template <class T>
void conv_backward_kernel_channel(const Conv3dGeometry& g, std::size_t co, const T* gy,
                                  const T* in, T* gk) {
  const std::size_t D = g.depth, H = g.height, W = g.width, K = g.kernel;
  const std::size_t OD = g.out_depth(), OH = g.out_height(), OW = g.out_width();
  const T* gyc = gy + co * OD * OH * OW;
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    T* gkc = gk + ((co * g.in_channels + ci) * K) * K * K;
    const T* ic = in + ci * D * H * W;
    for (std::size_t od = 0; od < OD; ++od) {
      const TapRange rd = taps(od, D, g);
      for (std::size_t oh = 0; oh < OH; ++oh) {
        const TapRange rh = taps(oh, H, g);
        for (std::size_t ow = 0; ow < OW; ++ow) {
          const TapRange rw = taps(ow, W, g);
          const T gval = gyc[(od * OH + oh) * OW + ow];
          if (gval == T(0)) continue;
          for (std::size_t kd = rd.lo; kd < rd.hi; ++kd) {
            const auto id = static_cast<std::size_t>(origin(od, g) + static_cast<std::ptrdiff_t>(kd));
            for (std::size_t kh = rh.lo; kh < rh.hi; ++kh) {
              const auto ih = static_cast<std::size_t>(origin(oh, g) + static_cast<std::ptrdiff_t>(kh));
              T* krow = gkc + (kd * K + kh) * K;
              const T* irow = ic + (id * H + ih) * W;
              for (std::size_t kw = rw.lo; kw < rw.hi; ++kw) krow[kw] += gval * irow[static_cast<std::size_t>(origin(ow, g) + static_cast<std::ptrdiff_t>(kw))];
            }
          }
        }
      }
    }
  }
}

template <class T>
void dense_forward_row(const DenseGeometry& g, std::size_t i, const T* x, const T* w,
                       const T* bias, T* y) {
  const T* xi = x + i * g.x_stride();
  T* yi = y + i * g.y_stride();
  for (std::size_t o = 0; o < g.out; ++o) {
    const T* wo = w + o * g.w_stride();
    T acc = 0;
    for (std::size_t j = 0; j < g.in; ++j) acc += wo[j] * xi[j];
    yi[o] = bias ? acc + bias[o] : acc;
  }
}

template <class T>
void dense_backward_input_row(const DenseGeometry& g, std::size_t i, const T* gy, const T* w,
                              T* gx) {
  const T* gyi = gy + i * g.y_stride();
  T* gxi = gx + i * g.x_stride();
  for (std::size_t o = 0; o < g.out; ++o) {
    const T a = gyi[o];
    if (a == T(0)) continue;
    const T* wo = w + o * g.w_stride();
    for (std::size_t j = 0; j < g.in; ++j) gxi[j] += a * wo[j];
  }
}

template <class T>
void dense_backward_weight_row(const DenseGeometry& g, std::size_t o, const T* gy, const T* x,
                               T* gw) {
  T* gwo = gw + o * g.w_stride();
  for (std::size_t i = 0; i < g.rows; ++i) {
    const T a = gy[i * g.y_stride() + o];
    if (a == T(0)) continue;
    const T* xi = x + i * g.x_stride();
    for (std::size_t j = 0; j < g.in; ++j) gwo[j] += a * xi[j];
  }
}

template <class T>
T column_total(std::size_t rows, std::size_t cols, const T* m, std::size_t c) {
  T acc = 0;
  for (std::size_t i = 0; i < rows; ++i) acc += m[i * cols + c];
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------
// serial

namespace serial {

template <class T>
void conv3d_forward(const Conv3dGeometry& g, std::span<const T> input, std::span<const T> kernel,
                    std::span<const T> bias, std::span<T> output) {
  for (std::size_t co = 0; co < g.out_channels; ++co)
    conv_forward_channel(g, co, input.data(), kernel.data(), bias.data(), output.data());
}

template <class T>
void conv3d_backward_input(const Conv3dGeometry& g, std::span<const T> grad_out,
                           std::span<const T> kernel, std::span<T> grad_input) {
  for (std::size_t ci = 0; ci < g.in_channels; ++ci)
    conv_backward_input_channel(g, ci, grad_out.data(), kernel.data(), grad_input.data());
}

template <class T>
void conv3d_backward_kernel(const Conv3dGeometry& g, std::span<const T> grad_out,
                            std::span<const T> input, std::span<T> grad_kernel) {
  for (std::size_t co = 0; co < g.out_channels; ++co)
    conv_backward_kernel_channel(g, co, grad_out.data(), input.data(), grad_kernel.data());
}

template <class T>
void dense_forward(const DenseGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  for (std::size_t i = 0; i < g.rows; ++i) dense_forward_row(g, i, x, w, bias, y);
}

template <class T>
void dense_backward_input(const DenseGeometry& g, const T* grad_y, const T* w, T* grad_x) {
  for (std::size_t i = 0; i < g.rows; ++i) dense_backward_input_row(g, i, grad_y, w, grad_x);
}

template <class T>
void dense_backward_weight(const DenseGeometry& g, const T* grad_y, const T* x, T* grad_w) {
  for (std::size_t o = 0; o < g.out; ++o) dense_backward_weight_row(g, o, grad_y, x, grad_w);
}

template <class T>
void column_sum(std::size_t rows, std::size_t cols, const T* m, T* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] += column_total(rows, cols, m, c);
}

}  // namespace serial

// ---------------------------------------------------------------------------
// parallel

namespace parallel {

namespace {
// Skip the fork/join overhead when a kernel is too small to benefit.
inline bool worth_threads(std::size_t work) { return work >= 32768 && omp_get_max_threads() > 1; }
}  // namespace

template <class T>
void conv3d_forward(const Conv3dGeometry& g, std::span<const T> input, std::span<const T> kernel,
                    std::span<const T> bias, std::span<T> output) {
  const long n = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static) if (worth_threads(g.output_size() * g.kernel_size() / n))
  for (long co = 0; co < n; ++co)
    conv_forward_channel(g, static_cast<std::size_t>(co), input.data(), kernel.data(),
                         bias.data(), output.data());
}

template <class T>
void conv3d_backward_input(const Conv3dGeometry& g, std::span<const T> grad_out,
                           std::span<const T> kernel, std::span<T> grad_input) {
  const long n = static_cast<long>(g.in_channels);
#pragma omp parallel for schedule(static) if (worth_threads(g.output_size() * g.kernel_size() / g.out_channels))
  for (long ci = 0; ci < n; ++ci)
    conv_backward_input_channel(g, static_cast<std::size_t>(ci), grad_out.data(), kernel.data(),
                                grad_input.data());
}

template <class T>
void conv3d_backward_kernel(const Conv3dGeometry& g, std::span<const T> grad_out,
                            std::span<const T> input, std::span<T> grad_kernel) {
  const long n = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static) if (worth_threads(g.output_size() * g.kernel_size() / n))
  for (long co = 0; co < n; ++co)
    conv_backward_kernel_channel(g, static_cast<std::size_t>(co), grad_out.data(), input.data(),
                                 grad_kernel.data());
}

template <class T>
void dense_forward(const DenseGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const long n = static_cast<long>(g.rows);
#pragma omp parallel for schedule(static) if (worth_threads(g.rows * g.in * g.out))
  for (long i = 0; i < n; ++i) dense_forward_row(g, static_cast<std::size_t>(i), x, w, bias, y);
}

template <class T>
void dense_backward_input(const DenseGeometry& g, const T* grad_y, const T* w, T* grad_x) {
  const long n = static_cast<long>(g.rows);
#pragma omp parallel for schedule(static) if (worth_threads(g.rows * g.in * g.out))
  for (long i = 0; i < n; ++i)
    dense_backward_input_row(g, static_cast<std::size_t>(i), grad_y, w, grad_x);
}

template <class T>
void dense_backward_weight(const DenseGeometry& g, const T* grad_y, const T* x, T* grad_w) {
  const long n = static_cast<long>(g.out);
#pragma omp parallel for schedule(static) if (worth_threads(g.rows * g.in * g.out))
  for (long o = 0; o < n; ++o)
    dense_backward_weight_row(g, static_cast<std::size_t>(o), grad_y, x, grad_w);
}

template <class T>
void column_sum(std::size_t rows, std::size_t cols, const T* m, T* out) {
  const long n = static_cast<long>(cols);
#pragma omp parallel for schedule(static) if (worth_threads(rows * cols))
  for (long c = 0; c < n; ++c)
    out[c] += column_total(rows, cols, m, static_cast<std::size_t>(c));
}

}  // namespace parallel

#define M3DSEG_INSTANTIATE(NS, T)                                                             \
  template void NS::conv3d_forward<T>(const Conv3dGeometry&, std::span<const T>,              \
                                      std::span<const T>, std::span<const T>, std::span<T>);  \
  template void NS::conv3d_backward_input<T>(const Conv3dGeometry&, std::span<const T>,       \
                                             std::span<const T>, std::span<T>);               \
  template void NS::conv3d_backward_kernel<T>(const Conv3dGeometry&, std::span<const T>,      \
                                              std::span<const T>, std::span<T>);              \
  template void NS::dense_forward<T>(const DenseGeometry&, const T*, const T*, const T*, T*); \
  template void NS::dense_backward_input<T>(const DenseGeometry&, const T*, const T*, T*);    \
  template void NS::dense_backward_weight<T>(const DenseGeometry&, const T*, const T*, T*);   \
  template void NS::column_sum<T>(std::size_t, std::size_t, const T*, T*);

M3DSEG_INSTANTIATE(serial, float)
M3DSEG_INSTANTIATE(serial, double)
M3DSEG_INSTANTIATE(parallel, float)
M3DSEG_INSTANTIATE(parallel, double)

#undef M3DSEG_INSTANTIATE

}  // namespace m3dseg::numerics::kernels
