#pragma once

// Raw compute kernels behind the differentiable ops. Each kernel exists twice:
// `serial` is the straightforward single-threaded reference, `parallel` splits
// the outermost loop over independent output elements with OpenMP. Both
// variants accumulate every output element in the same order, so their
// results are bit-identical (tests/unit/test_kernels.cpp checks this and
// bench/kernel_bench.cpp compares their speed).
//
// Backward kernels accumulate (+=) into their gradient outputs.

#include <cstddef>
#include <span>

namespace m3dseg::numerics::kernels {

struct Conv3dGeometry {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t depth = 1, height = 1, width = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  /// Output extent along an axis of size `n`; 0 when the configuration does
  /// not tile the padded input exactly.
  std::size_t out_extent(std::size_t n) const;
  std::size_t out_depth() const { return out_extent(depth); }
  std::size_t out_height() const { return out_extent(height); }
  std::size_t out_width() const { return out_extent(width); }
  bool valid() const;
  std::size_t input_size() const { return in_channels * depth * height * width; }
  std::size_t kernel_size() const {
    return out_channels * in_channels * kernel * kernel * kernel;
  }
  std::size_t output_size() const {
    return out_channels * out_depth() * out_height() * out_width();
  }
};

/// Dense layer on a block of rows: y[i, o] = bias[o] + sum_j w[o, j] x[i, j].
/// `ldx`/`ldw`/`ldy` are row strides so column sub-blocks can be addressed.
struct DenseGeometry {
  std::size_t rows = 1;
  std::size_t in = 1;
  std::size_t out = 1;
  std::size_t ldx = 0, ldw = 0, ldy = 0;  // 0 means dense (in, in, out)

  std::size_t x_stride() const { return ldx ? ldx : in; }
  std::size_t w_stride() const { return ldw ? ldw : in; }
  std::size_t y_stride() const { return ldy ? ldy : out; }
};

#define M3DSEG_KERNEL_DECLS                                                         \
  template <class T>                                                                \
  void conv3d_forward(const Conv3dGeometry& g, std::span<const T> input,            \
                      std::span<const T> kernel, std::span<const T> bias,           \
                      std::span<T> output);                                         \
  template <class T>                                                                \
  void conv3d_backward_input(const Conv3dGeometry& g, std::span<const T> grad_out,  \
                             std::span<const T> kernel, std::span<T> grad_input);   \
  template <class T>                                                                \
  void conv3d_backward_kernel(const Conv3dGeometry& g, std::span<const T> grad_out, \
                              std::span<const T> input, std::span<T> grad_kernel);  \
  template <class T>                                                                \
  void dense_forward(const DenseGeometry& g, const T* x, const T* w, const T* bias, \
                     T* y);                                                         \
  template <class T>                                                                \
  void dense_backward_input(const DenseGeometry& g, const T* grad_y, const T* w,    \
                            T* grad_x);                                             \
  template <class T>                                                                \
  void dense_backward_weight(const DenseGeometry& g, const T* grad_y, const T* x,   \
                             T* grad_w);                                            \
  template <class T>                                                                \
  void column_sum(std::size_t rows, std::size_t cols, const T* m, T* out);

namespace serial {
M3DSEG_KERNEL_DECLS
}  // namespace serial

namespace parallel {
M3DSEG_KERNEL_DECLS
}  // namespace parallel

#undef M3DSEG_KERNEL_DECLS

}  // namespace m3dseg::numerics::kernels
