#include "m3dseg/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "m3dseg/numerics/kernels.hpp"

namespace m3dseg::numerics {

namespace kp = kernels::parallel;

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw NumericsError(msg);
}

Graph& graph_of(std::initializer_list<Var> vars, const char* op) {
  Graph* g = nullptr;
  for (const Var& v : vars) {
    require(v.valid(), std::string(op) + ": unbound variable");
    if (!g) g = v.graph();
    require(v.graph() == g, std::string(op) + ": variables from different graphs");
    require(v.value().precision() == vars.begin()->value().precision(),
            std::string(op) + ": mixed tensor precisions");
  }
  return *g;
}

void require_same_shape(Var a, Var b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
}

template <class T>
const T* cptr(const Tensor& t) {
  return t.data<T>().data();
}

template <class T>
T* mptr(Tensor& t) {
  return t.data<T>().data();
}

// Elementwise unary op; `fwd(x)` computes y, `dydx(x, y)` the local derivative.
template <class Fwd, class Deriv>
Var unary(Var x, const char* name, Fwd fwd, Deriv dydx) {
  Graph& g = graph_of({x}, name);
  Tensor out(x.shape(), x.value().precision());
  dispatch(out.precision(), [&]<class T>() {
    auto xs = x.value().data<T>();
    auto ys = out.data<T>();
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = fwd(xs[i]);
  });
  return g.record(name, {x}, std::move(out), [dydx](Graph& gr, std::size_t id) {
    const std::size_t xi = gr.input(id, 0);
    const Tensor& gy = gr.grad_of(id);
    dispatch(gy.precision(), [&]<class T>() {
      auto xs = gr.value_of(xi).data<T>();
      auto ys = gr.value_of(id).data<T>();
      auto gys = gy.data<T>();
      auto gxs = gr.grad_slot(xi).data<T>();
      for (std::size_t i = 0; i < gxs.size(); ++i) gxs[i] += gys[i] * dydx(xs[i], ys[i]);
    });
  });
}

template <class T>
T stable_sigmoid(T x) {
  T y;
  if (x >= T(0)) {
    y = T(1) / (T(1) + std::exp(-x));
  } else {
    const T e = std::exp(x);
    y = e / (T(1) + e);
  }
  constexpr T lo = std::numeric_limits<T>::min();
  const T hi = std::nextafter(T(1), T(0));
  return std::clamp(y, lo, hi);
}

}  // namespace

Var conv3d(Var input, Var kernel, Var bias, std::size_t stride, std::size_t padding) {
  Graph& g = graph_of({input, kernel, bias}, "conv3d");
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  require(xs.size() == 4, "conv3d: input must be [C, D, H, W], got " + shape_string(xs));
  require(ks.size() == 5 && ks[2] == ks[3] && ks[3] == ks[4],
          "conv3d: kernel must be [C_out, C_in, k, k, k], got " + shape_string(ks));
  require(ks[1] == xs[0], "conv3d: kernel expects " + std::to_string(ks[1]) +
                              " input channels, input has " + std::to_string(xs[0]));
  require(bias.shape() == Shape{ks[0]}, "conv3d: bias must be [C_out]");
  kernels::Conv3dGeometry geo{xs[0], ks[0], xs[1], xs[2], xs[3], ks[2], stride, padding};
  require(stride > 0 && geo.valid(),
          "conv3d: output size is not a positive integer for input " + shape_string(xs) +
              ", kernel " + std::to_string(ks[2]) + ", stride " + std::to_string(stride) +
              ", padding " + std::to_string(padding));

  Tensor out({geo.out_channels, geo.out_depth(), geo.out_height(), geo.out_width()},
             input.value().precision());
  dispatch(out.precision(), [&]<class T>() {
    kp::conv3d_forward<T>(geo, input.value().data<T>(), kernel.value().data<T>(),
                          bias.value().data<T>(), out.data<T>());
  });
  return g.record("conv3d", {input, kernel, bias}, std::move(out),
                  [geo](Graph& gr, std::size_t id) {
                    const std::size_t xi = gr.input(id, 0), ki = gr.input(id, 1),
                                      bi = gr.input(id, 2);
                    const Tensor& gy = gr.grad_of(id);
                    dispatch(gy.precision(), [&]<class T>() {
                      if (gr.needs_grad(xi))
                        kp::conv3d_backward_input<T>(geo, gy.data<T>(), gr.value_of(ki).data<T>(),
                                                     gr.grad_slot(xi).data<T>());
                      if (gr.needs_grad(ki))
                        kp::conv3d_backward_kernel<T>(geo, gy.data<T>(), gr.value_of(xi).data<T>(),
                                                      gr.grad_slot(ki).data<T>());
                      if (gr.needs_grad(bi)) {
                        const std::size_t spatial = gy.size() / geo.out_channels;
                        auto gb = gr.grad_slot(bi).data<T>();
                        auto gys = gy.data<T>();
                        for (std::size_t c = 0; c < geo.out_channels; ++c) {
                          T acc = 0;
                          for (std::size_t s = 0; s < spatial; ++s) acc += gys[c * spatial + s];
                          gb[c] += acc;
                        }
                      }
                    });
                  });
}

Var linear(Var x, Var weight, Var bias) {
  Graph& g = graph_of({x, weight, bias}, "linear");
  const Shape& ws = weight.shape();
  require(ws.size() == 2, "linear: weight must be [m, n], got " + shape_string(ws));
  const std::size_t m = ws[0], n = ws[1];
  require(bias.shape() == Shape{m}, "linear: bias must be [" + std::to_string(m) + "], got " +
                                        shape_string(bias.shape()));
  const Shape& xs = x.shape();
  const bool batched = xs.size() == 2;
  require((xs.size() == 1 && xs[0] == n) || (batched && xs[1] == n),
          "linear: input " + shape_string(xs) + " does not match weight " + shape_string(ws));
  const kernels::DenseGeometry geo{batched ? xs[0] : 1, n, m};
  Tensor out(batched ? Shape{xs[0], m} : Shape{m}, x.value().precision());
  dispatch(out.precision(), [&]<class T>() {
    kp::dense_forward<T>(geo, cptr<T>(x.value()), cptr<T>(weight.value()), cptr<T>(bias.value()),
                         mptr<T>(out));
  });
  return g.record("linear", {x, weight, bias}, std::move(out), [geo](Graph& gr, std::size_t id) {
    const std::size_t xi = gr.input(id, 0), wi = gr.input(id, 1), bi = gr.input(id, 2);
    const Tensor& gy = gr.grad_of(id);
    dispatch(gy.precision(), [&]<class T>() {
      if (gr.needs_grad(xi))
        kp::dense_backward_input<T>(geo, cptr<T>(gy), cptr<T>(gr.value_of(wi)),
                                    mptr<T>(gr.grad_slot(xi)));
      if (gr.needs_grad(wi))
        kp::dense_backward_weight<T>(geo, cptr<T>(gy), cptr<T>(gr.value_of(xi)),
                                     mptr<T>(gr.grad_slot(wi)));
      if (gr.needs_grad(bi)) kp::column_sum<T>(geo.rows, geo.out, cptr<T>(gy), mptr<T>(gr.grad_slot(bi)));
    });
  });
}

Var conditioned_linear(Var shared, Var rows, Var weight, Var bias) {
  Graph& g = graph_of({shared, rows, weight, bias}, "conditioned_linear");
  require(shared.shape().size() == 1, "conditioned_linear: shared feature must be 1-D");
  require(rows.shape().size() == 2, "conditioned_linear: rows must be [n, k]");
  const std::size_t m = shared.shape()[0], n = rows.shape()[0], k = rows.shape()[1];
  const Shape& ws = weight.shape();
  require(ws.size() == 2 && ws[1] == m + k,
          "conditioned_linear: weight " + shape_string(ws) + " does not take " +
              std::to_string(m) + " + " + std::to_string(k) + " inputs");
  const std::size_t out_dim = ws[0];
  require(bias.shape() == Shape{out_dim}, "conditioned_linear: bias shape mismatch");

  const kernels::DenseGeometry shared_geo{1, m, out_dim, m, m + k, out_dim};
  const kernels::DenseGeometry rows_geo{n, k, out_dim, k, m + k, out_dim};
  Tensor out({n, out_dim}, rows.value().precision());
  dispatch(out.precision(), [&]<class T>() {
    std::vector<T> base(out_dim);
    kp::dense_forward<T>(shared_geo, cptr<T>(shared.value()), cptr<T>(weight.value()),
                         cptr<T>(bias.value()), base.data());
    kp::dense_forward<T>(rows_geo, cptr<T>(rows.value()), cptr<T>(weight.value()) + m, base.data(),
                         mptr<T>(out));
  });
  return g.record(
      "conditioned_linear", {shared, rows, weight, bias}, std::move(out),
      [shared_geo, rows_geo, m](Graph& gr, std::size_t id) {
        const std::size_t si = gr.input(id, 0), ri = gr.input(id, 1), wi = gr.input(id, 2),
                          bi = gr.input(id, 3);
        const Tensor& gy = gr.grad_of(id);
        dispatch(gy.precision(), [&]<class T>() {
          std::vector<T> colsum(rows_geo.out, T(0));
          kp::column_sum<T>(rows_geo.rows, rows_geo.out, cptr<T>(gy), colsum.data());
          const T* w = cptr<T>(gr.value_of(wi));
          if (gr.needs_grad(si))
            kp::dense_backward_input<T>(shared_geo, colsum.data(), w, mptr<T>(gr.grad_slot(si)));
          if (gr.needs_grad(ri))
            kp::dense_backward_input<T>(rows_geo, cptr<T>(gy), w + m, mptr<T>(gr.grad_slot(ri)));
          if (gr.needs_grad(wi)) {
            T* gw = mptr<T>(gr.grad_slot(wi));
            kp::dense_backward_weight<T>(shared_geo, colsum.data(), cptr<T>(gr.value_of(si)), gw);
            kp::dense_backward_weight<T>(rows_geo, cptr<T>(gy), cptr<T>(gr.value_of(ri)), gw + m);
          }
          if (gr.needs_grad(bi)) {
            auto gb = gr.grad_slot(bi).data<T>();
            for (std::size_t o = 0; o < gb.size(); ++o) gb[o] += colsum[o];
          }
        });
      });
}

Var activation(Var x, Activation kind) {
  if (kind == Activation::relu) {
    return unary(
        x, "relu", [](auto v) { return v > 0 ? v : decltype(v)(0); },
        [](auto v, auto) { return v > 0 ? decltype(v)(1) : decltype(v)(0); });
  }
  return unary(
      x, "sigmoid", [](auto v) { return stable_sigmoid(v); },
      [](auto, auto y) { return y * (decltype(y)(1) - y); });
}

Var exp(Var x) {
  return unary(
      x, "exp", [](auto v) { return std::exp(v); }, [](auto, auto y) { return y; });
}

namespace {

// Elementwise binary op on equal shapes. `fwd(a, b)`; `da(a, b)` and
// `db(a, b)` are the local partial derivatives.
template <class Fwd, class Da, class Db>
Var binary(Var a, Var b, const char* name, Fwd fwd, Da da, Db db) {
  Graph& g = graph_of({a, b}, name);
  require_same_shape(a, b, name);
  Tensor out(a.shape(), a.value().precision());
  dispatch(out.precision(), [&]<class T>() {
    auto as = a.value().data<T>();
    auto bs = b.value().data<T>();
    auto ys = out.data<T>();
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = fwd(as[i], bs[i]);
  });
  return g.record(name, {a, b}, std::move(out), [da, db](Graph& gr, std::size_t id) {
    const std::size_t ai = gr.input(id, 0), bi = gr.input(id, 1);
    const Tensor& gy = gr.grad_of(id);
    dispatch(gy.precision(), [&]<class T>() {
      auto as = gr.value_of(ai).data<T>();
      auto bs = gr.value_of(bi).data<T>();
      auto gys = gy.data<T>();
      if (gr.needs_grad(ai)) {
        auto ga = gr.grad_slot(ai).data<T>();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gys[i] * da(as[i], bs[i]);
      }
      if (gr.needs_grad(bi)) {
        auto gb = gr.grad_slot(bi).data<T>();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gys[i] * db(as[i], bs[i]);
      }
    });
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](auto x, auto y) { return x + y; },
      [](auto x, auto) { return decltype(x)(1); }, [](auto x, auto) { return decltype(x)(1); });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](auto x, auto y) { return x - y; },
      [](auto x, auto) { return decltype(x)(1); }, [](auto x, auto) { return decltype(x)(-1); });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](auto x, auto y) { return x * y; }, [](auto, auto y) { return y; },
      [](auto x, auto) { return x; });
}

Var scale(Var x, double factor) {
  return unary(
      x, "scale", [factor](auto v) { return v * static_cast<decltype(v)>(factor); },
      [factor](auto v, auto) { return static_cast<decltype(v)>(factor); });
}

Var add_scalar(Var x, double value) {
  return unary(
      x, "add_scalar", [value](auto v) { return v + static_cast<decltype(v)>(value); },
      [](auto v, auto) { return decltype(v)(1); });
}

ChannelMax channel_max(Var x) {
  Graph& g = graph_of({x}, "channel_max");
  const Shape& s = x.shape();
  require(s.size() == 1 || s.size() == 2, "channel_max: input must be [c] or [n, c]");
  const std::size_t rows = s.size() == 1 ? 1 : s[0];
  const std::size_t c = s.back();
  ChannelMax result;
  result.argmax.resize(rows);
  Tensor out({rows}, x.value().precision());
  dispatch(out.precision(), [&]<class T>() {
    auto xs = x.value().data<T>();
    auto ys = out.data<T>();
    for (std::size_t i = 0; i < rows; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < c; ++j)
        if (xs[i * c + j] > xs[i * c + best]) best = j;
      result.argmax[i] = best;
      ys[i] = xs[i * c + best];
    }
  });
  auto argmax = result.argmax;
  result.value = g.record("channel_max", {x}, std::move(out),
                          [argmax = std::move(argmax), c](Graph& gr, std::size_t id) {
                            const std::size_t xi = gr.input(id, 0);
                            const Tensor& gy = gr.grad_of(id);
                            dispatch(gy.precision(), [&]<class T>() {
                              auto gys = gy.data<T>();
                              auto gx = gr.grad_slot(xi).data<T>();
                              for (std::size_t i = 0; i < argmax.size(); ++i)
                                gx[i * c + argmax[i]] += gys[i];
                            });
                          });
  return result;
}

Var reshape(Var x, Shape shape) { return slice(x, 0, std::move(shape)); }

Var slice(Var x, std::size_t offset, Shape shape) {
  Graph& g = graph_of({x}, "slice");
  const std::size_t n = shape_size(shape);
  require(offset + n <= x.size(), "slice: range [" + std::to_string(offset) + ", " +
                                      std::to_string(offset + n) + ") exceeds " +
                                      std::to_string(x.size()) + " elements");
  Tensor out(std::move(shape), x.value().precision());
  dispatch(out.precision(), [&]<class T>() {
    auto xs = x.value().data<T>();
    std::copy_n(xs.begin() + static_cast<std::ptrdiff_t>(offset), n, out.data<T>().begin());
  });
  return g.record("slice", {x}, std::move(out), [offset](Graph& gr, std::size_t id) {
    const std::size_t xi = gr.input(id, 0);
    const Tensor& gy = gr.grad_of(id);
    dispatch(gy.precision(), [&]<class T>() {
      auto gys = gy.data<T>();
      auto gx = gr.grad_slot(xi).data<T>();
      for (std::size_t i = 0; i < gys.size(); ++i) gx[offset + i] += gys[i];
    });
  });
}

Var concat_rows(Var shared, Var rows) {
  Graph& g = graph_of({shared, rows}, "concat_rows");
  require(shared.shape().size() == 1, "concat_rows: shared feature must be 1-D");
  require(rows.shape().size() == 2, "concat_rows: rows must be [n, k]");
  const std::size_t m = shared.shape()[0], n = rows.shape()[0], k = rows.shape()[1];
  Tensor out({n, m + k}, rows.value().precision());
  dispatch(out.precision(), [&]<class T>() {
    auto fs = shared.value().data<T>();
    auto rs = rows.value().data<T>();
    auto ys = out.data<T>();
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(fs.begin(), fs.end(), ys.begin() + static_cast<std::ptrdiff_t>(i * (m + k)));
      std::copy_n(rs.begin() + static_cast<std::ptrdiff_t>(i * k), k,
                  ys.begin() + static_cast<std::ptrdiff_t>(i * (m + k) + m));
    }
  });
  return g.record("concat_rows", {shared, rows}, std::move(out),
                  [m, n, k](Graph& gr, std::size_t id) {
                    const std::size_t si = gr.input(id, 0), ri = gr.input(id, 1);
                    const Tensor& gy = gr.grad_of(id);
                    dispatch(gy.precision(), [&]<class T>() {
                      auto gys = gy.data<T>();
                      if (gr.needs_grad(si)) {
                        auto gs = gr.grad_slot(si).data<T>();
                        for (std::size_t j = 0; j < m; ++j) {
                          T acc = 0;
                          for (std::size_t i = 0; i < n; ++i) acc += gys[i * (m + k) + j];
                          gs[j] += acc;
                        }
                      }
                      if (gr.needs_grad(ri)) {
                        auto grs = gr.grad_slot(ri).data<T>();
                        for (std::size_t i = 0; i < n; ++i)
                          for (std::size_t j = 0; j < k; ++j)
                            grs[i * k + j] += gys[i * (m + k) + m + j];
                      }
                    });
                  });
}

Var mean_rows(Var x) {
  Graph& g = graph_of({x}, "mean_rows");
  require(x.shape().size() == 2, "mean_rows: input must be [n, k]");
  const std::size_t n = x.shape()[0], k = x.shape()[1];
  Tensor out({k}, x.value().precision());
  dispatch(out.precision(), [&]<class T>() {
    auto xs = x.value().data<T>();
    auto ys = out.data<T>();
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) acc += xs[i * k + j];
      ys[j] = static_cast<T>(acc / static_cast<double>(n));
    }
  });
  return g.record("mean_rows", {x}, std::move(out), [n, k](Graph& gr, std::size_t id) {
    const std::size_t xi = gr.input(id, 0);
    const Tensor& gy = gr.grad_of(id);
    dispatch(gy.precision(), [&]<class T>() {
      auto gys = gy.data<T>();
      auto gx = gr.grad_slot(xi).data<T>();
      const T inv = T(1) / static_cast<T>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) gx[i * k + j] += gys[j] * inv;
    });
  });
}

Var sum(Var x) {
  Graph& g = graph_of({x}, "sum");
  Tensor out({1}, x.value().precision());
  dispatch(out.precision(), [&]<class T>() {
    double acc = 0;
    for (T v : x.value().data<T>()) acc += v;
    out.data<T>()[0] = static_cast<T>(acc);
  });
  return g.record("sum", {x}, std::move(out), [](Graph& gr, std::size_t id) {
    const std::size_t xi = gr.input(id, 0);
    const Tensor& gy = gr.grad_of(id);
    dispatch(gy.precision(), [&]<class T>() {
      const T v = gy.data<T>()[0];
      for (T& e : gr.grad_slot(xi).data<T>()) e += v;
    });
  });
}

Var mean_squared_error(Var prediction, const Tensor& target) {
  Graph& g = graph_of({prediction}, "mean_squared_error");
  require(prediction.shape() == target.shape(),
          "mean_squared_error: prediction " + shape_string(prediction.shape()) +
              " vs target " + shape_string(target.shape()));
  require(prediction.value().precision() == target.precision(),
          "mean_squared_error: precision mismatch");
  Tensor out({1}, prediction.value().precision());
  dispatch(out.precision(), [&]<class T>() {
    auto ps = prediction.value().data<T>();
    auto ts = target.data<T>();
    double acc = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const double d = static_cast<double>(ps[i]) - static_cast<double>(ts[i]);
      acc += d * d;
    }
    out.data<T>()[0] = static_cast<T>(acc / static_cast<double>(ps.size()));
  });
  return g.record("mean_squared_error", {prediction}, std::move(out),
                  [target](Graph& gr, std::size_t id) {
                    const std::size_t pi = gr.input(id, 0);
                    const Tensor& gy = gr.grad_of(id);
                    dispatch(gy.precision(), [&]<class T>() {
                      auto ps = gr.value_of(pi).data<T>();
                      auto ts = target.data<T>();
                      auto gp = gr.grad_slot(pi).data<T>();
                      const T coef = T(2) * gy.data<T>()[0] / static_cast<T>(ps.size());
                      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += coef * (ps[i] - ts[i]);
                    });
                  });
}

}  // namespace m3dseg::numerics
