#pragma once

#include <cstddef>
#include <vector>

#include "m3dseg/numerics/graph.hpp"

namespace m3dseg::numerics {

/// Cross-correlation of input [C_in, D, H, W] with kernel [C_out, C_in, k, k, k]
/// plus per-channel bias [C_out]. Output [C_out, D', H', W'] with
/// D' = (D + 2 padding - k) / stride + 1, which must be integral.
Var conv3d(Var input, Var kernel, Var bias, std::size_t stride, std::size_t padding);

/// weight [m, n] times x ([n] or a row batch [b, n]) plus bias [m].
Var linear(Var x, Var weight, Var bias);

/// Dense layer applied to the rows [shared, rows_i] without materializing the
/// concatenation: shared [m], rows [n, k], weight [out, m + k], bias [out]
/// gives [n, out]. Equal in exact arithmetic to linear(concat_rows(...)).
Var conditioned_linear(Var shared, Var rows, Var weight, Var bias);

enum class Activation { relu, sigmoid };

Var activation(Var x, Activation kind);
inline Var relu(Var x) { return activation(x, Activation::relu); }
/// Outputs are clamped to the open interval (0, 1) of the storage type.
inline Var sigmoid(Var x) { return activation(x, Activation::sigmoid); }
Var exp(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var add_scalar(Var x, double value);

struct ChannelMax {
  Var value;                        // [1] for a [c] input, [n] for [n, c]
  std::vector<std::size_t> argmax;  // lowest index on ties
};

/// Maximum over the last axis of [c] or [n, c]. The gradient flows only to
/// the selected element.
ChannelMax channel_max(Var x);

Var reshape(Var x, Shape shape);
/// Contiguous range of the flattened input, viewed with `shape`.
Var slice(Var x, std::size_t offset, Shape shape);

/// Rows [shared, rows_i] for shared [m] and rows [n, k]: shape [n, m + k].
Var concat_rows(Var shared, Var rows);
/// Column means of [n, k]: shape [k].
Var mean_rows(Var x);
/// Sum of all elements: shape [1].
Var sum(Var x);
/// Mean of squared differences against a constant target of equal shape.
Var mean_squared_error(Var prediction, const Tensor& target);

}  // namespace m3dseg::numerics
