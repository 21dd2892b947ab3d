#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mtaw/numerics/graph.hpp"
#include "mtaw/numerics/tensor.hpp"

namespace mtaw::num {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kNormFloor = 1e-12;

/// Boolean keep-mask; nonzero entries take part in a softmax row.
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> keep;

  Mask() = default;
  Mask(Shape s, bool fill) : shape(std::move(s)), keep(element_count(shape), fill ? 1 : 0) {}
};

// Elementwise, operands of identical shape.
Var add(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
/// x + bias, with bias a vector matching the trailing dimension of x.
Var add_bias(Graph& g, Var x, Var bias);
Var scale(Graph& g, Var x, double factor);
Var relu(Graph& g, Var x);
/// Inverted dropout. Identity (the same Var) when `training` is false or rate is 0.
Var dropout(Graph& g, Var x, double rate, Rng& rng, bool training);
/// Sum of all elements, as a [1] tensor.
Var sum(Graph& g, Var x);

/// [m x k] * [k x n].
Var matmul(Graph& g, Var a, Var b);
/// [B x m x k] * [B x k x n].
Var batched_matmul(Graph& g, Var a, Var b);
/// Swaps the last two axes of a rank-2 or rank-3 tensor.
Var transpose(Graph& g, Var x);
Var reshape(Graph& g, Var x, Shape shape);

/// Row lookup into a 2-D table. Entry `kNoRow` yields a zero row and
/// receives no gradient. `out_shape` must hold rows.size() * table cols.
Var gather_rows(Graph& g, Var table, std::span<const std::size_t> rows, Shape out_shape);

/// Softmax over the trailing axis with max subtraction. Masked entries get
/// exactly zero weight; a row with no kept entry throws DegenerateRowError.
Var softmax(Graph& g, Var x, const Mask* mask = nullptr);

/// Per-row normalization to zero mean and unit variance, then gain * x + bias.
Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps = kLayerNormEps);

/// Divides each row by its Euclidean norm. Rows with norm below `floor`
/// throw NormalizationError.
Var l2_normalize(Graph& g, Var x, double floor = kNormFloor);

// Graph-free conveniences over plain tensors.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax(const Tensor& x, const Mask* mask = nullptr);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);
Tensor l2_normalize(const Tensor& x, double floor = kNormFloor);

}  // namespace mtaw::num
