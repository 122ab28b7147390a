// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/diff/tensor.hpp>

#include <cstdint>
#include <span>

namespace dynmap::diff {

// Dense algebra ------------------------------------------------------------

/// [m x k] x [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Cross-correlation of a [Cin x H x W] input with a [Cout x Cin x k x k]
/// kernel. `bias` may be undefined; otherwise it has shape [Cout].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride, int padding);

/// Transposed convolution (the adjoint of conv2d) of a [Cin x H x W] input
/// with a [Cin x Cout x k x k] kernel. Output extent (H-1)*stride - 2*padding + k.
Tensor deconv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride, int padding);

std::int64_t conv2d_extent(std::int64_t in, int k, int stride, int padding);
std::int64_t deconv2d_extent(std::int64_t in, int k, int stride, int padding);

// Elementwise --------------------------------------------------------------

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);

/// a + b. `b` either matches `a`'s shape or matches its trailing extents and
/// is broadcast over the leading ones (e.g. a bias row).
Tensor add(const Tensor& a, const Tensor& b);
/// a - b, same-shape only.
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product, same-shape only.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// Reductions and layout ----------------------------------------------------

Tensor sum(const Tensor& x);
/// Sum of squared entries.
Tensor sum_squares(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
/// 2D transpose.
Tensor transpose(const Tensor& x);
/// Rows [begin, end) along the leading axis.
Tensor slice_rows(const Tensor& x, std::int64_t begin, std::int64_t end);
/// Rows `index[i]` of x stacked along the leading axis.
Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index);
/// Inverse of gather_rows: a tensor with `rows` rows, zeros except rows
/// `index[i]` which receive x's rows.
Tensor scatter_rows(const Tensor& x, std::span<const std::int64_t> index, std::int64_t rows);
/// Concatenation of rank-compatible tensors along the leading axis.
Tensor concat_rows(std::span<const Tensor> parts);

} // namespace dynmap::diff
