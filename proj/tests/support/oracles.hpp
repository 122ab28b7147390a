// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations and finite-difference checks used by the tests.
// Nothing here calls into the kernels under test except to read tensors.
#pragma once

#include <dynmap/core/geometry.hpp>
#include <dynmap/diff/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace dynmap::testing {

inline diff::Tensor random_tensor(diff::Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1,
                                  bool requires_grad = true) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(diff::shape_numel(shape)));
    for (auto& x : v) {
        x = u(rng);
    }
    return diff::Tensor::from(std::move(shape), v, requires_grad);
}

inline std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng, double lo = 0, double hi = 1) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) {
        p = {u(rng), u(rng), u(rng)};
    }
    return pts;
}

/// Gradient error of `loss` with respect to `leaves`: the largest
/// |analytic - central difference| over all entries, divided by the largest
/// |central difference| (floored at 1e-8). `loss` must rebuild its graph on
/// every call.
inline double gradient_error(const std::function<diff::Tensor()>& loss, std::vector<diff::Tensor> leaves,
                             double h = 1e-5) {
    for (auto& l : leaves) {
        l.zero_grad();
    }
    loss().backward();
    double max_diff = 0, max_ref = 1e-8;
    diff::NoGradGuard guard;
    for (auto& l : leaves) {
        const auto analytic = l.grad_values();
        for (std::int64_t i = 0; i < l.numel(); ++i) {
            const double x0 = l.buffer().get(i);
            l.buffer().set(i, x0 + h);
            const double fp = loss().item();
            l.buffer().set(i, x0 - h);
            const double fm = loss().item();
            l.buffer().set(i, x0);
            const double numeric = (fp - fm) / (2 * h);
            max_diff = std::max(max_diff, std::abs(numeric - analytic[static_cast<std::size_t>(i)]));
            max_ref = std::max(max_ref, std::abs(numeric));
        }
    }
    return max_diff / max_ref;
}

/// Direct-loop cross-correlation of [Ci,H,W] with [Co,Ci,k,k].
inline std::vector<double> naive_conv2d(const std::vector<double>& x, int ci, int h, int w,
                                        const std::vector<double>& kern, int co, int k, int stride, int pad,
                                        int& ho, int& wo) {
    ho = (h + 2 * pad - k) / stride + 1;
    wo = (w + 2 * pad - k) / stride + 1;
    std::vector<double> y(static_cast<std::size_t>(co * ho * wo), 0.0);
    for (int o = 0; o < co; ++o)
        for (int r = 0; r < ho; ++r)
            for (int c = 0; c < wo; ++c) {
                double s = 0;
                for (int i = 0; i < ci; ++i)
                    for (int a = 0; a < k; ++a)
                        for (int b = 0; b < k; ++b) {
                            const int yy = r * stride - pad + a, xx = c * stride - pad + b;
                            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                            s += x[static_cast<std::size_t>((i * h + yy) * w + xx)] *
                                 kern[static_cast<std::size_t>(((o * ci + i) * k + a) * k + b)];
                        }
                y[static_cast<std::size_t>((o * ho + r) * wo + c)] = s;
            }
    return y;
}

/// Scatter form of the transposed convolution with a [Ci,Co,k,k] kernel.
inline std::vector<double> naive_deconv2d(const std::vector<double>& x, int ci, int h, int w,
                                          const std::vector<double>& kern, int co, int k, int stride, int pad,
                                          int& ho, int& wo) {
    ho = (h - 1) * stride - 2 * pad + k;
    wo = (w - 1) * stride - 2 * pad + k;
    std::vector<double> y(static_cast<std::size_t>(co * ho * wo), 0.0);
    for (int i = 0; i < ci; ++i)
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                for (int o = 0; o < co; ++o)
                    for (int a = 0; a < k; ++a)
                        for (int b = 0; b < k; ++b) {
                            const int yy = r * stride - pad + a, xx = c * stride - pad + b;
                            if (yy < 0 || yy >= ho || xx < 0 || xx >= wo) continue;
                            y[static_cast<std::size_t>((o * ho + yy) * wo + xx)] +=
                                x[static_cast<std::size_t>((i * h + r) * w + c)] *
                                kern[static_cast<std::size_t>(((i * co + o) * k + a) * k + b)];
                        }
    return y;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        return INFINITY;
    }
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

} // namespace dynmap::testing
