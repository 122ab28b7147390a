// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/diff/ops.hpp>

#include <dynmap/diff/gemm.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dynmap::diff {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) {
        throw std::invalid_argument(msg);
    }
}

void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
    require(a.dtype() == b.dtype(), std::string(op) + ": mixed precisions");
}

std::int64_t row_size(const Tensor& x) {
    require(x.ndim() >= 1, "row operation on a scalar");
    return x.dim(0) == 0 ? 0 : x.numel() / x.dim(0);
}

template <class T>
T softplus_value(T x) {
    return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <class T>
T sigmoid_value(T x) {
    if (x >= T(0)) {
        return T(1) / (T(1) + std::exp(-x));
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

// im2col for a [C x H x W] image: rows (c, ki, kj), columns (oy, ox).
template <class T>
void im2col(const T* x, std::int64_t c, std::int64_t h, std::int64_t w, int k, int stride, int pad, std::int64_t ho,
            std::int64_t wo, T* cols) {
    const std::int64_t ncols = ho * wo;
    for (std::int64_t ch = 0; ch < c; ++ch) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                T* row = cols + ((ch * k + ki) * k + kj) * ncols;
                for (std::int64_t oy = 0; oy < ho; ++oy) {
                    const std::int64_t iy = oy * stride - pad + ki;
                    T* out = row + oy * wo;
                    if (iy < 0 || iy >= h) {
                        std::fill(out, out + wo, T(0));
                        continue;
                    }
                    const T* in = x + (ch * h + iy) * w;
                    for (std::int64_t ox = 0; ox < wo; ++ox) {
                        const std::int64_t ix = ox * stride - pad + kj;
                        out[ox] = (ix >= 0 && ix < w) ? in[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add columns back into a [C x H x W] image.
template <class T>
void col2im(const T* cols, std::int64_t c, std::int64_t h, std::int64_t w, int k, int stride, int pad, std::int64_t ho,
            std::int64_t wo, T* x) {
    const std::int64_t ncols = ho * wo;
    for (std::int64_t ch = 0; ch < c; ++ch) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const T* row = cols + ((ch * k + ki) * k + kj) * ncols;
                for (std::int64_t oy = 0; oy < ho; ++oy) {
                    const std::int64_t iy = oy * stride - pad + ki;
                    if (iy < 0 || iy >= h) {
                        continue;
                    }
                    const T* in = row + oy * wo;
                    T* out = x + (ch * h + iy) * w;
                    for (std::int64_t ox = 0; ox < wo; ++ox) {
                        const std::int64_t ix = ox * stride - pad + kj;
                        if (ix >= 0 && ix < w) {
                            out[ix] += in[ox];
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void add_channel_bias(T* y, const T* bias, std::int64_t channels, std::int64_t plane) {
    for (std::int64_t c = 0; c < channels; ++c) {
        std::for_each(y + c * plane, y + (c + 1) * plane, [b = bias[c]](T& v) { v += b; });
    }
}

template <class T>
void channel_sums(const T* g, std::int64_t channels, std::int64_t plane, T* out) {
    for (std::int64_t c = 0; c < channels; ++c) {
        T s = 0;
        for (std::int64_t i = 0; i < plane; ++i) {
            s += g[c * plane + i];
        }
        out[c] += s;
    }
}

} // namespace

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2, "matmul: operands must be 2D, got " + shape_str(a.shape()) + " and " +
                                                shape_str(b.shape()));
    require(a.dim(1) == b.dim(0), "matmul: inner extents differ: " + shape_str(a.shape()) + " x " +
                                      shape_str(b.shape()));
    require_same_dtype(a, b, "matmul");
    const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n}, a.dtype());
    dispatch(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        gemm<T>(false, false, m, n, k, T(1), a.data<T>().data(), k, b.data<T>().data(), n, T(0),
                out.data<T>().data(), n);
    });
    Tensor::record(
        out, {a, b},
        [a, b, m, k, n](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* gp = g.span<T>().data();
                if (gi[0]) {
                    gemm<T>(false, true, m, k, n, T(1), gp, n, b.data<T>().data(), n, T(1), gi[0]->span<T>().data(),
                            k);
                }
                if (gi[1]) {
                    gemm<T>(true, false, k, n, m, T(1), a.data<T>().data(), k, gp, n, T(1), gi[1]->span<T>().data(),
                            n);
                }
            });
        },
        "matmul");
    return out;
}

std::int64_t conv2d_extent(std::int64_t in, int k, int stride, int padding) {
    if (k < 1 || stride < 1 || padding < 0) {
        throw std::invalid_argument("conv2d: kernel and stride must be >= 1, padding >= 0");
    }
    const std::int64_t span = in + 2 * padding - k;
    if (span < 0) {
        throw std::invalid_argument("conv2d: output extent < 1 for input extent " + std::to_string(in));
    }
    return span / stride + 1;
}

std::int64_t deconv2d_extent(std::int64_t in, int k, int stride, int padding) {
    if (k < 1 || stride < 1 || padding < 0 || in < 1) {
        throw std::invalid_argument("deconv2d: invalid geometry");
    }
    const std::int64_t out = (in - 1) * stride - 2 * padding + k;
    if (out < 1) {
        throw std::invalid_argument("deconv2d: output extent < 1");
    }
    return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride, int padding) {
    require(input.ndim() == 3, "conv2d: input must be [C x H x W], got " + shape_str(input.shape()));
    require(kernel.ndim() == 4 && kernel.dim(2) == kernel.dim(3), "conv2d: kernel must be [Cout x Cin x k x k]");
    require(kernel.dim(1) == input.dim(0), "conv2d: channel mismatch " + shape_str(input.shape()) + " vs kernel " +
                                               shape_str(kernel.shape()));
    require_same_dtype(input, kernel, "conv2d");
    const auto cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const auto cout = kernel.dim(0);
    const int k = static_cast<int>(kernel.dim(2));
    const auto ho = conv2d_extent(h, k, stride, padding);
    const auto wo = conv2d_extent(w, k, stride, padding);
    if (bias.defined()) {
        require(bias.ndim() == 1 && bias.dim(0) == cout, "conv2d: bias must be [Cout]");
    }
    const std::int64_t krows = cin * k * k;
    const std::int64_t ncols = ho * wo;

    Tensor out = Tensor::zeros({cout, ho, wo}, input.dtype());
    dispatch(input.dtype(), [&](auto tag) {
        using T = decltype(tag);
        std::vector<T> cols(static_cast<std::size_t>(krows * ncols));
        im2col<T>(input.data<T>().data(), cin, h, w, k, stride, padding, ho, wo, cols.data());
        T* y = out.data<T>().data();
        gemm<T>(false, false, cout, ncols, krows, T(1), kernel.data<T>().data(), krows, cols.data(), ncols, T(0), y,
                ncols);
        if (bias.defined()) {
            add_channel_bias<T>(y, bias.data<T>().data(), cout, ncols);
        }
    });
    Tensor::record(
        out, {input, kernel, bias},
        [=](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* gp = g.span<T>().data();
                if (gi[1]) {
                    std::vector<T> cols(static_cast<std::size_t>(krows * ncols));
                    im2col<T>(input.data<T>().data(), cin, h, w, k, stride, padding, ho, wo, cols.data());
                    gemm<T>(false, true, cout, krows, ncols, T(1), gp, ncols, cols.data(), ncols, T(1),
                            gi[1]->span<T>().data(), krows);
                }
                if (gi[0]) {
                    std::vector<T> dcols(static_cast<std::size_t>(krows * ncols));
                    gemm<T>(true, false, krows, ncols, cout, T(1), kernel.data<T>().data(), krows, gp, ncols, T(0),
                            dcols.data(), ncols);
                    col2im<T>(dcols.data(), cin, h, w, k, stride, padding, ho, wo, gi[0]->span<T>().data());
                }
                if (gi[2]) {
                    channel_sums<T>(gp, cout, ncols, gi[2]->span<T>().data());
                }
            });
        },
        "conv2d");
    return out;
}

Tensor deconv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride, int padding) {
    require(input.ndim() == 3, "deconv2d: input must be [C x H x W], got " + shape_str(input.shape()));
    require(kernel.ndim() == 4 && kernel.dim(2) == kernel.dim(3), "deconv2d: kernel must be [Cin x Cout x k x k]");
    require(kernel.dim(0) == input.dim(0), "deconv2d: channel mismatch " + shape_str(input.shape()) + " vs kernel " +
                                               shape_str(kernel.shape()));
    require_same_dtype(input, kernel, "deconv2d");
    const auto cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const auto cout = kernel.dim(1);
    const int k = static_cast<int>(kernel.dim(2));
    const auto ho = deconv2d_extent(h, k, stride, padding);
    const auto wo = deconv2d_extent(w, k, stride, padding);
    if (bias.defined()) {
        require(bias.ndim() == 1 && bias.dim(0) == cout, "deconv2d: bias must be [Cout]");
    }
    const std::int64_t krows = cout * k * k;
    const std::int64_t ncols = h * w;

    Tensor out = Tensor::zeros({cout, ho, wo}, input.dtype());
    dispatch(input.dtype(), [&](auto tag) {
        using T = decltype(tag);
        std::vector<T> cols(static_cast<std::size_t>(krows * ncols));
        gemm<T>(true, false, krows, ncols, cin, T(1), kernel.data<T>().data(), krows, input.data<T>().data(), ncols,
                T(0), cols.data(), ncols);
        T* y = out.data<T>().data();
        col2im<T>(cols.data(), cout, ho, wo, k, stride, padding, h, w, y);
        if (bias.defined()) {
            add_channel_bias<T>(y, bias.data<T>().data(), cout, ho * wo);
        }
    });
    Tensor::record(
        out, {input, kernel, bias},
        [=](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* gp = g.span<T>().data();
                std::vector<T> dcols(static_cast<std::size_t>(krows * ncols));
                im2col<T>(gp, cout, ho, wo, k, stride, padding, h, w, dcols.data());
                if (gi[0]) {
                    gemm<T>(false, false, cin, ncols, krows, T(1), kernel.data<T>().data(), krows, dcols.data(), ncols,
                            T(1), gi[0]->span<T>().data(), ncols);
                }
                if (gi[1]) {
                    gemm<T>(false, true, cin, krows, ncols, T(1), input.data<T>().data(), ncols, dcols.data(), ncols,
                            T(1), gi[1]->span<T>().data(), krows);
                }
                if (gi[2]) {
                    channel_sums<T>(gp, cout, ho * wo, gi[2]->span<T>().data());
                }
            });
        },
        "deconv2d");
    return out;
}

// ---------------------------------------------------------------------------

namespace {

template <class Fwd, class Bwd>
Tensor unary(const Tensor& x, Fwd fwd, Bwd bwd, const char* name) {
    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto in = x.data<T>();
        auto o = out.data<T>();
        for (std::size_t i = 0; i < in.size(); ++i) {
            o[i] = fwd(in[i]);
        }
    });
    Tensor::record(
        out, {x},
        [x, bwd](const Buffer& g, const Buffer& y, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto gp = g.span<T>();
                auto xp = x.data<T>();
                auto yp = y.span<T>();
                auto dx = gi[0]->span<T>();
                for (std::size_t i = 0; i < gp.size(); ++i) {
                    dx[i] += gp[i] * bwd(xp[i], yp[i]);
                }
            });
        },
        name);
    return out;
}

} // namespace

Tensor relu(const Tensor& x) {
    return unary(
        x, [](auto v) { return v > decltype(v)(0) ? v : decltype(v)(0); },
        [](auto xv, auto) { return xv > decltype(xv)(0) ? decltype(xv)(1) : decltype(xv)(0); }, "relu");
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x, [](auto v) { return sigmoid_value(v); }, [](auto, auto yv) { return yv * (decltype(yv)(1) - yv); },
        "sigmoid");
}

Tensor softplus(const Tensor& x) {
    return unary(
        x, [](auto v) { return softplus_value(v); }, [](auto xv, auto) { return sigmoid_value(xv); }, "softplus");
}

Tensor scale(const Tensor& x, double factor) {
    return unary(
        x, [factor](auto v) { return static_cast<decltype(v)>(v * factor); },
        [factor](auto xv, auto) { return static_cast<decltype(xv)>(factor); }, "scale");
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_dtype(a, b, "add");
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    require(sb.size() <= sa.size() && std::equal(sb.rbegin(), sb.rend(), sa.rbegin()),
            "add: shapes " + shape_str(sa) + " and " + shape_str(sb) + " are not broadcast-compatible");
    const std::int64_t inner = b.numel();
    Tensor out = Tensor::zeros(sa, a.dtype());
    dispatch(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto ap = a.data<T>();
        auto bp = b.data<T>();
        auto o = out.data<T>();
        for (std::size_t i = 0; i < ap.size(); ++i) {
            o[i] = ap[i] + bp[inner ? i % static_cast<std::size_t>(inner) : 0];
        }
    });
    Tensor::record(
        out, {a, b},
        [inner](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto gp = g.span<T>();
                if (gi[0]) {
                    auto da = gi[0]->span<T>();
                    for (std::size_t i = 0; i < gp.size(); ++i) {
                        da[i] += gp[i];
                    }
                }
                if (gi[1]) {
                    auto db = gi[1]->span<T>();
                    for (std::size_t i = 0; i < gp.size(); ++i) {
                        db[i % static_cast<std::size_t>(inner)] += gp[i];
                    }
                }
            });
        },
        "add");
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    return add(a, scale(b, -1.0));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    require_same_dtype(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape(), a.dtype());
    dispatch(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto ap = a.data<T>();
        auto bp = b.data<T>();
        auto o = out.data<T>();
        for (std::size_t i = 0; i < ap.size(); ++i) {
            o[i] = ap[i] * bp[i];
        }
    });
    Tensor::record(
        out, {a, b},
        [a, b](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto gp = g.span<T>();
                auto ap = a.data<T>();
                auto bp = b.data<T>();
                if (gi[0]) {
                    auto da = gi[0]->span<T>();
                    for (std::size_t i = 0; i < gp.size(); ++i) {
                        da[i] += gp[i] * bp[i];
                    }
                }
                if (gi[1]) {
                    auto db = gi[1]->span<T>();
                    for (std::size_t i = 0; i < gp.size(); ++i) {
                        db[i] += gp[i] * ap[i];
                    }
                }
            });
        },
        "mul");
    return out;
}

// ---------------------------------------------------------------------------

Tensor sum(const Tensor& x) {
    Tensor out = Tensor::zeros({}, x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        double s = 0;
        for (T v : x.data<T>()) {
            s += v;
        }
        out.data<T>()[0] = static_cast<T>(s);
    });
    Tensor::record(
        out, {x},
        [](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T gv = g.span<T>()[0];
                for (T& d : gi[0]->span<T>()) {
                    d += gv;
                }
            });
        },
        "sum");
    return out;
}

Tensor sum_squares(const Tensor& x) {
    Tensor out = Tensor::zeros({}, x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        double s = 0;
        for (T v : x.data<T>()) {
            s += static_cast<double>(v) * v;
        }
        out.data<T>()[0] = static_cast<T>(s);
    });
    Tensor::record(
        out, {x},
        [x](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T gv = g.span<T>()[0];
                auto xp = x.data<T>();
                auto d = gi[0]->span<T>();
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d[i] += T(2) * gv * xp[i];
                }
            });
        },
        "sum_squares");
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    require(shape_numel(shape) == x.numel(),
            "reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    Tensor out = Tensor::zeros(std::move(shape), x.dtype());
    out.buffer() = x.buffer();
    Tensor::record(
        out, {x}, [](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) { gi[0]->accumulate(g); },
        "reshape");
    return out;
}

Tensor transpose(const Tensor& x) {
    require(x.ndim() == 2, "transpose: expected 2D, got " + shape_str(x.shape()));
    const auto r = x.dim(0), c = x.dim(1);
    Tensor out = Tensor::zeros({c, r}, x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto in = x.data<T>();
        auto o = out.data<T>();
        for (std::int64_t i = 0; i < r; ++i) {
            for (std::int64_t j = 0; j < c; ++j) {
                o[j * r + i] = in[i * c + j];
            }
        }
    });
    Tensor::record(
        out, {x},
        [r, c](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto gp = g.span<T>();
                auto d = gi[0]->span<T>();
                for (std::int64_t i = 0; i < r; ++i) {
                    for (std::int64_t j = 0; j < c; ++j) {
                        d[i * c + j] += gp[j * r + i];
                    }
                }
            });
        },
        "transpose");
    return out;
}

Tensor slice_rows(const Tensor& x, std::int64_t begin, std::int64_t end) {
    require(x.ndim() >= 1 && 0 <= begin && begin <= end && end <= x.dim(0),
            "slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for " +
                shape_str(x.shape()));
    const auto rs = row_size(x);
    Shape shape = x.shape();
    shape[0] = end - begin;
    Tensor out = Tensor::zeros(shape, x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto in = x.data<T>();
        std::copy(in.begin() + begin * rs, in.begin() + end * rs, out.data<T>().begin());
    });
    Tensor::record(
        out, {x},
        [begin, rs](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto gp = g.span<T>();
                auto d = gi[0]->span<T>().subspan(static_cast<std::size_t>(begin * rs));
                for (std::size_t i = 0; i < gp.size(); ++i) {
                    d[i] += gp[i];
                }
            });
        },
        "slice_rows");
    return out;
}

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index) {
    const auto rs = row_size(x);
    const auto rows = x.dim(0);
    for (auto i : index) {
        require(i >= 0 && i < rows, "gather_rows: index " + std::to_string(i) + " out of range");
    }
    Shape shape = x.shape();
    shape[0] = static_cast<std::int64_t>(index.size());
    Tensor out = Tensor::zeros(shape, x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto in = x.data<T>();
        auto o = out.data<T>();
        for (std::size_t r = 0; r < index.size(); ++r) {
            std::copy_n(in.begin() + index[r] * rs, rs, o.begin() + static_cast<std::int64_t>(r) * rs);
        }
    });
    std::vector<std::int64_t> idx(index.begin(), index.end());
    Tensor::record(
        out, {x},
        [idx = std::move(idx), rs](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto gp = g.span<T>();
                auto d = gi[0]->span<T>();
                for (std::size_t r = 0; r < idx.size(); ++r) {
                    for (std::int64_t j = 0; j < rs; ++j) {
                        d[static_cast<std::size_t>(idx[r] * rs + j)] += gp[r * static_cast<std::size_t>(rs) + j];
                    }
                }
            });
        },
        "gather_rows");
    return out;
}

Tensor scatter_rows(const Tensor& x, std::span<const std::int64_t> index, std::int64_t rows) {
    require(x.ndim() >= 1 && x.dim(0) == static_cast<std::int64_t>(index.size()),
            "scatter_rows: index count does not match rows of " + shape_str(x.shape()));
    const auto rs = row_size(x);
    for (auto i : index) {
        require(i >= 0 && i < rows, "scatter_rows: index " + std::to_string(i) + " out of range");
    }
    Shape shape = x.shape();
    shape[0] = rows;
    Tensor out = Tensor::zeros(shape, x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto in = x.data<T>();
        auto o = out.data<T>();
        for (std::size_t r = 0; r < index.size(); ++r) {
            for (std::int64_t j = 0; j < rs; ++j) {
                o[static_cast<std::size_t>(index[r] * rs + j)] += in[r * static_cast<std::size_t>(rs) + j];
            }
        }
    });
    std::vector<std::int64_t> idx(index.begin(), index.end());
    Tensor::record(
        out, {x},
        [idx = std::move(idx), rs](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto gp = g.span<T>();
                auto d = gi[0]->span<T>();
                for (std::size_t r = 0; r < idx.size(); ++r) {
                    for (std::int64_t j = 0; j < rs; ++j) {
                        d[r * static_cast<std::size_t>(rs) + j] += gp[static_cast<std::size_t>(idx[r] * rs + j)];
                    }
                }
            });
        },
        "scatter_rows");
    return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    Shape shape = parts[0].shape();
    require(!shape.empty(), "concat_rows: scalar input");
    std::int64_t rows = 0;
    for (const auto& p : parts) {
        require(p.ndim() == static_cast<int>(shape.size()) &&
                    std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1),
                "concat_rows: incompatible shape " + shape_str(p.shape()));
        require_same_dtype(p, parts[0], "concat_rows");
        rows += p.dim(0);
    }
    shape[0] = rows;
    Tensor out = Tensor::zeros(shape, parts[0].dtype());
    std::vector<std::int64_t> offsets;
    dispatch(out.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto o = out.data<T>();
        std::size_t at = 0;
        for (const auto& p : parts) {
            offsets.push_back(static_cast<std::int64_t>(at));
            auto in = p.data<T>();
            std::copy(in.begin(), in.end(), o.begin() + static_cast<std::ptrdiff_t>(at));
            at += in.size();
        }
    });
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    Tensor::record(
        out, inputs,
        [offsets](const Buffer& g, const Buffer&, std::span<Buffer* const> gi) {
            dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto gp = g.span<T>();
                for (std::size_t i = 0; i < gi.size(); ++i) {
                    if (!gi[i]) {
                        continue;
                    }
                    auto d = gi[i]->span<T>();
                    for (std::size_t j = 0; j < d.size(); ++j) {
                        d[j] += gp[static_cast<std::size_t>(offsets[i]) + j];
                    }
                }
            });
        },
        "concat_rows");
    return out;
}

} // namespace dynmap::diff
