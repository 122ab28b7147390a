// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/diff/buffer.hpp>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dynmap::diff {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

/// Backward closure of a recorded operation.
///
/// `grad_out` is the gradient of the loss with respect to the operation's
/// output and `out_value` is the output's forward value. `grad_in[i]` is null
/// when input i does not need a gradient; otherwise the closure adds its
/// contribution into it.
using BackwardFn = std::function<void(const Buffer& grad_out, const Buffer& out_value,
                                      std::span<Buffer* const> grad_in)>;

namespace detail {
struct Node;
struct TensorImpl;
} // namespace detail

/// Reference-counted handle to an n-dimensional real array.
///
/// Copies share storage. Operations in ops.hpp record a dynamic graph when any
/// input requires a gradient and gradient mode is enabled; `backward()` replays
/// that graph once and then frees it.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor zeros(Shape shape, Dtype dtype, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::span<const double> values, bool requires_grad = false);
    static Tensor from(Shape shape, std::initializer_list<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const noexcept { return impl_ != nullptr; }

    const Shape& shape() const;
    std::int64_t dim(int axis) const;
    int ndim() const;
    std::int64_t numel() const;
    Dtype dtype() const;

    bool requires_grad() const;
    void set_requires_grad(bool value);
    /// True when the tensor was produced by a recorded operation.
    bool has_grad_fn() const;

    Buffer& buffer();
    const Buffer& buffer() const;

    template <class T>
    std::span<T> data() {
        return buffer().span<T>();
    }
    template <class T>
    std::span<const T> data() const {
        return buffer().span<T>();
    }

    double item() const;
    double at(std::int64_t flat_index) const;
    std::vector<double> values() const;

    bool has_grad() const;
    const Buffer& grad() const;
    Buffer& grad();
    std::vector<double> grad_values() const;
    void zero_grad();

    /// Copy of the values with no graph history.
    Tensor detach() const;

    /// Runs reverse-mode accumulation from this scalar. Throws when the tensor
    /// is not a scalar or its graph was already consumed.
    void backward();

    /// Attaches a backward node to `out` unless gradient mode is off or no
    /// input needs a gradient. Used by every differentiable operation.
    static void record(Tensor& out, std::vector<Tensor> inputs, BackwardFn fn, const char* name);

    const void* id() const noexcept { return impl_.get(); }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    detail::TensorImpl& impl() const;

    std::shared_ptr<detail::TensorImpl> impl_;
};

/// Gradient recording is enabled by default; NoGradGuard disables it for the
/// current thread, e.g. during rendering.
bool grad_enabled() noexcept;

class NoGradGuard {
public:
    NoGradGuard() noexcept;
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool saved_;
};

/// Throws std::runtime_error naming `what` if any value is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);

} // namespace dynmap::diff
