// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/diff/tensor.hpp>

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace dynmap::diff {

namespace {
std::atomic<Dtype> g_default_dtype{Dtype::f32};
thread_local bool t_grad_enabled = true;
} // namespace

Dtype default_dtype() noexcept { return g_default_dtype.load(std::memory_order_relaxed); }
void set_default_dtype(Dtype dtype) noexcept { g_default_dtype.store(dtype, std::memory_order_relaxed); }

std::string_view dtype_name(Dtype dtype) noexcept { return dtype == Dtype::f64 ? "f64" : "f32"; }
std::size_t dtype_size(Dtype dtype) noexcept { return dtype == Dtype::f64 ? 8 : 4; }

bool grad_enabled() noexcept { return t_grad_enabled; }
NoGradGuard::NoGradGuard() noexcept : saved_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = saved_; }

// ---------------------------------------------------------------------------
// Buffer

Buffer::Buffer(Dtype dtype, std::size_t size) {
    if (dtype == Dtype::f64) {
        storage_.emplace<std::vector<double>>(size, 0.0);
    } else {
        storage_.emplace<std::vector<float>>(size, 0.0f);
    }
}

std::size_t Buffer::size() const noexcept {
    return std::visit([](const auto& v) { return v.size(); }, storage_);
}

double Buffer::get(std::size_t i) const {
    return std::visit([i](const auto& v) { return static_cast<double>(v.at(i)); }, storage_);
}

void Buffer::add(std::size_t i, double value) {
    std::visit(
        [i, value](auto& v) {
            using T = typename std::decay_t<decltype(v)>::value_type;
            v.at(i) += static_cast<T>(value);
        },
        storage_);
}

void Buffer::set(std::size_t i, double value) {
    std::visit(
        [i, value](auto& v) {
            using T = typename std::decay_t<decltype(v)>::value_type;
            v.at(i) = static_cast<T>(value);
        },
        storage_);
}

void Buffer::fill(double value) {
    std::visit(
        [value](auto& v) {
            using T = typename std::decay_t<decltype(v)>::value_type;
            std::fill(v.begin(), v.end(), static_cast<T>(value));
        },
        storage_);
}

void Buffer::accumulate(const Buffer& other) {
    if (other.dtype() != dtype() || other.size() != size()) {
        throw std::logic_error("Buffer::accumulate: mismatched buffers");
    }
    dispatch(dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto dst = span<T>();
        auto src = other.span<T>();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += src[i];
        }
    });
}

std::vector<double> Buffer::to_doubles() const {
    return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, storage_);
}

// ---------------------------------------------------------------------------
// Graph

namespace detail {

struct Node {
    std::vector<Tensor> inputs;
    BackwardFn fn;
    const char* name = "";
    bool consumed = false;
};

struct TensorImpl {
    Shape shape;
    Buffer data;
    bool requires_grad = false;
    std::unique_ptr<Buffer> grad;
    std::shared_ptr<Node> node;
};

} // namespace detail

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto e : shape) {
        if (e < 0) {
            throw std::invalid_argument("negative extent in shape " + shape_str(shape));
        }
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "x" : "") << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return zeros(std::move(shape), default_dtype(), requires_grad); }

Tensor Tensor::zeros(Shape shape, Dtype dtype, bool requires_grad) {
    auto impl = std::make_shared<detail::TensorImpl>();
    const auto n = shape_numel(shape);
    impl->shape = std::move(shape);
    impl->data = Buffer(dtype, static_cast<std::size_t>(n));
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    t.buffer().fill(value);
    return t;
}

Tensor Tensor::from(Shape shape, std::span<const double> values, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    if (static_cast<std::size_t>(t.numel()) != values.size()) {
        throw std::invalid_argument("Tensor::from: " + std::to_string(values.size()) + " values for shape " +
                                    shape_str(t.shape()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        t.buffer().set(i, values[i]);
    }
    return t;
}

Tensor Tensor::from(Shape shape, std::initializer_list<double> values, bool requires_grad) {
    return from(std::move(shape), std::span<const double>(values.begin(), values.size()), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

detail::TensorImpl& Tensor::impl() const {
    if (!impl_) {
        throw std::logic_error("use of undefined Tensor");
    }
    return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::int64_t Tensor::dim(int axis) const {
    const auto& s = shape();
    if (axis < 0) {
        axis += static_cast<int>(s.size());
    }
    if (axis < 0 || axis >= static_cast<int>(s.size())) {
        throw std::out_of_range("Tensor::dim: axis out of range for " + shape_str(s));
    }
    return s[static_cast<std::size_t>(axis)];
}

int Tensor::ndim() const { return static_cast<int>(shape().size()); }
std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(impl().data.size()); }
Dtype Tensor::dtype() const { return impl().data.dtype(); }
bool Tensor::requires_grad() const { return impl().requires_grad; }

void Tensor::set_requires_grad(bool value) {
    if (impl().node && !value) {
        throw std::logic_error("cannot clear requires_grad on a non-leaf tensor");
    }
    impl().requires_grad = value;
}

bool Tensor::has_grad_fn() const { return impl().node != nullptr; }
Buffer& Tensor::buffer() { return impl().data; }
const Buffer& Tensor::buffer() const { return impl().data; }

double Tensor::item() const {
    if (numel() != 1) {
        throw std::logic_error("Tensor::item on tensor of shape " + shape_str(shape()));
    }
    return buffer().get(0);
}

double Tensor::at(std::int64_t flat_index) const { return buffer().get(static_cast<std::size_t>(flat_index)); }
std::vector<double> Tensor::values() const { return buffer().to_doubles(); }

bool Tensor::has_grad() const { return impl().grad != nullptr; }

const Buffer& Tensor::grad() const {
    if (!impl().grad) {
        throw std::logic_error("Tensor has no gradient");
    }
    return *impl().grad;
}

Buffer& Tensor::grad() {
    if (!impl().grad) {
        throw std::logic_error("Tensor has no gradient");
    }
    return *impl().grad;
}

std::vector<double> Tensor::grad_values() const {
    if (!has_grad()) {
        return std::vector<double>(static_cast<std::size_t>(numel()), 0.0);
    }
    return grad().to_doubles();
}

void Tensor::zero_grad() {
    if (impl().grad) {
        impl().grad->fill(0.0);
    }
}

Tensor Tensor::detach() const {
    auto impl2 = std::make_shared<detail::TensorImpl>();
    impl2->shape = impl().shape;
    impl2->data = impl().data;
    return Tensor(std::move(impl2));
}

void Tensor::record(Tensor& out, std::vector<Tensor> inputs, BackwardFn fn, const char* name) {
    if (!grad_enabled()) {
        return;
    }
    bool any = false;
    for (const auto& in : inputs) {
        any = any || (in.defined() && in.requires_grad());
    }
    if (!any) {
        return;
    }
    auto node = std::make_shared<detail::Node>();
    node->inputs = std::move(inputs);
    node->fn = std::move(fn);
    node->name = name;
    out.impl().requires_grad = true;
    out.impl().node = std::move(node);
}

void Tensor::backward() {
    if (numel() != 1) {
        throw std::logic_error("backward() requires a scalar output, got " + shape_str(shape()));
    }
    if (!requires_grad()) {
        throw std::logic_error("backward() on a tensor that does not require grad");
    }

    // Reverse topological order over tensors that carry a node. Holding
    // owning pointers keeps intermediates alive while node inputs are released.
    std::vector<std::shared_ptr<detail::TensorImpl>> order;
    std::unordered_set<detail::TensorImpl*> visited;
    std::vector<std::pair<std::shared_ptr<detail::TensorImpl>, std::size_t>> stack;
    stack.emplace_back(impl_, 0);
    visited.insert(impl_.get());
    while (!stack.empty()) {
        auto& [t, next] = stack.back();
        if (t->node && t->node->consumed) {
            throw std::logic_error(std::string("graph already consumed at node '") + t->node->name + "'");
        }
        if (t->node && next < t->node->inputs.size()) {
            const Tensor& in = t->node->inputs[next++];
            if (in.defined() && in.impl_->requires_grad && visited.insert(in.impl_.get()).second) {
                stack.emplace_back(in.impl_, 0);
            }
            continue;
        }
        order.push_back(t);
        stack.pop_back();
    }

    std::unordered_map<detail::TensorImpl*, Buffer> grads;
    auto grad_slot = [&](detail::TensorImpl* t) -> Buffer* {
        if (!t->node) {
            if (!t->grad) {
                t->grad = std::make_unique<Buffer>(t->data.dtype(), t->data.size());
            }
            return t->grad.get();
        }
        auto it = grads.find(t);
        if (it == grads.end()) {
            it = grads.emplace(t, Buffer(t->data.dtype(), t->data.size())).first;
        }
        return &it->second;
    };

    if (!impl_->node) {
        grad_slot(impl_.get())->accumulate([&] {
            Buffer one(impl_->data.dtype(), 1);
            one.fill(1.0);
            return one;
        }());
        return;
    }
    grad_slot(impl_.get())->fill(1.0);

    std::vector<Buffer*> slots;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorImpl* t = it->get();
        if (!t->node) {
            continue;
        }
        auto& node = *t->node;
        slots.assign(node.inputs.size(), nullptr);
        for (std::size_t i = 0; i < node.inputs.size(); ++i) {
            const Tensor& in = node.inputs[i];
            if (in.defined() && in.impl_->requires_grad) {
                slots[i] = grad_slot(in.impl_.get());
            }
        }
        Buffer* gout = grad_slot(t);
        node.fn(*gout, t->data, slots);
        node.consumed = true;
        node.fn = nullptr;
        node.inputs.clear();
        grads.erase(t);
    }
}

void check_finite(const Tensor& t, const std::string& what) {
    dispatch(t.dtype(), [&](auto tag) {
        using T = decltype(tag);
        for (T v : t.data<T>()) {
            if (!std::isfinite(v)) {
                throw std::runtime_error("non-finite value in " + what);
            }
        }
    });
}

} // namespace dynmap::diff
