#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nps::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GradError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

template <class T>
struct TensorStorage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty when absent
    bool requires_grad = false;
    std::string name;
};

// Shared handle to a dense row-major tensor. Copies alias the same storage,
// which is how the tape and the optimizer refer to parameters.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
        : impl_(std::make_shared<TensorStorage<T>>())
    {
        if (shape_size(shape) != data.size())
            throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                             std::to_string(data.size()) + " values");
        impl_->shape = std::move(shape);
        impl_->data = std::move(data);
        impl_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false)
    {
        const auto n = shape_size(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
    }

    static Tensor full(Shape shape, T value)
    {
        const auto n = shape_size(shape);
        return Tensor(std::move(shape), std::vector<T>(n, value));
    }

    static Tensor scalar(T value) { return Tensor(Shape{}, {value}); }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<T> data,
                         bool requires_grad = false)
    {
        return Tensor(Shape{rows, cols}, std::move(data), requires_grad);
    }

    bool defined() const { return static_cast<bool>(impl_); }
    const Shape& shape() const { return impl_->shape; }
    std::size_t size() const { return impl_->data.size(); }
    std::size_t rank() const { return impl_->shape.size(); }

    // Two-dimensional view used by every op: leading dims collapse into rows.
    std::size_t cols() const { return impl_->shape.empty() ? 1 : impl_->shape.back(); }
    std::size_t rows() const
    {
        const auto c = cols();
        return c == 0 ? 0 : size() / c;
    }

    std::span<const T> data() const { return impl_->data; }
    std::span<T> mutable_data() { return impl_->data; }
    T operator[](std::size_t i) const { return impl_->data[i]; }
    T at(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }

    T item() const
    {
        if (size() != 1)
            throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool on) { impl_->requires_grad = on; }

    bool has_grad() const { return !impl_->grad.empty() || size() == 0; }
    std::span<const T> grad() const { return impl_->grad; }

    // Allocates a zero-filled gradient buffer on first use.
    std::span<T> grad_buffer()
    {
        if (impl_->grad.size() != impl_->data.size())
            impl_->grad.assign(impl_->data.size(), T(0));
        return impl_->grad;
    }

    void zero_grad()
    {
        if (!impl_->grad.empty())
            std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
    }

    void clear_grad() { impl_->grad.clear(); }

    const std::string& name() const { return impl_->name; }
    void set_name(std::string name) { impl_->name = std::move(name); }

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    bool all_finite() const
    {
        for (T v : impl_->data)
            if (!std::isfinite(v))
                return false;
        return true;
    }

private:
    std::shared_ptr<TensorStorage<T>> impl_;
};

} // namespace nps::ad
