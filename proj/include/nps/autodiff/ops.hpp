#pragma once

#include "nps/autodiff/tape.hpp"
#include "nps/autodiff/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

// Differentiable operations. All ops view tensors as (rows, cols) with the
// last dimension as cols. Reductions accumulate in double.

namespace nps::ad {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using ConstMap = Eigen::Map<const RowMat<T>>;

template <class T>
using MutMap = Eigen::Map<RowMat<T>>;

template <class T>
bool wants_grad(const Tape<T>& tape, const std::vector<Tensor<T>>& inputs)
{
    if (!tape.recording())
        return false;
    return std::any_of(inputs.begin(), inputs.end(),
                       [](const Tensor<T>& t) { return t.requires_grad(); });
}

template <class T, class MakeBackward>
Tensor<T> emit(Tape<T>& tape, OpKind kind, std::vector<Tensor<T>> inputs, Shape shape,
               std::vector<T> data, MakeBackward&& make_backward)
{
    for (T v : data) {
        if (!std::isfinite(v))
            throw NumericError(std::string(op_name(kind)) + ": produced a non-finite value");
    }
    const bool rg = wants_grad(tape, inputs);
    Tensor<T> out(std::move(shape), std::move(data), rg);
    if (rg)
        tape.record(kind, std::move(inputs), out, make_backward(out));
    return out;
}

template <class T, class Fn>
void accumulate(Tensor<T> input, Fn&& fn)
{
    if (input.requires_grad())
        fn(input.grad_buffer());
}

inline Shape with_last(const Shape& shape, std::size_t last)
{
    Shape out = shape.empty() ? Shape{1} : shape;
    out.back() = last;
    return out;
}

struct Broadcast {
    std::size_t rows, cols;
    std::size_t ar, ac, br, bc;

    std::size_t a_index(std::size_t r, std::size_t c) const
    {
        return (ar == 1 ? 0 : r) * ac + (ac == 1 ? 0 : c);
    }
    std::size_t b_index(std::size_t r, std::size_t c) const
    {
        return (br == 1 ? 0 : r) * bc + (bc == 1 ? 0 : c);
    }
};

template <class T>
std::pair<Broadcast, Shape> broadcast(OpKind kind, const Tensor<T>& a, const Tensor<T>& b)
{
    Broadcast bc{0, 0, a.rows(), a.cols(), b.rows(), b.cols()};
    auto dim = [&](std::size_t x, std::size_t y) -> std::size_t {
        if (x == y || y == 1)
            return x;
        if (x == 1)
            return y;
        throw ShapeError(std::string(op_name(kind)) + ": cannot broadcast shapes " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
    };
    bc.rows = dim(bc.ar, bc.br);
    bc.cols = dim(bc.ac, bc.bc);
    Shape shape;
    if (bc.ar == bc.rows && bc.ac == bc.cols)
        shape = a.shape();
    else if (bc.br == bc.rows && bc.bc == bc.cols)
        shape = b.shape();
    else
        shape = Shape{bc.rows, bc.cols};
    return {bc, shape};
}

template <class T, class Fwd, class GradA, class GradB>
Tensor<T> binary(Tape<T>& tape, OpKind kind, const Tensor<T>& a, const Tensor<T>& b, Fwd fwd,
                 GradA grad_a, GradB grad_b)
{
    auto [bc, shape] = broadcast(kind, a, b);
    std::vector<T> out(bc.rows * bc.cols);
    const auto ad = a.data();
    const auto bd = b.data();
    for (std::size_t r = 0; r < bc.rows; ++r)
        for (std::size_t c = 0; c < bc.cols; ++c)
            out[r * bc.cols + c] = fwd(ad[bc.a_index(r, c)], bd[bc.b_index(r, c)]);

    return emit(tape, kind, {a, b}, std::move(shape), std::move(out), [=](Tensor<T> o) {
        return [=]() {
            const auto g = o.grad();
            const auto ad = a.data();
            const auto bd = b.data();
            accumulate(a, [&](std::span<T> ga) {
                for (std::size_t r = 0; r < bc.rows; ++r)
                    for (std::size_t c = 0; c < bc.cols; ++c) {
                        const auto ia = bc.a_index(r, c);
                        ga[ia] += grad_a(g[r * bc.cols + c], ad[ia], bd[bc.b_index(r, c)]);
                    }
            });
            accumulate(b, [&](std::span<T> gb) {
                for (std::size_t r = 0; r < bc.rows; ++r)
                    for (std::size_t c = 0; c < bc.cols; ++c) {
                        const auto ib = bc.b_index(r, c);
                        gb[ib] += grad_b(g[r * bc.cols + c], ad[bc.a_index(r, c)], bd[ib]);
                    }
            });
        };
    });
}

template <class T, class Fwd, class Deriv>
Tensor<T> unary(Tape<T>& tape, OpKind kind, const Tensor<T>& x, Fwd fwd, Deriv deriv)
{
    const auto xd = x.data();
    std::vector<T> out(xd.size());
    std::transform(xd.begin(), xd.end(), out.begin(), fwd);
    return emit(tape, kind, {x}, x.shape(), std::move(out), [=](Tensor<T> o) {
        return [=]() {
            const auto g = o.grad();
            const auto xd = x.data();
            accumulate(x, [&](std::span<T> gx) {
                for (std::size_t i = 0; i < gx.size(); ++i)
                    gx[i] += g[i] * deriv(xd[i]);
            });
        };
    });
}

} // namespace detail

template <class T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const auto m = a.shape()[0];
    const auto k = a.shape()[1];
    const auto n = b.shape()[1];
    std::vector<T> out(m * n);
    detail::MutMap<T>(out.data(), m, n).noalias() =
        detail::ConstMap<T>(a.data().data(), m, k) * detail::ConstMap<T>(b.data().data(), k, n);

    return detail::emit(tape, OpKind::MatMul, {a, b}, Shape{m, n}, std::move(out),
                        [=](Tensor<T> o) {
                            return [=]() {
                                const detail::ConstMap<T> g(o.grad().data(), m, n);
                                detail::accumulate(a, [&](std::span<T> ga) {
                                    detail::MutMap<T>(ga.data(), m, k).noalias() +=
                                        g * detail::ConstMap<T>(b.data().data(), k, n).transpose();
                                });
                                detail::accumulate(b, [&](std::span<T> gb) {
                                    detail::MutMap<T>(gb.data(), k, n).noalias() +=
                                        detail::ConstMap<T>(a.data().data(), m, k).transpose() * g;
                                });
                            };
                        });
}

template <class T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b)
{
    return detail::binary(
        tape, OpKind::Add, a, b, [](T x, T y) { return x + y; }, [](T g, T, T) { return g; },
        [](T g, T, T) { return g; });
}

template <class T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b)
{
    return detail::binary(
        tape, OpKind::Sub, a, b, [](T x, T y) { return x - y; }, [](T g, T, T) { return g; },
        [](T g, T, T) { return -g; });
}

template <class T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b)
{
    return detail::binary(
        tape, OpKind::Mul, a, b, [](T x, T y) { return x * y; }, [](T g, T, T y) { return g * y; },
        [](T g, T x, T) { return g * x; });
}

template <class T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x)
{
    return detail::unary(
        tape, OpKind::Relu, x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> max_zero(Tape<T>& tape, const Tensor<T>& x)
{
    return detail::unary(
        tape, OpKind::MaxZero, x, [](T v) { return std::max(v, T(0)); },
        [](T v) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> sin(Tape<T>& tape, const Tensor<T>& x)
{
    return detail::unary(
        tape, OpKind::Sin, x, [](T v) { return std::sin(v); }, [](T v) { return std::cos(v); });
}

template <class T>
Tensor<T> cos(Tape<T>& tape, const Tensor<T>& x)
{
    return detail::unary(
        tape, OpKind::Cos, x, [](T v) { return std::cos(v); }, [](T v) { return -std::sin(v); });
}

template <class T>
Tensor<T> abs(Tape<T>& tape, const Tensor<T>& x)
{
    return detail::unary(
        tape, OpKind::Abs, x, [](T v) { return std::abs(v); },
        [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <class T>
Tensor<T> square(Tape<T>& tape, const Tensor<T>& x)
{
    return detail::unary(
        tape, OpKind::Square, x, [](T v) { return v * v; }, [](T v) { return T(2) * v; });
}

template <class T>
Tensor<T> reciprocal(Tape<T>& tape, const Tensor<T>& x)
{
    return detail::unary(
        tape, OpKind::Reciprocal, x, [](T v) { return T(1) / v; },
        [](T v) { return T(-1) / (v * v); });
}

template <class T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor)
{
    return detail::unary(
        tape, OpKind::Scale, x, [factor](T v) { return factor * v; },
        [factor](T) { return factor; });
}

template <class T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x)
{
    double acc = 0.0;
    for (T v : x.data())
        acc += v;
    return detail::emit(tape, OpKind::Sum, {x}, Shape{}, {static_cast<T>(acc)}, [=](Tensor<T> o) {
        return [=]() {
            const T g = o.grad()[0];
            detail::accumulate(x, [&](std::span<T> gx) {
                for (auto& v : gx)
                    v += g;
            });
        };
    });
}

template <class T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x)
{
    if (x.size() == 0)
        throw ShapeError("mean: empty tensor");
    double acc = 0.0;
    for (T v : x.data())
        acc += v;
    const auto n = static_cast<double>(x.size());
    return detail::emit(tape, OpKind::Mean, {x}, Shape{}, {static_cast<T>(acc / n)},
                        [=](Tensor<T> o) {
                            return [=]() {
                                const T g = static_cast<T>(o.grad()[0] / n);
                                detail::accumulate(x, [&](std::span<T> gx) {
                                    for (auto& v : gx)
                                        v += g;
                                });
                            };
                        });
}

// Gradient goes to the first minimal element on ties.
template <class T>
Tensor<T> min(Tape<T>& tape, const Tensor<T>& x)
{
    if (x.size() == 0)
        throw ShapeError("min: empty tensor");
    const auto xd = x.data();
    std::size_t arg = 0;
    for (std::size_t i = 1; i < xd.size(); ++i)
        if (xd[i] < xd[arg])
            arg = i;
    return detail::emit(tape, OpKind::Min, {x}, Shape{}, {xd[arg]}, [=](Tensor<T> o) {
        return [=]() {
            const T g = o.grad()[0];
            detail::accumulate(x, [&](std::span<T> gx) { gx[arg] += g; });
        };
    });
}

// Concatenation along the last axis.
template <class T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts)
{
    if (parts.empty())
        throw ShapeError("concat: no inputs");
    const auto rows = parts.front().rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows)
            throw ShapeError("concat: row mismatch between " + shape_str(parts.front().shape()) +
                             " and " + shape_str(p.shape()));
        total += p.cols();
    }
    std::vector<T> out(rows * total);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const auto pc = p.cols();
        const auto pd = p.data();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(pd.begin() + r * pc, pc, out.begin() + r * total + offset);
        offset += pc;
    }
    return detail::emit(tape, OpKind::Concat, parts, detail::with_last(parts.front().shape(), total),
                        std::move(out), [=](Tensor<T> o) {
                            return [=]() {
                                const auto g = o.grad();
                                std::size_t off = 0;
                                for (const auto& p : parts) {
                                    const auto pc = p.cols();
                                    detail::accumulate(p, [&](std::span<T> gp) {
                                        for (std::size_t r = 0; r < rows; ++r)
                                            for (std::size_t c = 0; c < pc; ++c)
                                                gp[r * pc + c] += g[r * total + off + c];
                                    });
                                    off += pc;
                                }
                            };
                        });
}

template <class T>
Tensor<T> l2_normalize(Tape<T>& tape, const Tensor<T>& x)
{
    constexpr double eps = 1e-12;
    const auto rows = x.rows();
    const auto cols = x.cols();
    const auto xd = x.data();
    std::vector<T> out(xd.size());
    std::vector<double> norms(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
            s += double(xd[r * cols + c]) * xd[r * cols + c];
        norms[r] = std::max(std::sqrt(s), eps);
        for (std::size_t c = 0; c < cols; ++c)
            out[r * cols + c] = static_cast<T>(xd[r * cols + c] / norms[r]);
    }
    return detail::emit(tape, OpKind::L2Normalize, {x}, x.shape(), std::move(out),
                        [=](Tensor<T> o) {
                            return [=]() {
                                const auto g = o.grad();
                                const auto y = o.data();
                                detail::accumulate(x, [&](std::span<T> gx) {
                                    for (std::size_t r = 0; r < rows; ++r) {
                                        double yg = 0.0;
                                        for (std::size_t c = 0; c < cols; ++c)
                                            yg += double(y[r * cols + c]) * g[r * cols + c];
                                        for (std::size_t c = 0; c < cols; ++c) {
                                            const auto i = r * cols + c;
                                            gx[i] += static_cast<T>((g[i] - y[i] * yg) / norms[r]);
                                        }
                                    }
                                });
                            };
                        });
}

// Row-wise dot product along the last axis; output has last dim 1.
template <class T>
Tensor<T> dot(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("dot: shape mismatch " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const auto rows = a.rows();
    const auto cols = a.cols();
    const auto ad = a.data();
    const auto bd = b.data();
    std::vector<T> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
            s += double(ad[r * cols + c]) * bd[r * cols + c];
        out[r] = static_cast<T>(s);
    }
    return detail::emit(tape, OpKind::Dot, {a, b}, detail::with_last(a.shape(), 1), std::move(out),
                        [=](Tensor<T> o) {
                            return [=]() {
                                const auto g = o.grad();
                                const auto ad = a.data();
                                const auto bd = b.data();
                                detail::accumulate(a, [&](std::span<T> ga) {
                                    for (std::size_t r = 0; r < rows; ++r)
                                        for (std::size_t c = 0; c < cols; ++c)
                                            ga[r * cols + c] += g[r] * bd[r * cols + c];
                                });
                                detail::accumulate(b, [&](std::span<T> gb) {
                                    for (std::size_t r = 0; r < rows; ++r)
                                        for (std::size_t c = 0; c < cols; ++c)
                                            gb[r * cols + c] += g[r] * ad[r * cols + c];
                                });
                            };
                        });
}

template <class T>
Tensor<T> slice_cols(Tape<T>& tape, const Tensor<T>& x, std::size_t begin, std::size_t count)
{
    const auto rows = x.rows();
    const auto cols = x.cols();
    if (begin + count > cols)
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") exceeds shape " + shape_str(x.shape()));
    const auto xd = x.data();
    std::vector<T> out(rows * count);
    for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(xd.begin() + r * cols + begin, count, out.begin() + r * count);
    return detail::emit(tape, OpKind::SliceCols, {x}, detail::with_last(x.shape(), count),
                        std::move(out), [=](Tensor<T> o) {
                            return [=]() {
                                const auto g = o.grad();
                                detail::accumulate(x, [&](std::span<T> gx) {
                                    for (std::size_t r = 0; r < rows; ++r)
                                        for (std::size_t c = 0; c < count; ++c)
                                            gx[r * cols + begin + c] += g[r * count + c];
                                });
                            };
                        });
}

template <class T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& x, std::vector<std::size_t> indices)
{
    const auto rows = x.rows();
    const auto cols = x.cols();
    for (auto i : indices)
        if (i >= rows)
            throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range for shape " +
                             shape_str(x.shape()));
    const auto xd = x.data();
    const auto n = indices.size();
    std::vector<T> out(n * cols);
    for (std::size_t r = 0; r < n; ++r)
        std::copy_n(xd.begin() + indices[r] * cols, cols, out.begin() + r * cols);
    return detail::emit(tape, OpKind::GatherRows, {x}, Shape{n, cols}, std::move(out),
                        [=, idx = std::move(indices)](Tensor<T> o) {
                            return [=]() {
                                const auto g = o.grad();
                                detail::accumulate(x, [&](std::span<T> gx) {
                                    for (std::size_t r = 0; r < idx.size(); ++r)
                                        for (std::size_t c = 0; c < cols; ++c)
                                            gx[idx[r] * cols + c] += g[r * cols + c];
                                });
                            };
                        });
}

// Constant copy that takes no part in backward.
template <class T>
Tensor<T> detach(const Tensor<T>& x)
{
    return Tensor<T>(x.shape(), std::vector<T>(x.data().begin(), x.data().end()));
}

// Positional encoding (x, sin(2^0 pi x), cos(2^0 pi x), ..., cos(2^{m-1} pi x))
// applied per input column. Layout: raw columns first, then for each input
// column its 2m sinusoids ordered by level with sin before cos.
template <class T>
Tensor<T> encode(Tape<T>& tape, const Tensor<T>& x, std::size_t levels)
{
    const auto rows = x.rows();
    const auto dim = x.cols();
    const auto width = dim * (1 + 2 * levels);
    const auto xd = x.data();
    std::vector<T> out(rows * width);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double v = xd[r * dim + i];
            out[r * width + i] = xd[r * dim + i];
            for (std::size_t j = 0; j < levels; ++j) {
                const double freq = std::ldexp(std::numbers::pi, static_cast<int>(j));
                const auto col = dim + i * 2 * levels + 2 * j;
                out[r * width + col] = static_cast<T>(std::sin(freq * v));
                out[r * width + col + 1] = static_cast<T>(std::cos(freq * v));
            }
        }
    }
    return detail::emit(
        tape, OpKind::Encode, {x}, detail::with_last(x.shape(), width), std::move(out),
        [=](Tensor<T> o) {
            return [=]() {
                const auto g = o.grad();
                const auto xd = x.data();
                detail::accumulate(x, [&](std::span<T> gx) {
                    for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t i = 0; i < dim; ++i) {
                            const double v = xd[r * dim + i];
                            double acc = g[r * width + i];
                            for (std::size_t j = 0; j < levels; ++j) {
                                const double freq = std::ldexp(std::numbers::pi, static_cast<int>(j));
                                const auto col = dim + i * 2 * levels + 2 * j;
                                acc += g[r * width + col] * freq * std::cos(freq * v);
                                acc -= g[r * width + col + 1] * freq * std::sin(freq * v);
                            }
                            gx[r * dim + i] += static_cast<T>(acc);
                        }
                    }
                });
            };
        });
}

// Parameters for the generic dispatcher; only the fields relevant to the
// requested kind are read.
struct OpParams {
    double factor = 1.0;
    std::size_t begin = 0;
    std::size_t count = 0;
    std::vector<std::size_t> indices;
    std::size_t levels = 0;
};

template <class T>
Tensor<T> forward_op(Tape<T>& tape, OpKind kind, const std::vector<Tensor<T>>& inputs,
                     const OpParams& params = {})
{
    auto need = [&](std::size_t n) {
        if (inputs.size() != n)
            throw ShapeError(std::string(op_name(kind)) + ": expected " + std::to_string(n) +
                             " inputs, got " + std::to_string(inputs.size()));
    };
    switch (kind) {
    case OpKind::MatMul: need(2); return matmul(tape, inputs[0], inputs[1]);
    case OpKind::Add: need(2); return add(tape, inputs[0], inputs[1]);
    case OpKind::Sub: need(2); return sub(tape, inputs[0], inputs[1]);
    case OpKind::Mul: need(2); return mul(tape, inputs[0], inputs[1]);
    case OpKind::Relu: need(1); return relu(tape, inputs[0]);
    case OpKind::Sin: need(1); return sin(tape, inputs[0]);
    case OpKind::Cos: need(1); return cos(tape, inputs[0]);
    case OpKind::MaxZero: need(1); return max_zero(tape, inputs[0]);
    case OpKind::Abs: need(1); return abs(tape, inputs[0]);
    case OpKind::Square: need(1); return square(tape, inputs[0]);
    case OpKind::Sum: need(1); return sum(tape, inputs[0]);
    case OpKind::Mean: need(1); return mean(tape, inputs[0]);
    case OpKind::Min: need(1); return min(tape, inputs[0]);
    case OpKind::Concat: return concat(tape, inputs);
    case OpKind::L2Normalize: need(1); return l2_normalize(tape, inputs[0]);
    case OpKind::Dot: need(2); return dot(tape, inputs[0], inputs[1]);
    case OpKind::Reciprocal: need(1); return reciprocal(tape, inputs[0]);
    case OpKind::Scale: need(1); return scale(tape, inputs[0], static_cast<T>(params.factor));
    case OpKind::SliceCols: need(1); return slice_cols(tape, inputs[0], params.begin, params.count);
    case OpKind::GatherRows: need(1); return gather_rows(tape, inputs[0], params.indices);
    case OpKind::Encode: need(1); return encode(tape, inputs[0], params.levels);
    }
    throw ShapeError("forward_op: unknown kind");
}

} // namespace nps::ad
