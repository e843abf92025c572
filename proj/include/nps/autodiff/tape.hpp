#pragma once

#include "nps/autodiff/tensor.hpp"

#include <functional>
#include <string_view>
#include <vector>

namespace nps::ad {

enum class OpKind {
    MatMul,
    Add,
    Sub,
    Mul,
    Relu,
    Sin,
    Cos,
    MaxZero,
    Abs,
    Square,
    Sum,
    Mean,
    Min,
    Concat,
    L2Normalize,
    Dot,
    Reciprocal,
    Scale,
    SliceCols,
    GatherRows,
    Encode,
};

constexpr std::string_view op_name(OpKind kind)
{
    switch (kind) {
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Relu: return "relu";
    case OpKind::Sin: return "sin";
    case OpKind::Cos: return "cos";
    case OpKind::MaxZero: return "max_zero";
    case OpKind::Abs: return "abs";
    case OpKind::Square: return "square";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::Min: return "min";
    case OpKind::Concat: return "concat";
    case OpKind::L2Normalize: return "l2_normalize";
    case OpKind::Dot: return "dot";
    case OpKind::Reciprocal: return "reciprocal";
    case OpKind::Scale: return "scale";
    case OpKind::SliceCols: return "slice_cols";
    case OpKind::GatherRows: return "gather_rows";
    case OpKind::Encode: return "encode";
    }
    return "unknown";
}

// Linear record of differentiable operations. Each record owns handles to its
// inputs and output, so intermediate tensors live as long as the tape.
template <class T>
class Tape {
public:
    struct Record {
        OpKind kind;
        std::vector<Tensor<T>> inputs;
        Tensor<T> output;
        std::function<void()> backward;
    };

    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

    void record(OpKind kind, std::vector<Tensor<T>> inputs, Tensor<T> output,
                std::function<void()> backward)
    {
        records_.push_back(Record{kind, std::move(inputs), std::move(output), std::move(backward)});
    }

    const std::vector<Record>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    void clear() { records_.clear(); }

private:
    bool recording_;
    std::vector<Record> records_;
};

// Reverse sweep. Every gradient-carrying tensor on the tape is reset to zero
// first, so unreached tensors end with zero grad and nothing accumulates
// across sweeps.
template <class T>
void backward(Tape<T>& tape, Tensor<T> loss)
{
    if (loss.size() != 1)
        throw GradError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    if (!loss.requires_grad())
        return;

    const auto& records = tape.records();
    for (const auto& rec : records) {
        for (auto in : rec.inputs) {
            if (in.requires_grad()) {
                in.grad_buffer();
                in.zero_grad();
            }
        }
        auto out = rec.output;
        out.grad_buffer();
        out.zero_grad();
    }
    loss.grad_buffer()[0] = T(1);

    for (auto it = records.rbegin(); it != records.rend(); ++it)
        it->backward();
}

} // namespace nps::ad
