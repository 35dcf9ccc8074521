#pragma once

#include <utility>
#include <vector>

#include "tensor.hpp"

namespace meanflow {

// Handle into a Tape's node arena.
struct Var {
    int id = -1;
};

// Eagerly evaluated computation tape. Each op records a node and computes its
// value immediately, so the recorded order is already topological. The same
// recording supports one reverse pass (grad) and any number of forward-mode
// tangent passes (jvp). A tape is confined to a single thread.
//
// Tangents and adjoints are stored sparsely: an empty tensor means
// exactly-zero, so constants never produce work and a detached subgraph
// contributes nothing, bit-for-bit.
class Tape {
public:
    explicit Tape(size_t param_slots = 0) : slot_count_(param_slots) {}

    Var input(Tensor value);
    Var param(const Tensor& value, size_t slot);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);  // equal shapes or bias broadcast {B,K}+{1,K}
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var add_scalar(Var a, double c);
    Var concat(Var a, Var b);  // along columns
    Var silu(Var a);
    Var sin(Var a);
    Var cos(Var a);
    Var sum(Var a);
    Var mean(Var a);
    Var row_sqnorm(Var a);
    Var detach(Var a);

    const Tensor& value(Var v) const;
    size_t node_count() const { return nodes_.size(); }

    // Reverse pass from a scalar loss; returns d loss / d param per slot
    // (exact zeros for unused slots). Single use per tape.
    std::vector<Tensor> grad(Var loss);

    // Forward-mode pass: seeds attach tangents to input vars; param_seeds
    // attach a tangent to every use of a parameter slot (a directional
    // derivative in parameter space). Everything unseeded carries exactly
    // zero tangent. Returns the tangent of `output`.
    Tensor jvp(Var output, const std::vector<std::pair<Var, Tensor>>& seeds,
               const std::vector<std::pair<size_t, Tensor>>& param_seeds = {}) const;

private:
    enum class Op {
        Input,
        Param,
        MatMul,
        Add,
        Sub,
        Mul,
        Scale,
        AddScalar,
        Concat,
        Silu,
        Sin,
        Cos,
        Sum,
        Mean,
        RowSqNorm,
        Detach,
    };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        double c = 0.0;
        size_t slot = 0;
        Tensor value;
    };

    Var push(Node node);
    const Node& node(Var v) const;

    std::vector<Node> nodes_;
    size_t slot_count_ = 0;
    bool grad_taken_ = false;
};

}  // namespace meanflow
