#include "tape.hpp"

#include <cmath>

namespace meanflow {

namespace {

Tensor silu_prime(const Tensor& x) {
    Tensor out = x;
    for (size_t i = 0; i < out.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-out[i]));
        out[i] = s * (1.0 + out[i] * (1.0 - s));
    }
    return out;
}

// adjoint/tangent accumulation with empty == exact zero
void accumulate(Tensor& slot, const Tensor& delta) {
    if (delta.empty()) return;
    if (slot.empty())
        slot = delta;
    else
        slot = add(slot, delta);
}

Tensor broadcast_rows(const Tensor& row, i64 rows) {
    Tensor out({rows, row.cols()});
    for (i64 i = 0; i < rows; ++i)
        for (i64 j = 0; j < row.cols(); ++j) out.at(i, j) = row[static_cast<size_t>(j)];
    return out;
}

}  // namespace

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw InvalidError("tape: dangling var handle");
    return nodes_[static_cast<size_t>(v.id)];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Var Tape::input(Tensor value) { return push({Op::Input, -1, -1, 0.0, 0, std::move(value)}); }

Var Tape::param(const Tensor& value, size_t slot) {
    if (slot >= slot_count_) throw InvalidError("tape: parameter slot out of range");
    return push({Op::Param, -1, -1, 0.0, slot, value});
}

Var Tape::matmul(Var a, Var b) {
    return push({Op::MatMul, a.id, b.id, 0.0, 0, meanflow::matmul(value(a), value(b))});
}
Var Tape::add(Var a, Var b) {
    return push({Op::Add, a.id, b.id, 0.0, 0, meanflow::add(value(a), value(b))});
}
Var Tape::sub(Var a, Var b) {
    return push({Op::Sub, a.id, b.id, 0.0, 0, meanflow::sub(value(a), value(b))});
}
Var Tape::mul(Var a, Var b) {
    return push({Op::Mul, a.id, b.id, 0.0, 0, meanflow::mul(value(a), value(b))});
}
Var Tape::scale(Var a, double c) {
    return push({Op::Scale, a.id, -1, c, 0, meanflow::scale(value(a), c)});
}
Var Tape::add_scalar(Var a, double c) {
    return push({Op::AddScalar, a.id, -1, c, 0, meanflow::add_scalar(value(a), c)});
}
Var Tape::concat(Var a, Var b) {
    return push({Op::Concat, a.id, b.id, 0.0, 0, concat_cols(value(a), value(b))});
}
Var Tape::silu(Var a) { return push({Op::Silu, a.id, -1, 0.0, 0, meanflow::silu(value(a))}); }
Var Tape::sin(Var a) { return push({Op::Sin, a.id, -1, 0.0, 0, sin_of(value(a))}); }
Var Tape::cos(Var a) { return push({Op::Cos, a.id, -1, 0.0, 0, cos_of(value(a))}); }
Var Tape::sum(Var a) { return push({Op::Sum, a.id, -1, 0.0, 0, sum_all(value(a))}); }
Var Tape::mean(Var a) { return push({Op::Mean, a.id, -1, 0.0, 0, mean_all(value(a))}); }
Var Tape::row_sqnorm(Var a) {
    return push({Op::RowSqNorm, a.id, -1, 0.0, 0, meanflow::row_sqnorm(value(a))});
}
Var Tape::detach(Var a) { return push({Op::Detach, a.id, -1, 0.0, 0, value(a)}); }

std::vector<Tensor> Tape::grad(Var loss) {
    if (grad_taken_) throw InvalidError("tape: gradient already taken from this tape");
    grad_taken_ = true;
    const Node& top = node(loss);
    if (top.value.size() != 1)
        throw InvalidError("tape: grad requires a scalar loss, got " + top.value.shape_str());

    std::vector<Tensor> adj(nodes_.size());
    std::vector<Tensor> grads(slot_count_);
    adj[static_cast<size_t>(loss.id)] = Tensor::full(top.value.shape(), 1.0);

    for (int id = loss.id; id >= 0; --id) {
        const Node& n = nodes_[static_cast<size_t>(id)];
        Tensor& g = adj[static_cast<size_t>(id)];
        if (g.empty()) continue;
        auto A = [&](int arg) -> Tensor& { return adj[static_cast<size_t>(arg)]; };
        switch (n.op) {
            case Op::Input:
            case Op::Detach:
                break;
            case Op::Param:
                accumulate(grads[n.slot], g);
                break;
            case Op::MatMul: {
                const Tensor& va = nodes_[static_cast<size_t>(n.a)].value;
                const Tensor& vb = nodes_[static_cast<size_t>(n.b)].value;
                accumulate(A(n.a), meanflow::matmul(g, transpose(vb)));
                accumulate(A(n.b), meanflow::matmul(transpose(va), g));
                break;
            }
            case Op::Add: {
                accumulate(A(n.a), g);
                const Tensor& vb = nodes_[static_cast<size_t>(n.b)].value;
                if (vb.same_shape(g))
                    accumulate(A(n.b), g);
                else
                    accumulate(A(n.b), col_sum(g));  // bias broadcast
                break;
            }
            case Op::Sub:
                accumulate(A(n.a), g);
                accumulate(A(n.b), meanflow::scale(g, -1.0));
                break;
            case Op::Mul:
                accumulate(A(n.a), meanflow::mul(g, nodes_[static_cast<size_t>(n.b)].value));
                accumulate(A(n.b), meanflow::mul(g, nodes_[static_cast<size_t>(n.a)].value));
                break;
            case Op::Scale:
                accumulate(A(n.a), meanflow::scale(g, n.c));
                break;
            case Op::AddScalar:
                accumulate(A(n.a), g);
                break;
            case Op::Concat: {
                const Tensor& va = nodes_[static_cast<size_t>(n.a)].value;
                const Tensor& vb = nodes_[static_cast<size_t>(n.b)].value;
                Tensor ga({va.rows(), va.cols()});
                Tensor gb({vb.rows(), vb.cols()});
                for (i64 i = 0; i < g.rows(); ++i) {
                    for (i64 j = 0; j < va.cols(); ++j) ga.at(i, j) = g.at(i, j);
                    for (i64 j = 0; j < vb.cols(); ++j) gb.at(i, j) = g.at(i, va.cols() + j);
                }
                accumulate(A(n.a), ga);
                accumulate(A(n.b), gb);
                break;
            }
            case Op::Silu:
                accumulate(A(n.a),
                           meanflow::mul(g, silu_prime(nodes_[static_cast<size_t>(n.a)].value)));
                break;
            case Op::Sin:
                accumulate(A(n.a), meanflow::mul(g, cos_of(nodes_[static_cast<size_t>(n.a)].value)));
                break;
            case Op::Cos:
                accumulate(A(n.a),
                           meanflow::scale(meanflow::mul(g, sin_of(nodes_[static_cast<size_t>(n.a)].value)), -1.0));
                break;
            case Op::Sum:
                accumulate(A(n.a),
                           Tensor::full(nodes_[static_cast<size_t>(n.a)].value.shape(), g.value()));
                break;
            case Op::Mean: {
                const Tensor& va = nodes_[static_cast<size_t>(n.a)].value;
                accumulate(A(n.a),
                           Tensor::full(va.shape(), g.value() / static_cast<double>(va.size())));
                break;
            }
            case Op::RowSqNorm: {
                const Tensor& va = nodes_[static_cast<size_t>(n.a)].value;
                Tensor ga = va;
                for (i64 i = 0; i < va.rows(); ++i) {
                    const double gi = 2.0 * g[static_cast<size_t>(i)];
                    for (i64 j = 0; j < va.cols(); ++j) ga.at(i, j) *= gi;
                }
                accumulate(A(n.a), ga);
                break;
            }
        }
        // free as we go; a node's adjoint is complete once visited
        if (n.op != Op::Param) g = Tensor();
    }

    // empty entries mean exactly-zero; callers expand them against the param list
    return grads;
}

Tensor Tape::jvp(Var output, const std::vector<std::pair<Var, Tensor>>& seeds,
                 const std::vector<std::pair<size_t, Tensor>>& param_seeds) const {
    std::vector<Tensor> tan(nodes_.size());
    for (const auto& [var, seed] : seeds) {
        const Node& n = node(var);
        if (n.op != Op::Input)
            throw InvalidError("tape: jvp seeds must attach to input vars");
        if (!seed.same_shape(n.value))
            throw InvalidError("tape: jvp seed shape " + seed.shape_str() +
                               " does not match input " + n.value.shape_str());
        tan[static_cast<size_t>(var.id)] = seed;
    }
    if (!param_seeds.empty()) {
        for (size_t id = 0; id < nodes_.size(); ++id) {
            const Node& n = nodes_[id];
            if (n.op != Op::Param) continue;
            for (const auto& [slot, seed] : param_seeds) {
                if (slot != n.slot) continue;
                if (!seed.same_shape(n.value))
                    throw InvalidError("tape: param seed shape " + seed.shape_str() +
                                       " does not match slot " + std::to_string(slot));
                accumulate(tan[id], seed);
            }
        }
    }

    const int last = output.id;
    if (last < 0 || last >= static_cast<int>(nodes_.size()))
        throw InvalidError("tape: dangling var handle");

    for (int id = 0; id <= last; ++id) {
        const Node& n = nodes_[static_cast<size_t>(id)];
        auto T = [&](int arg) -> const Tensor& { return tan[static_cast<size_t>(arg)]; };
        Tensor& out = tan[static_cast<size_t>(id)];
        switch (n.op) {
            case Op::Input:
            case Op::Param:
            case Op::Detach:
                break;  // inputs/params keep their seed (or zero); detach is a constant
            case Op::MatMul: {
                const Tensor& va = nodes_[static_cast<size_t>(n.a)].value;
                const Tensor& vb = nodes_[static_cast<size_t>(n.b)].value;
                Tensor acc;
                if (!T(n.a).empty()) accumulate(acc, meanflow::matmul(T(n.a), vb));
                if (!T(n.b).empty()) accumulate(acc, meanflow::matmul(va, T(n.b)));
                out = std::move(acc);
                break;
            }
            case Op::Add: {
                Tensor acc;
                if (!T(n.a).empty()) accumulate(acc, T(n.a));
                if (!T(n.b).empty()) {
                    const Tensor& tb = T(n.b);
                    if (tb.same_shape(n.value))
                        accumulate(acc, tb);
                    else
                        accumulate(acc, broadcast_rows(tb, n.value.rows()));
                }
                out = std::move(acc);
                break;
            }
            case Op::Sub: {
                Tensor acc;
                if (!T(n.a).empty()) accumulate(acc, T(n.a));
                if (!T(n.b).empty()) accumulate(acc, meanflow::scale(T(n.b), -1.0));
                out = std::move(acc);
                break;
            }
            case Op::Mul: {
                Tensor acc;
                if (!T(n.a).empty())
                    accumulate(acc, meanflow::mul(T(n.a), nodes_[static_cast<size_t>(n.b)].value));
                if (!T(n.b).empty())
                    accumulate(acc, meanflow::mul(nodes_[static_cast<size_t>(n.a)].value, T(n.b)));
                out = std::move(acc);
                break;
            }
            case Op::Scale:
                if (!T(n.a).empty()) out = meanflow::scale(T(n.a), n.c);
                break;
            case Op::AddScalar:
                if (!T(n.a).empty()) out = T(n.a);
                break;
            case Op::Concat: {
                if (T(n.a).empty() && T(n.b).empty()) break;
                const Tensor& va = nodes_[static_cast<size_t>(n.a)].value;
                const Tensor& vb = nodes_[static_cast<size_t>(n.b)].value;
                Tensor ta = T(n.a).empty() ? Tensor({va.rows(), va.cols()}) : T(n.a);
                Tensor tb = T(n.b).empty() ? Tensor({vb.rows(), vb.cols()}) : T(n.b);
                out = concat_cols(ta, tb);
                break;
            }
            case Op::Silu:
                if (!T(n.a).empty())
                    out = meanflow::mul(T(n.a), silu_prime(nodes_[static_cast<size_t>(n.a)].value));
                break;
            case Op::Sin:
                if (!T(n.a).empty())
                    out = meanflow::mul(T(n.a), cos_of(nodes_[static_cast<size_t>(n.a)].value));
                break;
            case Op::Cos:
                if (!T(n.a).empty())
                    out = meanflow::scale(meanflow::mul(T(n.a), sin_of(nodes_[static_cast<size_t>(n.a)].value)),
                                -1.0);
                break;
            case Op::Sum:
                if (!T(n.a).empty()) out = sum_all(T(n.a));
                break;
            case Op::Mean:
                if (!T(n.a).empty()) out = mean_all(T(n.a));
                break;
            case Op::RowSqNorm: {
                if (T(n.a).empty()) break;
                const Tensor& va = nodes_[static_cast<size_t>(n.a)].value;
                const Tensor& ta = T(n.a);
                Tensor t({va.rows(), 1});
                for (i64 i = 0; i < va.rows(); ++i) {
                    double s = 0.0;
                    for (i64 j = 0; j < va.cols(); ++j) s += va.at(i, j) * ta.at(i, j);
                    t[static_cast<size_t>(i)] = 2.0 * s;
                }
                out = std::move(t);
                break;
            }
        }
    }

    Tensor result = tan[static_cast<size_t>(last)];
    if (result.empty()) result = Tensor(nodes_[static_cast<size_t>(last)].value.shape());
    return result;
}

}  // namespace meanflow
