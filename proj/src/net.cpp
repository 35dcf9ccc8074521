#include "net.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace meanflow {

namespace {

Tensor make_freqs(i64 embed_dim, double freq_max) {
    if (embed_dim < 2 || embed_dim % 2 != 0)
        throw ConfigError("net: time_embed_dim must be a positive even number");
    if (freq_max <= 1.0) throw ConfigError("net: time_freq_max must exceed 1");
    const i64 k = embed_dim / 2;
    Tensor f({1, k});
    const double lo = std::log(1.0), hi = std::log(freq_max);
    for (i64 i = 0; i < k; ++i) {
        const double a = k == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(k - 1);
        f[static_cast<size_t>(i)] = std::exp(lo + (hi - lo) * a);
    }
    return f;
}

}  // namespace

Tensor VelocityNet::orthogonal(i64 rows, i64 cols, Rng& rng) {
    const i64 tall = std::max(rows, cols), thin = std::min(rows, cols);
    Eigen::MatrixXd g(tall, thin);
    for (i64 i = 0; i < tall; ++i)
        for (i64 j = 0; j < thin; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tall, thin);
    for (i64 j = 0; j < thin; ++j)
        if (qr.matrixQR()(j, j) < 0) q.col(j) *= -1.0;  // fix sign so the map is unique
    Tensor out({rows, cols});
    for (i64 i = 0; i < rows; ++i)
        for (i64 j = 0; j < cols; ++j) out.at(i, j) = rows >= cols ? q(i, j) : q(j, i);
    return out;
}

VelocityNet::VelocityNet(NetConfig config, Rng& rng) : config_(std::move(config)) {
    if (config_.data_dim < 1) throw ConfigError("net: data_dim must be >= 1");
    if (config_.widths.empty()) throw ConfigError("net: at least one hidden width required");
    freqs_ = make_freqs(config_.time_embed_dim, config_.time_freq_max);

    std::vector<i64> dims;
    dims.push_back(config_.input_dim());
    for (i64 w : config_.widths) dims.push_back(w);
    dims.push_back(config_.data_dim);

    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const bool last = l + 2 == dims.size();
        Tensor w = last ? Tensor({dims[l], dims[l + 1]}) : orthogonal(dims[l], dims[l + 1], rng);
        params_.push_back(std::move(w));
        params_.push_back(Tensor({1, dims[l + 1]}));  // bias
    }
    if (config_.label_count > 0) {
        Tensor e({config_.label_count, config_.label_embed_dim});
        for (size_t i = 0; i < e.size(); ++i) e[i] = 0.02 * rng.normal();
        params_.push_back(std::move(e));
    }
}

size_t VelocityNet::param_count() const {
    size_t n = 0;
    for (const Tensor& p : params_) n += p.size();
    return n;
}

void VelocityNet::check_labels(i64 batch, const std::vector<i64>* labels) const {
    if (config_.label_count == 0) {
        if (labels != nullptr)
            throw ConfigError("net: labels supplied to an unconditional model");
        return;
    }
    if (labels == nullptr)
        throw ConfigError("net: conditional model requires labels");
    if (static_cast<i64>(labels->size()) != batch)
        throw ConfigError("net: label count does not match batch size");
    for (i64 l : *labels)
        if (l < 0 || l >= config_.label_count)
            throw ConfigError("net: label " + std::to_string(l) + " out of range [0, " +
                              std::to_string(config_.label_count) + ")");
}

Tensor VelocityNet::label_onehot(i64 batch, const std::vector<i64>* labels) const {
    Tensor oh({batch, config_.label_count});
    for (i64 i = 0; i < batch; ++i) oh.at(i, (*labels)[static_cast<size_t>(i)]) = 1.0;
    return oh;
}

VelocityNet::ForwardVars VelocityNet::forward_on(Tape& tape, const Tensor& z, const Tensor& r,
                                                 const Tensor& t,
                                                 const std::vector<i64>* labels) const {
    if (z.rank() != 2 || z.cols() != config_.data_dim)
        throw InvalidError("net: z must be {B," + std::to_string(config_.data_dim) + "}, got " +
                           z.shape_str());
    const i64 batch = z.rows();
    if (r.rank() != 2 || r.cols() != 1 || r.rows() != batch || !t.same_shape(r))
        throw InvalidError("net: r and t must be {B,1} matching z");
    check_labels(batch, labels);

    Var vz = tape.input(z);
    Var vr = tape.input(r);
    Var vt = tape.input(t);
    Var fr = tape.input(freqs_);

    auto embed = [&](Var time) {
        Var phase = tape.matmul(time, fr);
        return tape.concat(tape.sin(phase), tape.cos(phase));
    };
    Var x = tape.concat(tape.concat(vz, embed(vt)), embed(vr));
    if (config_.label_count > 0) {
        Var oh = tape.input(label_onehot(batch, labels));
        Var table = tape.param(params_.back(), params_.size() - 1);
        x = tape.concat(x, tape.matmul(oh, table));
    }

    const size_t layers = config_.widths.size() + 1;
    for (size_t l = 0; l < layers; ++l) {
        Var w = tape.param(params_[2 * l], 2 * l);
        Var b = tape.param(params_[2 * l + 1], 2 * l + 1);
        x = tape.add(tape.matmul(x, w), b);
        if (l + 1 < layers) x = tape.silu(x);
    }
    return {x, vz, vr, vt};
}

Tensor VelocityNet::eval(const Tensor& z, const Tensor& r, const Tensor& t,
                         const std::vector<i64>* labels) const {
    Tape tape(params_.size());
    return tape.value(forward_on(tape, z, r, t, labels).out);
}

Tensor VelocityNet::eval(const Tensor& z, double r, double t,
                         const std::vector<i64>* labels) const {
    const i64 batch = z.rows();
    return eval(z, Tensor::full({batch, 1}, r), Tensor::full({batch, 1}, t), labels);
}

VelocityNet::Jvp VelocityNet::eval_jvp(const Tensor& z, const Tensor& r, const Tensor& t,
                                       const Tensor& seed_v, const std::vector<i64>* labels) const {
    if (!seed_v.same_shape(z))
        throw InvalidError("net: jvp seed shape " + seed_v.shape_str() + " does not match z " +
                           z.shape_str());
    Tape tape(params_.size());
    ForwardVars f = forward_on(tape, z, r, t, labels);
    Tensor tangent =
        tape.jvp(f.out, {{f.z, seed_v}, {f.t, Tensor::full({z.rows(), 1}, 1.0)}});
    return {tape.value(f.out), std::move(tangent)};
}

std::vector<Tensor> VelocityNet::densify_grads(std::vector<Tensor> grads) const {
    if (grads.size() != params_.size())
        throw InvalidError("net: gradient slot count mismatch");
    for (size_t i = 0; i < grads.size(); ++i)
        if (grads[i].empty()) grads[i] = Tensor(params_[i].shape());
    return grads;
}

}  // namespace meanflow
