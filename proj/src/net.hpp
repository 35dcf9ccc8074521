#pragma once

#include <optional>
#include <vector>

#include "rng.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace meanflow {

struct NetConfig {
    i64 data_dim = 2;
    std::vector<i64> widths = {256, 256, 256};
    i64 time_embed_dim = 64;  // per time argument; half sin, half cos
    double time_freq_max = 1000.0;  // log-spaced band [1, max], radians
    i64 label_count = 0;            // 0 = unconditional
    i64 label_embed_dim = 16;

    bool operator==(const NetConfig&) const = default;
    i64 input_dim() const {
        return data_dim + 2 * time_embed_dim + (label_count > 0 ? label_embed_dim : 0);
    }
};

// The average-velocity model u(z, r, t): an MLP over
// concat(z, embed(t), embed(r)[, label embedding]) with SiLU activations.
// Hidden layers use orthogonal init; the output layer starts at zero so the
// model is the zero field at step 0.
class VelocityNet {
public:
    VelocityNet() = default;
    VelocityNet(NetConfig config, Rng& rng);

    const NetConfig& config() const { return config_; }
    std::vector<Tensor>& params() { return params_; }
    const std::vector<Tensor>& params() const { return params_; }
    size_t param_count() const;

    // Batched evaluation: z {B,D}, r/t {B,1} -> {B,D}.
    Tensor eval(const Tensor& z, const Tensor& r, const Tensor& t,
                const std::vector<i64>* labels = nullptr) const;
    // Scalar-time convenience, row-wise identical to the batched form.
    Tensor eval(const Tensor& z, double r, double t,
                const std::vector<i64>* labels = nullptr) const;

    struct Jvp {
        Tensor value;    // u(z, r, t)
        Tensor tangent;  // seed_v . du/dz + du/dt   (dr = 0, dt = 1)
    };
    Jvp eval_jvp(const Tensor& z, const Tensor& r, const Tensor& t, const Tensor& seed_v,
                 const std::vector<i64>* labels = nullptr) const;

    struct ForwardVars {
        Var out, z, r, t;
    };
    // Builds the forward graph on an external tape (prediction path used by
    // the training loss; gradients flow into the param slots).
    ForwardVars forward_on(Tape& tape, const Tensor& z, const Tensor& r, const Tensor& t,
                           const std::vector<i64>* labels = nullptr) const;

    // Expands sparse tape gradients to dense ones aligned with params().
    std::vector<Tensor> densify_grads(std::vector<Tensor> grads) const;

    static Tensor orthogonal(i64 rows, i64 cols, Rng& rng);

private:
    void check_labels(i64 batch, const std::vector<i64>* labels) const;
    Tensor label_onehot(i64 batch, const std::vector<i64>* labels) const;

    NetConfig config_;
    Tensor freqs_;  // {1, time_embed_dim/2}, log-spaced in [1, 1000]
    std::vector<Tensor> params_;
};

}  // namespace meanflow
