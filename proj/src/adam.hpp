#pragma once

#include <vector>

#include "tensor.hpp"

namespace meanflow {

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;  // global gradient norm clip; <= 0 disables
};

// Standard Adam with bias correction and optional global-norm clipping.
class Adam {
public:
    Adam() = default;
    Adam(const std::vector<Tensor>& params, AdamConfig config);

    // one update in place; returns the pre-clip global gradient norm
    double step(std::vector<Tensor>& params, const std::vector<Tensor>& grads);

    const AdamConfig& config() const { return config_; }
    i64 steps_taken() const { return step_; }
    std::vector<Tensor>& moments_m() { return m_; }
    std::vector<Tensor>& moments_v() { return v_; }
    void restore(std::vector<Tensor> m, std::vector<Tensor> v, i64 steps);

private:
    AdamConfig config_;
    std::vector<Tensor> m_, v_;
    i64 step_ = 0;
};

}  // namespace meanflow
