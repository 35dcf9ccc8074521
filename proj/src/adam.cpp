#include "adam.hpp"

#include <cmath>

namespace meanflow {

Adam::Adam(const std::vector<Tensor>& params, AdamConfig config) : config_(config) {
    for (const Tensor& p : params) {
        m_.push_back(Tensor(p.shape()));
        v_.push_back(Tensor(p.shape()));
    }
}

void Adam::restore(std::vector<Tensor> m, std::vector<Tensor> v, i64 steps) {
    if (m.size() != m_.size() || v.size() != v_.size())
        throw ConfigError("adam: moment count does not match parameter count");
    m_ = std::move(m);
    v_ = std::move(v);
    step_ = steps;
}

double Adam::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
    if (params.size() != m_.size() || grads.size() != params.size())
        throw InvalidError("adam: parameter/gradient count mismatch");

    double sq = 0.0;
    for (const Tensor& g : grads)
        for (size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
    const double norm = std::sqrt(sq);
    double clip_scale = 1.0;
    if (config_.clip_norm > 0.0 && norm > config_.clip_norm)
        clip_scale = config_.clip_norm / norm;

    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));

    for (size_t p = 0; p < params.size(); ++p) {
        if (!params[p].same_shape(grads[p]))
            throw InvalidError("adam: gradient shape mismatch at slot " + std::to_string(p));
        for (size_t i = 0; i < params[p].size(); ++i) {
            const double g = grads[p][i] * clip_scale;
            m_[p][i] = config_.beta1 * m_[p][i] + (1.0 - config_.beta1) * g;
            v_[p][i] = config_.beta2 * v_[p][i] + (1.0 - config_.beta2) * g * g;
            const double mhat = m_[p][i] / bc1;
            const double vhat = v_[p][i] / bc2;
            params[p][i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
    return norm;
}

}  // namespace meanflow
