#pragma once

#include <vector>

#include "net.hpp"
#include "rng.hpp"

namespace meanflow {

enum class SamplerMode { MeanStep, EulerV };

// Descending time grid from 1 to 0; mean-step takes nfe average-velocity
// jumps, euler-v integrates dz/dt = u(z, t, t) with forward Euler.
struct SamplerSpec {
    SamplerMode mode = SamplerMode::MeanStep;
    int nfe = 1;
    std::vector<double> grid;  // defaults to the uniform grid for nfe

    static SamplerSpec mean_step(int nfe);
    static SamplerSpec euler_v(int nfe);
    void validate() const;
};

// Any average-velocity field with a batched eval(z, r, t); satisfied by
// VelocityNet and by closed-form oracle fields in tests.
template <typename Field>
Tensor sample_from(const Field& field, const SamplerSpec& spec, const Tensor& eps) {
    spec.validate();
    Tensor z = eps;
    const i64 n = z.rows();
    for (size_t k = 0; k + 1 < spec.grid.size(); ++k) {
        const double t = spec.grid[k], r = spec.grid[k + 1];
        const Tensor tc = Tensor::full({n, 1}, t);
        if (spec.mode == SamplerMode::MeanStep) {
            // z_r = z_t - (t - r) u(z_t, r, t)
            Tensor u = field.eval(z, Tensor::full({n, 1}, r), tc);
            z = sub(z, row_scale(u, Tensor::full({n, 1}, t - r)));
        } else {
            // velocity estimate u(z, t, t) at the degenerate gap
            Tensor v = field.eval(z, tc, tc);
            z = sub(z, row_scale(v, Tensor::full({n, 1}, t - r)));
        }
    }
    z.check_finite("sampler output");
    return z;
}

// Pushes n draws of eps ~ N(0, I) from t = 1 to t = 0. Each sample costs
// exactly spec.nfe field evaluations.
template <typename Field>
Tensor sample(const Field& field, const SamplerSpec& spec, i64 n, i64 dim, Rng& rng) {
    return sample_from(field, spec, rng.normal_tensor({n, dim}));
}

inline Tensor sample(const VelocityNet& net, const SamplerSpec& spec, i64 n, Rng& rng) {
    return sample(net, spec, n, net.config().data_dim, rng);
}

}  // namespace meanflow
