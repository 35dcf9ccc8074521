#pragma once

#include <optional>
#include <vector>

#include "net.hpp"
#include "schedules.hpp"
#include "tasks.hpp"

namespace meanflow {

// Paired training rows: z is the linear interpolant (1-t) x + t eps and
// v_cond = eps - x its time derivative; t = 1 is the pure-noise end.
struct TrainingBatch {
    Tensor x, eps;     // {B,D}
    Tensor t, r;       // {B,1}, r <= t
    Tensor z, v_cond;  // {B,D}
    std::vector<uint8_t> is_fm;
    std::optional<std::vector<i64>> labels;

    i64 size() const { return x.rows(); }
    double gap(i64 i) const {
        return t[static_cast<size_t>(i)] - r[static_cast<size_t>(i)];
    }
};

TrainingBatch make_batch(const DataSampler& data, Rng& rng, i64 batch,
                         const ScheduleState& sched);

// Builds the derived interpolant fields from already-drawn pieces (the
// diagnostics reuse one set of data points under different time samples).
TrainingBatch assemble_batch(Tensor x, Tensor eps, TimeSample times);

// Bootstrapped regression target u_tgt = v - (t - r) (v du/dz + du/dt),
// evaluated with a forward-mode pass and detached from any gradient path.
// Rows with t == r come out as v_cond exactly.
Tensor meanflow_target(const VelocityNet& net, const TrainingBatch& batch);

// v_cond + k * ||v_cond||_row * g with g ~ N(0,I); k = 0 returns the input.
Tensor corrupt_v_target(const Tensor& v_cond, double k_noise, Rng& rng);

// z_r = z_t - (t - r) u(z_t, r, t)
Tensor one_step_update(const VelocityNet& net, const Tensor& z, const Tensor& r, const Tensor& t);
Tensor one_step_update(const VelocityNet& net, const Tensor& z, double r, double t);

struct LossBreakdown {
    std::vector<double> raw_err;   // ||e||^2 per row
    std::vector<double> w_adp;     // adaptive weight per row (constant to the grad)
    std::vector<double> sched_w;   // alpha for fm rows, beta for gap rows
    double total = 0.0;
    double u_part = 0.0;
    double v_part = 0.0;
    double mean_beta = 1.0;   // over gap rows, 1 if none
    double mean_alpha = 1.0;  // over fm rows, 1 if none
};

struct LossOptions {
    double adp_c = 1e-3;  // w_adp = 1 / (||e||^2 + c)^p
    double adp_p = 1.0;
    double k_noise = 0.0;         // corruption of fm-row targets only
    bool force_unit_adp = false;  // testing hook: w_adp = 1
};

struct LossGraph {
    Var loss;  // scalar on the tape, ready for grad()
    LossBreakdown breakdown;
};

// Builds the decomposed MeanFlow loss on `tape`:
//   gap rows: beta(dt, s) * w_adp * ||u(z,r,t) - u_tgt||^2
//   fm rows:  alpha(t)    * w_adp * ||u(z,t,t) - v_target||^2
// with all weights applied after the adaptive normalization, as constants.
LossGraph meanflow_loss(Tape& tape, const VelocityNet& net, const TrainingBatch& batch,
                        const ScheduleState& sched, const LossOptions& opts, Rng& rng);

}  // namespace meanflow
