#include "flow.hpp"

#include <cmath>

namespace meanflow {

TrainingBatch assemble_batch(Tensor x, Tensor eps, TimeSample times) {
    TrainingBatch b;
    b.x = std::move(x);
    b.eps = std::move(eps);
    b.t = std::move(times.t);
    b.r = std::move(times.r);
    b.is_fm = std::move(times.is_fm);

    const i64 batch = b.x.rows(), dim = b.x.cols();
    b.z = Tensor({batch, dim});
    b.v_cond = Tensor({batch, dim});
    for (i64 i = 0; i < batch; ++i) {
        const double t = b.t[static_cast<size_t>(i)];
        for (i64 j = 0; j < dim; ++j) {
            b.z.at(i, j) = (1.0 - t) * b.x.at(i, j) + t * b.eps.at(i, j);
            b.v_cond.at(i, j) = b.eps.at(i, j) - b.x.at(i, j);
        }
    }
    return b;
}

TrainingBatch make_batch(const DataSampler& data, Rng& rng, i64 batch,
                         const ScheduleState& sched) {
    if (batch < 1) throw InvalidError("make_batch: batch size must be >= 1");
    Tensor x = data.sample(rng, batch);
    if (x.rows() != batch || x.cols() != data.dim())
        throw InvalidError("make_batch: data sampler returned wrong shape " + x.shape_str());
    Tensor eps = rng.normal_tensor({batch, data.dim()});
    return assemble_batch(std::move(x), std::move(eps), sched.sample_times(rng, batch));
}

Tensor meanflow_target(const VelocityNet& net, const TrainingBatch& batch) {
    const std::vector<i64>* labels = batch.labels ? &*batch.labels : nullptr;
    VelocityNet::Jvp jvp = net.eval_jvp(batch.z, batch.r, batch.t, batch.v_cond, labels);
    Tensor dt = sub(batch.t, batch.r);  // {B,1}
    Tensor target = sub(batch.v_cond, row_scale(jvp.tangent, dt));
    target.check_finite("meanflow target (jvp output)");
    return target;
}

Tensor corrupt_v_target(const Tensor& v_cond, double k_noise, Rng& rng) {
    if (k_noise < 0.0) throw InvalidError("corrupt_v_target: k_noise must be >= 0");
    if (k_noise == 0.0) return v_cond;
    Tensor out = v_cond;
    for (i64 i = 0; i < v_cond.rows(); ++i) {
        double norm = 0.0;
        for (i64 j = 0; j < v_cond.cols(); ++j) norm += v_cond.at(i, j) * v_cond.at(i, j);
        norm = std::sqrt(norm);
        for (i64 j = 0; j < v_cond.cols(); ++j)
            out.at(i, j) += k_noise * norm * rng.normal();
    }
    return out;
}

Tensor one_step_update(const VelocityNet& net, const Tensor& z, const Tensor& r, const Tensor& t) {
    Tensor u = net.eval(z, r, t);
    return sub(z, row_scale(u, sub(t, r)));
}

Tensor one_step_update(const VelocityNet& net, const Tensor& z, double r, double t) {
    const i64 batch = z.rows();
    return one_step_update(net, z, Tensor::full({batch, 1}, r), Tensor::full({batch, 1}, t));
}

LossGraph meanflow_loss(Tape& tape, const VelocityNet& net, const TrainingBatch& batch,
                        const ScheduleState& sched, const LossOptions& opts, Rng& rng) {
    const i64 B = batch.size();
    const std::vector<i64>* labels = batch.labels ? &*batch.labels : nullptr;

    // regression targets, all detached by construction
    Tensor u_tgt = meanflow_target(net, batch);
    Tensor v_tgt = corrupt_v_target(batch.v_cond, opts.k_noise, rng);
    Tensor target({B, batch.x.cols()});
    for (i64 i = 0; i < B; ++i) {
        const Tensor& src = batch.is_fm[static_cast<size_t>(i)] ? v_tgt : u_tgt;
        for (i64 j = 0; j < target.cols(); ++j) target.at(i, j) = src.at(i, j);
    }

    VelocityNet::ForwardVars f = net.forward_on(tape, batch.z, batch.r, batch.t, labels);
    Var err = tape.sub(f.out, tape.input(target));
    Var rowsq = tape.row_sqnorm(err);
    const Tensor& rowsq_val = tape.value(rowsq);

    LossBreakdown bd;
    bd.raw_err.resize(static_cast<size_t>(B));
    bd.w_adp.resize(static_cast<size_t>(B));
    bd.sched_w.resize(static_cast<size_t>(B));
    Tensor weights({B, 1});
    double beta_sum = 0.0, alpha_sum = 0.0;
    i64 gap_rows = 0, fm_rows = 0;
    for (i64 i = 0; i < B; ++i) {
        const size_t k = static_cast<size_t>(i);
        bd.raw_err[k] = rowsq_val[k];
        bd.w_adp[k] =
            opts.force_unit_adp ? 1.0 : 1.0 / std::pow(rowsq_val[k] + opts.adp_c, opts.adp_p);
        if (batch.is_fm[k]) {
            bd.sched_w[k] = sched.alpha(batch.t[k]);
            alpha_sum += bd.sched_w[k];
            ++fm_rows;
        } else {
            bd.sched_w[k] = sched.beta(batch.gap(i));
            beta_sum += bd.sched_w[k];
            ++gap_rows;
        }
        weights[k] = bd.sched_w[k] * bd.w_adp[k];
    }
    bd.mean_beta = gap_rows > 0 ? beta_sum / static_cast<double>(gap_rows) : 1.0;
    bd.mean_alpha = fm_rows > 0 ? alpha_sum / static_cast<double>(fm_rows) : 1.0;

    Var weighted = tape.mul(rowsq, tape.input(weights));
    Var loss = tape.mean(weighted);
    bd.total = tape.value(loss).value();

    const Tensor& weighted_val = tape.value(weighted);
    for (i64 i = 0; i < B; ++i) {
        const size_t k = static_cast<size_t>(i);
        if (batch.is_fm[k])
            bd.v_part += weighted_val[k];
        else
            bd.u_part += weighted_val[k];
    }
    bd.u_part /= static_cast<double>(B);
    bd.v_part /= static_cast<double>(B);

    return {loss, std::move(bd)};
}

}  // namespace meanflow
