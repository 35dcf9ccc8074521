#include "tas.hpp"

#include <cmath>

namespace meanflow {

const std::vector<DtRange>& tas_intervals() {
    static const std::vector<DtRange> intervals = {
        {0.1, 0.3}, {0.3, 0.5}, {0.5, 0.7}, {0.7, 0.9}};
    return intervals;
}

namespace {

// flattened parameter gradient of the loss on `batch`; empty slots densified
std::vector<double> loss_gradient(const VelocityNet& net, const TrainingBatch& batch,
                                  const ScheduleState& sched, const LossOptions& opts, Rng& rng) {
    Tape tape(net.params().size());
    LossGraph lg = meanflow_loss(tape, net, batch, sched, opts, rng);
    std::vector<Tensor> grads = net.densify_grads(tape.grad(lg.loss));
    std::vector<double> flat;
    for (const Tensor& g : grads) flat.insert(flat.end(), g.data(), g.data() + g.size());
    return flat;
}

}  // namespace

TASReport task_affinity(const VelocityNet& net, const DataSampler& data, const TASOptions& opts,
                        Rng& rng) {
    if (opts.points < 2) throw InvalidError("task_affinity: need at least 2 points");
    const i64 batches = std::max<i64>(1, opts.gradient_batches);
    const i64 per_batch = std::max<i64>(1, opts.points / batches);

    LossOptions loss_opts;
    loss_opts.adp_c = opts.adp_c;
    loss_opts.adp_p = opts.adp_p;

    ScheduleState v_sched{[] {
        ScheduleConfig c;
        c.fm_ratio = 1.0;
        return c;
    }()};

    TASReport report;
    report.points_used = per_batch * batches;
    report.cosine.assign(tas_intervals().size(), std::nullopt);

    std::vector<double> cos_sum(tas_intervals().size(), 0.0);
    std::vector<i64> cos_count(tas_intervals().size(), 0);

    for (i64 b = 0; b < batches; ++b) {
        Tensor x = data.sample(rng, per_batch);
        Tensor eps = rng.normal_tensor({per_batch, data.dim()});

        TrainingBatch v_batch = assemble_batch(x, eps, v_sched.sample_times(rng, per_batch));
        std::vector<double> g_v = loss_gradient(net, v_batch, v_sched, loss_opts, rng);
        double v_norm = 0.0;
        for (double g : g_v) v_norm += g * g;
        v_norm = std::sqrt(v_norm);
        if (v_norm == 0.0) continue;  // degenerate: no v signal in this batch

        for (size_t k = 0; k < tas_intervals().size(); ++k) {
            ScheduleConfig uc;
            uc.fm_ratio = 0.0;
            uc.dt_range = tas_intervals()[k];
            ScheduleState u_sched{uc};
            TrainingBatch u_batch = assemble_batch(x, eps, u_sched.sample_times(rng, per_batch));
            std::vector<double> g_u = loss_gradient(net, u_batch, u_sched, loss_opts, rng);

            double u_norm = 0.0, inner = 0.0;
            for (size_t i = 0; i < g_u.size(); ++i) {
                u_norm += g_u[i] * g_u[i];
                inner += g_u[i] * g_v[i];
            }
            u_norm = std::sqrt(u_norm);
            if (u_norm == 0.0) continue;
            cos_sum[k] += inner / (u_norm * v_norm);
            cos_count[k] += 1;
        }
    }

    for (size_t k = 0; k < cos_sum.size(); ++k)
        if (cos_count[k] > 0) report.cosine[k] = cos_sum[k] / static_cast<double>(cos_count[k]);
    return report;
}

}  // namespace meanflow
