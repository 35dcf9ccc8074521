#include "schedules.hpp"

#include <cmath>

namespace meanflow {

double progress(i64 i, i64 T, double k_sched) {
    if (T < 1 || i < 0 || i > T) throw InvalidError("progress: need 0 <= i <= T, T >= 1");
    if (k_sched <= 0.0) throw InvalidError("progress: k_sched must be positive");
    return 1.0 - std::pow(static_cast<double>(i) / static_cast<double>(T), k_sched);
}

double beta_weight(double dt, double s, double lambda) {
    return 1.0 - s + lambda * s * (1.0 - dt);
}

ScheduleState::ScheduleState(ScheduleConfig config) : config_(std::move(config)) {
    if (config_.fm_ratio < 0.0 || config_.fm_ratio > 1.0)
        throw ConfigError("schedule: fm_ratio must be in [0,1]");
    if (config_.bins < 1) throw ConfigError("schedule: bins must be >= 1");
    if (config_.dt_range) {
        const auto& r = *config_.dt_range;
        if (!(r.lo < r.hi) || r.lo <= 0.0 || r.hi > 1.0)
            throw ConfigError("schedule: dt_range needs 0 < lo < hi <= 1");
    }
    ema_.assign(static_cast<size_t>(config_.bins), 0.0);
}

void ScheduleState::set_progress(i64 iteration, i64 total) {
    s_ = progress(iteration, total, config_.k_sched);
}

double ScheduleState::beta(double dt) const {
    if (!config_.progressive) return 1.0;
    return beta_weight(dt, s_, lambda_);
}

double ScheduleState::alpha(double t) const {
    switch (config_.alpha_kind) {
        case AlphaKind::Unit:
            return 1.0;
        case AlphaKind::ClampedSnr: {
            if (t <= 0.0) return 0.0;  // SNR -> inf, clamp ratio -> 0
            const double ratio = (1.0 - t) / t;
            const double snr = ratio * ratio;
            return snr <= config_.snr_clamp ? 1.0 : config_.snr_clamp / snr;
        }
    }
    return 1.0;
}

std::vector<double> ScheduleState::sampler_density() const {
    const size_t n = ema_.size();
    std::vector<double> density(n, 1.0 / static_cast<double>(n));
    double total = 0.0;
    for (double e : ema_) total += e;
    if (total <= 0.0) return density;  // untrained histogram: uniform
    const double mix = config_.floor_mass;
    for (size_t i = 0; i < n; ++i)
        density[i] = (1.0 - mix) * (ema_[i] / total) + mix / static_cast<double>(n);
    return density;
}

void ScheduleState::set_sampler_ema(std::vector<double> ema) {
    if (ema.size() != static_cast<size_t>(config_.bins))
        throw ConfigError("schedule: sampler ema size does not match bin count");
    ema_ = std::move(ema);
}

double ScheduleState::sample_t(Rng& rng) const {
    if (config_.sampler_kind == SamplerKind::Base) {
        const double g = config_.logit_mu + config_.logit_sigma * rng.normal();
        return 1.0 / (1.0 + std::exp(-g));
    }
    // adaptive: pick a histogram bin, then uniform within it
    const std::vector<double> density = sampler_density();
    const double u = rng.uniform();
    double acc = 0.0;
    size_t bin = density.size() - 1;
    for (size_t i = 0; i < density.size(); ++i) {
        acc += density[i];
        if (u < acc) {
            bin = i;
            break;
        }
    }
    const double width = 1.0 / static_cast<double>(density.size());
    return (static_cast<double>(bin) + rng.uniform()) * width;
}

double ScheduleState::rescale_gap(double raw, const DtRange& range) {
    return range.lo + (range.hi - range.lo) * raw;
}

TimeSample ScheduleState::sample_times(Rng& rng, i64 batch) const {
    TimeSample out;
    out.t = Tensor({batch, 1});
    out.r = Tensor({batch, 1});
    out.is_fm.assign(static_cast<size_t>(batch), 0);

    for (i64 i = 0; i < batch; ++i) {
        double t = sample_t(rng);
        const bool fm = rng.uniform() < config_.fm_ratio;
        double r;
        if (fm) {
            r = t;
            out.is_fm[static_cast<size_t>(i)] = 1;
        } else if (config_.dt_range) {
            const DtRange range = *config_.dt_range;
            int guard = 0;
            while (t < range.lo) {
                t = sample_t(rng);
                if (++guard > 1000000)
                    throw NumericError("schedule: sampler places no mass above dt_range.lo");
            }
            const double raw = t - t * rng.uniform();  // raw gap of the draw r in [0,t]
            const double dt = rescale_gap(raw / t, range);
            r = std::max(t - dt, 0.0);
        } else {
            r = t * rng.uniform();
        }
        out.t[static_cast<size_t>(i)] = t;
        out.r[static_cast<size_t>(i)] = r;
    }
    return out;
}

void ScheduleState::estimate_lambda(Rng rng) {
    const int draws = config_.lambda_draws;
    double acc = 0.0;
    i64 count = 0;
    const i64 chunk = 1024;
    while (count < draws) {
        TimeSample s = sample_times(rng, chunk);
        for (i64 i = 0; i < chunk; ++i) {
            if (s.is_fm[static_cast<size_t>(i)]) continue;
            acc += 1.0 - (s.t[static_cast<size_t>(i)] - s.r[static_cast<size_t>(i)]);
            ++count;
            if (count >= draws) break;
        }
        if (config_.fm_ratio >= 1.0) break;  // no gap rows exist
    }
    lambda_ = count > 0 ? static_cast<double>(count) / acc : 1.0;
}

void ScheduleState::update_sampler(const TimeSample& times, const std::vector<double>& row_losses) {
    if (config_.sampler_kind != SamplerKind::Adaptive) return;
    const size_t n = ema_.size();
    std::vector<double> sums(n, 0.0);
    std::vector<i64> counts(n, 0);
    for (i64 i = 0; i < times.t.rows(); ++i) {
        if (!times.is_fm[static_cast<size_t>(i)]) continue;
        const double t = times.t[static_cast<size_t>(i)];
        size_t bin = static_cast<size_t>(t * static_cast<double>(n));
        if (bin >= n) bin = n - 1;
        sums[bin] += row_losses[static_cast<size_t>(i)];
        counts[bin] += 1;
    }
    for (size_t b = 0; b < n; ++b) {
        if (counts[b] == 0) continue;  // untouched bins keep their estimate
        const double mean = sums[b] / static_cast<double>(counts[b]);
        ema_[b] = config_.ema_decay * ema_[b] + (1.0 - config_.ema_decay) * mean;
    }
}

}  // namespace meanflow
