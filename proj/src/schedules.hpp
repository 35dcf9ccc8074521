#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace meanflow {

enum class AlphaKind { Unit, ClampedSnr };
enum class SamplerKind { Base, Adaptive };

struct DtRange {
    double lo = 0.0;
    double hi = 1.0;
};

struct ScheduleConfig {
    double fm_ratio = 0.5;     // probability of a t == r (flow-matching) row
    double k_sched = 1.0;      // progress exponent, s = 1 - (i/T)^k
    bool progressive = false;  // gap weighting beta active
    AlphaKind alpha_kind = AlphaKind::Unit;
    SamplerKind sampler_kind = SamplerKind::Base;
    std::optional<DtRange> dt_range;

    double logit_mu = -0.4;  // base sampler: t = sigmoid(mu + sigma * N(0,1))
    double logit_sigma = 1.0;
    int bins = 64;             // adaptive sampler histogram
    double ema_decay = 0.99;
    double floor_mass = 0.1;   // share of uniform mass mixed into the density
    double snr_clamp = 5.0;    // gamma for the clamped-snr alpha
    int lambda_draws = 200000;
};

// progress s(i) = 1 - (i/T)^k
double progress(i64 i, i64 T, double k_sched);
// beta(dt, s) = 1 - s + lambda * s * (1 - dt)
double beta_weight(double dt, double s, double lambda);

struct TimeSample {
    Tensor t, r;  // {B,1} each, 0 <= r <= t <= 1
    std::vector<uint8_t> is_fm;
};

// All time/gap sampling and weighting policy. Mutated only by the training
// thread; the lambda normalizer is Monte-Carlo estimated once and frozen.
class ScheduleState {
public:
    ScheduleState() : ScheduleState(ScheduleConfig{}) {}
    explicit ScheduleState(ScheduleConfig config);

    const ScheduleConfig& config() const { return config_; }
    ScheduleConfig& mutable_config() { return config_; }

    void set_progress(i64 iteration, i64 total);
    double s() const { return s_; }
    double lambda() const { return lambda_; }

    // Estimates lambda = 1 / E[1 - dt] over gap rows of the configured
    // sampling; deterministic given the rng state passed in.
    void estimate_lambda(Rng rng);
    void set_lambda(double lambda) { lambda_ = lambda; }

    TimeSample sample_times(Rng& rng, i64 batch) const;
    double sample_t(Rng& rng) const;

    // weight for a gap row (1 when the progressive schedule is off)
    double beta(double dt) const;
    // weight for a flow-matching row
    double alpha(double t) const;

    // feeds flow-matching row losses into the adaptive sampler histogram
    void update_sampler(const TimeSample& times, const std::vector<double>& row_losses);

    const std::vector<double>& sampler_ema() const { return ema_; }
    void set_sampler_ema(std::vector<double> ema);
    std::vector<double> sampler_density() const;

    // affine [0,1] -> [lo,hi] gap rescaling (order preserving)
    static double rescale_gap(double raw, const DtRange& range);

private:
    ScheduleConfig config_;
    double s_ = 1.0;
    double lambda_ = 1.0;
    std::vector<double> ema_;
};

}  // namespace meanflow
