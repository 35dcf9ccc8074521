#pragma once

#include <optional>
#include <string>
#include <vector>

#include "net.hpp"
#include "schedules.hpp"

namespace meanflow {

inline constexpr const char* kCodeVersion = "0.1.0";

// One training phase. The staged protocols (v-pretraining, gap-restricted
// finetuning, corruption runs) are stage lists over one model.
struct StageConfig {
    std::string name = "joint";
    i64 iters = 0;
    double fm_ratio = 0.5;
    double k_noise = 0.0;
    std::optional<DtRange> dt_range;
    SamplerKind sampler = SamplerKind::Base;
    AlphaKind alpha = AlphaKind::Unit;
    bool progressive = false;
};

struct TrainConfig {
    i64 total_iters = 4000;
    i64 batch = 512;
    double lr = 3e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 1.0;
    i64 log_every = 50;
    i64 eval_every = 0;  // 0 = only the final evaluation
    i64 eval_samples = 2048;
    uint64_t eval_seed = 9000;
    double adp_c = 1e-3;
    double adp_p = 1.0;
    std::vector<StageConfig> stages;  // empty = one joint stage over total_iters
};

struct ExperimentConfig {
    std::string experiment = "default";
    std::string task = "gauss8";
    uint64_t seed = 1;
    std::string out_dir;    // empty = <out root>/<experiment>
    std::string init_from;  // optional checkpoint whose params seed the model
    NetConfig net;
    TrainConfig train;
    ScheduleConfig schedule;

    // fills defaults (joint stage), checks stage budgets against total_iters
    void finalize_and_validate();
    std::vector<StageConfig> resolved_stages() const;
};

// Strict parsing: unknown keys are ConfigErrors naming the offending path.
ExperimentConfig parse_config_json(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// "a.b.c=value" overrides applied before validation; value is parsed as JSON
// when possible, else taken as a string.
ExperimentConfig apply_overrides(ExperimentConfig base,
                                 const std::vector<std::string>& overrides);

std::string config_to_json(const ExperimentConfig& cfg);  // resolved, canonical
uint64_t config_digest(const ExperimentConfig& cfg);

// generated key/type/default/doc listing for the config-reference verb
std::string config_reference();

// $MEANFLOW_OUT_ROOT or ./runs
std::string output_root();
std::string resolve_out_dir(const ExperimentConfig& cfg);

}  // namespace meanflow
