#pragma once

#include <optional>
#include <string>

#include "net.hpp"
#include "tasks.hpp"

namespace meanflow {

// One evaluation row; W2 fields are empty when that readout was not run.
struct MetricsRecord {
    i64 iteration = 0;
    std::string stage;
    double loss_total = 0.0, loss_u = 0.0, loss_v = 0.0;
    double mean_beta = 1.0, mean_alpha = 1.0;
    double s = 0.0;
    std::optional<double> w2_1nfe, w2_2nfe, w2_euler32;

    static const char* csv_header();
    std::string csv_row() const;
};

struct EvalOptions {
    i64 samples = 2048;       // per cloud; exact-W2 cap applies
    uint64_t seed = 9000;     // fixed seed so checkpoints stay comparable
    int euler_nfe = 32;
};

// W2 against fresh ground-truth draws for mean-step {1,2} NFE and the
// euler-v multi-step readout. Deterministic given the options.
void eval_suite(const VelocityNet& net, const DataSampler& task, const EvalOptions& opts,
                MetricsRecord& record);

}  // namespace meanflow
