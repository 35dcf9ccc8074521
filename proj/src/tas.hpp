#pragma once

#include <optional>
#include <vector>

#include "flow.hpp"

namespace meanflow {

// The four gap intervals the affinity diagnostic is reported on.
const std::vector<DtRange>& tas_intervals();

struct TASReport {
    // cosine between the v-loss gradient and the u-loss gradient restricted
    // to each interval; nullopt marks a zero-gradient degenerate interval
    std::vector<std::optional<double>> cosine;
    i64 points_used = 0;
};

struct TASOptions {
    i64 points = 5000;
    i64 gradient_batches = 10;  // points split into this many batches, cosines averaged
    double adp_c = 1e-3;
    double adp_p = 1.0;
};

// Cosine similarity between the parameter gradients of the v-loss (t = r) and
// the gap-restricted u-loss, evaluated on the same data points.
TASReport task_affinity(const VelocityNet& net, const DataSampler& data, const TASOptions& opts,
                        Rng& rng);

}  // namespace meanflow
