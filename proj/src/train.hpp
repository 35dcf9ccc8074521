#pragma once

#include <functional>
#include <string>
#include <vector>

#include "adam.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "evalsuite.hpp"
#include "flow.hpp"

namespace meanflow {

// sweep axes labeled in "epochs" use this desk-scale quantum
inline constexpr i64 kEpochIters = 100;

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<MetricsRecord> metrics;  // rows in emission order
    std::string run_dir;

    // last row carrying W2 readouts; ConfigError if the run never evaluated
    const MetricsRecord& final_eval() const;
};

// Runs (or resumes) one experiment. Artifacts land in the run directory:
// manifest.json, config.resolved.json, metrics.csv, checkpoint.json.
// `stop_after` > 0 interrupts after that many total iterations (testing and
// restartability); resuming from the written checkpoint continues the
// trajectory bit-exactly.
TrainResult train_run(ExperimentConfig cfg, const std::string& run_dir_override = "",
                      const Checkpoint* resume = nullptr, i64 stop_after = 0);

enum class SweepAxis { PretrainEpochs, KNoise, DtRange, KSched };

SweepAxis sweep_axis_from_string(const std::string& name);

struct SweepCell {
    std::string value;  // axis value label, e.g. "0.03" or "[0.1,0.3]"
    uint64_t seed = 0;
    bool ok = false;
    std::string error;
    MetricsRecord final_row;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::string csv_path;
};

// One full run per (value, seed) with the shared-seed policy; failed cells
// are recorded and the sweep continues. Completed cells (result.json present)
// are skipped on restart. The consolidated table lands in <out_dir>/sweep.csv.
// parallel > 1 runs that many cells concurrently (disjoint directories).
SweepResult run_stage_sweep(const ExperimentConfig& base, SweepAxis axis,
                            const std::vector<std::string>& values,
                            const std::vector<uint64_t>& seeds, const std::string& out_dir,
                            int parallel = 1);

// derives the per-cell config (exposed for tests and the studies)
ExperimentConfig sweep_cell_config(const ExperimentConfig& base, SweepAxis axis,
                                   const std::string& value, uint64_t seed);

// Runs fn(i) for i in [0, n) on up to `parallel` worker threads. Each i must
// touch only its own state (cells own disjoint output directories).
void parallel_cells(size_t n, int parallel, const std::function<void(size_t)>& fn);

}  // namespace meanflow
