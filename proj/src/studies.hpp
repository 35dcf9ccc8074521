#pragma once

#include <optional>
#include <string>
#include <vector>

#include "train.hpp"

namespace meanflow {

// Desk-scale experiment sizing shared by the reproduce studies and the
// acceptance suite. One knob set so results stay comparable across studies.
struct StudyProfile {
    std::string task = "gauss8";
    std::vector<uint64_t> seeds = {1, 2, 3};
    std::vector<i64> net_widths = {128, 128, 128};
    i64 total_iters = 4000;     // budget of a full training run
    i64 pretrain_iters = 1000;  // v- or small-gap pretraining stage (obs2/obs3)
    i64 finetune_iters = 1500;  // gap-restricted finetuning stage (obs2)
    i64 batch = 256;
    i64 eval_samples = 1024;
    i64 trajectory_evals = 10;  // eval points for convergence-speed readouts
    int parallel = 1;           // concurrent cells (disjoint output directories)
};

ExperimentConfig study_base_config(const StudyProfile& profile);

struct StudyRow {
    std::string variant;
    std::string value;
    uint64_t seed = 0;
    bool ok = false;
    std::string error;
    MetricsRecord metrics;
    std::vector<std::optional<double>> tas;  // obs3 rows only
};

struct StudyVerdict {
    std::string hypothesis;
    bool pass = false;
    std::string detail;
};

struct StudyOutcome {
    std::string name;
    std::string csv_path;
    std::vector<StudyRow> rows;
    std::vector<StudyVerdict> verdicts;
};

const std::vector<std::string>& study_names();  // obs1, obs2, obs3, ablation, ksweep

// Runs one named study end to end: trains every cell (reusing completed
// cells on restart), writes <out_dir>/<study>.csv and verdicts.txt, and
// returns the rows plus one verdict per directional hypothesis.
StudyOutcome run_study(const std::string& study, const StudyProfile& profile,
                       const std::string& out_dir);

// Matched-budget convergence comparison between vanilla MeanFlow and the
// full method (acceleration sampler + progressive beta) on shared seeds.
struct SpeedBenchmark {
    std::vector<StudyRow> rows;            // per seed x {vanilla, full} final rows
    std::vector<double> reach_fractions;   // per seed: budget fraction where the
                                           // full method first meets the vanilla
                                           // final W2 (2.0 = never)
    double median_reach_fraction = 2.0;
    double median_final_vanilla = 0.0;
    double median_final_full = 0.0;
};

SpeedBenchmark run_speed_benchmark(const StudyProfile& profile, const std::string& out_dir);

double median(std::vector<double> values);

}  // namespace meanflow
