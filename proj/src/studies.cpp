#include "studies.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tas.hpp"

namespace meanflow {

namespace fs = std::filesystem;
using nlohmann::json;

double median(std::vector<double> values) {
    if (values.empty()) throw InvalidError("median of an empty set");
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ExperimentConfig study_base_config(const StudyProfile& profile) {
    ExperimentConfig cfg;
    cfg.task = profile.task;
    cfg.net.widths = profile.net_widths;
    cfg.train.total_iters = profile.total_iters;
    cfg.train.batch = profile.batch;
    cfg.train.log_every = 200;
    cfg.train.eval_every = 0;
    cfg.train.eval_samples = profile.eval_samples;
    cfg.schedule.lambda_draws = 50000;
    return cfg;
}

const std::vector<std::string>& study_names() {
    static const std::vector<std::string> names = {"obs1", "obs2", "obs3", "ablation", "ksweep"};
    return names;
}

namespace {

StageConfig stage(const std::string& name, i64 iters, double fm_ratio) {
    StageConfig s;
    s.name = name;
    s.iters = iters;
    s.fm_ratio = fm_ratio;
    return s;
}

// Runs the config in cell_dir unless its result marker already exists.
MetricsRecord run_cell(const ExperimentConfig& cfg, const std::string& cell_dir) {
    const std::string marker = cell_dir + "/result.json";
    if (fs::exists(marker)) {
        std::ifstream in(marker);
        json r;
        in >> r;
        MetricsRecord m;
        m.iteration = r.at("iteration").get<i64>();
        if (!r.at("w2_1nfe").is_null()) m.w2_1nfe = r.at("w2_1nfe").get<double>();
        if (!r.at("w2_2nfe").is_null()) m.w2_2nfe = r.at("w2_2nfe").get<double>();
        if (!r.at("w2_euler32").is_null()) m.w2_euler32 = r.at("w2_euler32").get<double>();
        return m;
    }
    TrainResult run = train_run(cfg, cell_dir);
    const MetricsRecord& m = run.final_eval();
    json r = {{"iteration", m.iteration},
              {"w2_1nfe", m.w2_1nfe ? json(*m.w2_1nfe) : json(nullptr)},
              {"w2_2nfe", m.w2_2nfe ? json(*m.w2_2nfe) : json(nullptr)},
              {"w2_euler32", m.w2_euler32 ? json(*m.w2_euler32) : json(nullptr)}};
    std::ofstream(marker) << r.dump(2);
    return m;
}

// study cell: a config to run plus the row slot it fills
struct Cell {
    StudyRow row;
    ExperimentConfig cfg;
    std::string dir;
};

void run_cells(std::vector<Cell>& cells, int parallel, std::vector<StudyRow>& rows) {
    parallel_cells(cells.size(), parallel, [&](size_t i) {
        Cell& c = cells[i];
        try {
            c.row.metrics = run_cell(c.cfg, c.dir);
            c.row.ok = true;
        } catch (const Error& e) {
            c.row.error = e.what();
        }
    });
    for (Cell& c : cells) rows.push_back(std::move(c.row));
}

void write_rows_csv(const std::string& path, const std::vector<StudyRow>& rows) {
    std::ofstream csv(path, std::ios::trunc);
    if (!csv) throw IoError("cannot open '" + path + "'");
    csv << "variant,value,seed,status,w2_1nfe,w2_2nfe,w2_euler32";
    for (size_t k = 0; k < tas_intervals().size(); ++k)
        csv << ",tas_" << tas_intervals()[k].lo << "_" << tas_intervals()[k].hi;
    csv << "\n";
    csv.precision(12);
    for (const StudyRow& r : rows) {
        csv << r.variant << "," << r.value << "," << r.seed << "," << (r.ok ? "ok" : "error");
        csv << ",";
        if (r.metrics.w2_1nfe) csv << *r.metrics.w2_1nfe;
        csv << ",";
        if (r.metrics.w2_2nfe) csv << *r.metrics.w2_2nfe;
        csv << ",";
        if (r.metrics.w2_euler32) csv << *r.metrics.w2_euler32;
        for (size_t k = 0; k < tas_intervals().size(); ++k) {
            csv << ",";
            if (k < r.tas.size() && r.tas[k]) csv << *r.tas[k];
        }
        csv << "\n";
    }
}

void write_verdicts(const std::string& path, const std::vector<StudyVerdict>& verdicts) {
    std::ofstream out(path, std::ios::trunc);
    for (const StudyVerdict& v : verdicts)
        out << (v.pass ? "PASS " : "FAIL ") << v.hypothesis << ": " << v.detail << "\n";
}

std::vector<double> collect_metric(const std::vector<StudyRow>& rows, const std::string& variant,
                                   const std::string& value,
                                   const std::optional<double> MetricsRecord::*field) {
    std::vector<double> vals;
    for (const StudyRow& r : rows)
        if (r.ok && r.variant == variant && r.value == value && (r.metrics.*field))
            vals.push_back(*(r.metrics.*field));
    return vals;
}

std::vector<double> collect_1nfe(const std::vector<StudyRow>& rows, const std::string& variant,
                                 const std::string& value) {
    return collect_metric(rows, variant, value, &MetricsRecord::w2_1nfe);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

StudyOutcome obs1_study(const StudyProfile& profile, const std::string& out_dir) {
    StudyOutcome out;
    out.name = "obs1";
    const ExperimentConfig base = study_base_config(profile);
    const i64 T = profile.total_iters;

    std::vector<Cell> cells;
    // fixed-budget allocation between v-pretraining and u-finetuning
    for (int pct : {0, 10, 20}) {
        for (uint64_t seed : profile.seeds) {
            Cell c;
            c.row.variant = "allocation";
            c.row.value = std::to_string(pct);
            c.row.seed = seed;
            c.cfg = base;
            c.cfg.seed = seed;
            const i64 pre = T * pct / 100;
            c.cfg.train.stages = {stage("v-pretrain", pre, 1.0),
                                  stage("u-finetune", T - pre, 0.0)};
            c.dir = out_dir + "/alloc" + c.row.value + "_seed" + std::to_string(seed);
            cells.push_back(std::move(c));
        }
    }
    // target-noise corruption of the v-loss
    for (const char* k : {"0", "0.03", "0.1"}) {
        for (uint64_t seed : profile.seeds) {
            Cell c;
            c.row.variant = "corruption";
            c.row.value = k;
            c.row.seed = seed;
            c.cfg = base;
            c.cfg.seed = seed;
            StageConfig joint = stage("joint", T, 0.5);
            joint.k_noise = std::stod(k);
            c.cfg.train.stages = {joint};
            c.dir = out_dir + "/corrupt" + std::string(k) + "_seed" + std::to_string(seed);
            cells.push_back(std::move(c));
        }
    }
    run_cells(cells, profile.parallel, out.rows);

    const double alloc0 = median(collect_1nfe(out.rows, "allocation", "0"));
    const double alloc20 = median(collect_1nfe(out.rows, "allocation", "20"));
    out.verdicts.push_back({"v-pretraining improves u-learning (20% vs 0% allocation)",
                            alloc20 < alloc0,
                            "median 1-NFE W2 " + fmt(alloc20) + " vs " + fmt(alloc0)});

    const double k0 = median(collect_1nfe(out.rows, "corruption", "0"));
    const double k1 = median(collect_1nfe(out.rows, "corruption", "0.1"));
    out.verdicts.push_back({"corrupted v-targets degrade u-learning (k=0.1 vs k=0)", k1 > k0,
                            "median 1-NFE W2 " + fmt(k1) + " vs " + fmt(k0)});

    int monotone_seeds = 0;
    for (uint64_t seed : profile.seeds) {
        std::vector<double> per_seed;
        for (const char* k : {"0", "0.03", "0.1"})
            for (const StudyRow& r : out.rows)
                if (r.ok && r.variant == "corruption" && r.value == k && r.seed == seed &&
                    r.metrics.w2_1nfe)
                    per_seed.push_back(*r.metrics.w2_1nfe);
        if (per_seed.size() == 3 && per_seed[0] <= per_seed[1] && per_seed[1] <= per_seed[2])
            ++monotone_seeds;
    }
    out.verdicts.push_back({"corruption trend monotone over {0, 0.03, 0.1} in >= 2 of 3 seeds",
                            monotone_seeds >= 2,
                            std::to_string(monotone_seeds) + " of " +
                                std::to_string(profile.seeds.size()) + " seeds monotone"});
    return out;
}

std::string range_label(const DtRange& r) {
    std::ostringstream os;
    os << "[" << r.lo << "," << r.hi << "]";
    return os.str();
}

StudyOutcome obs2_study(const StudyProfile& profile, const std::string& out_dir) {
    StudyOutcome out;
    out.name = "obs2";
    const ExperimentConfig base = study_base_config(profile);

    // one v-pretrained model per seed, shared across ranges
    std::vector<Cell> pre_cells;
    for (uint64_t seed : profile.seeds) {
        Cell c;
        c.row.variant = "v-pretrained-only";
        c.row.value = "-";
        c.row.seed = seed;
        c.cfg = base;
        c.cfg.seed = seed;
        c.cfg.train.total_iters = profile.pretrain_iters;
        c.cfg.train.stages = {stage("v-pretrain", profile.pretrain_iters, 1.0)};
        c.dir = out_dir + "/vpre_seed" + std::to_string(seed);
        pre_cells.push_back(std::move(c));
    }
    run_cells(pre_cells, profile.parallel, out.rows);

    std::vector<Cell> cells;
    for (uint64_t seed : profile.seeds) {
        const std::string pre_ck =
            out_dir + "/vpre_seed" + std::to_string(seed) + "/checkpoint.json";
        for (const DtRange& range : tas_intervals()) {
            for (const std::string init : {"random-init", "v-pretrained"}) {
                Cell c;
                c.row.variant = init;
                c.row.value = range_label(range);
                c.row.seed = seed;
                c.cfg = base;
                c.cfg.seed = seed;
                c.cfg.train.total_iters = profile.finetune_iters;
                StageConfig u = stage("u-finetune", profile.finetune_iters, 0.0);
                u.dt_range = range;
                c.cfg.train.stages = {u};
                if (init == "v-pretrained") c.cfg.init_from = pre_ck;
                c.dir = out_dir + "/" + init + "_" +
                        std::to_string(static_cast<int>(range.lo * 10)) + "_seed" +
                        std::to_string(seed);
                cells.push_back(std::move(c));
            }
        }
    }
    run_cells(cells, profile.parallel, out.rows);

    auto euler = [&](const std::string& variant, const std::string& value) {
        return collect_metric(out.rows, variant, value, &MetricsRecord::w2_euler32);
    };
    const double small_gap = median(euler("random-init", range_label(tas_intervals().front())));
    const double large_gap = median(euler("random-init", range_label(tas_intervals().back())));
    out.verdicts.push_back(
        {"small-gap u-supervision forms v better than large-gap (random init, 32-NFE euler-v)",
         small_gap < large_gap, "median W2 " + fmt(small_gap) + " vs " + fmt(large_gap)});

    const double pre_small = median(euler("v-pretrained", range_label(tas_intervals().front())));
    const double pre_large = median(euler("v-pretrained", range_label(tas_intervals().back())));
    out.verdicts.push_back({"large-gap u-supervision degrades a pretrained v more than small-gap",
                            pre_small < pre_large,
                            "median W2 " + fmt(pre_small) + " vs " + fmt(pre_large)});
    return out;
}

StudyOutcome obs3_study(const StudyProfile& profile, const std::string& out_dir) {
    StudyOutcome out;
    out.name = "obs3";
    const ExperimentConfig base = study_base_config(profile);

    struct TasCell {
        StudyRow row;
        ExperimentConfig cfg;
        std::string dir;
    };
    std::vector<TasCell> cells;
    for (uint64_t seed : profile.seeds) {
        for (const std::string variant : {"random-init", "v-pretrained", "smallgap-pretrained"}) {
            TasCell c;
            c.row.variant = variant;
            c.row.value = "-";
            c.row.seed = seed;
            c.cfg = base;
            c.cfg.seed = seed;
            if (variant == "random-init") {
                c.cfg.train.total_iters = 0;
                c.cfg.train.stages = {};
            } else if (variant == "v-pretrained") {
                c.cfg.train.total_iters = profile.pretrain_iters;
                c.cfg.train.stages = {stage("v-pretrain", profile.pretrain_iters, 1.0)};
            } else {
                c.cfg.train.total_iters = profile.pretrain_iters;
                StageConfig u = stage("smallgap-pretrain", profile.pretrain_iters, 0.0);
                u.dt_range = tas_intervals().front();
                c.cfg.train.stages = {u};
            }
            c.dir = out_dir + "/" + variant + "_seed" + std::to_string(seed);
            cells.push_back(std::move(c));
        }
    }

    parallel_cells(cells.size(), profile.parallel, [&](size_t i) {
        TasCell& c = cells[i];
        const std::string marker = c.dir + "/tas.json";
        try {
            if (fs::exists(marker)) {
                std::ifstream in(marker);
                json r;
                in >> r;
                for (const json& v : r.at("tas"))
                    c.row.tas.push_back(v.is_null() ? std::optional<double>{}
                                                    : std::optional<double>{v.get<double>()});
            } else {
                TrainResult run = train_run(c.cfg, c.dir);
                VelocityNet net = run.checkpoint.to_net();
                auto task = make_task(c.cfg.task);
                TASOptions topts;
                topts.points = 5000;
                topts.gradient_batches = 10;
                Rng tas_rng(c.row.seed ^ 0x7a5a5au);
                TASReport rep = task_affinity(net, *task, topts, tas_rng);
                c.row.tas = rep.cosine;
                json arr = json::array();
                for (const auto& cos : rep.cosine) arr.push_back(cos ? json(*cos) : json(nullptr));
                std::ofstream(marker) << json{{"tas", arr}}.dump(2);
            }
            c.row.ok = true;
        } catch (const Error& e) {
            c.row.error = e.what();
        }
    });
    for (TasCell& c : cells) out.rows.push_back(std::move(c.row));

    const size_t large = tas_intervals().size() - 1;
    auto tas_of = [&](const std::string& variant) {
        std::vector<double> vals;
        for (const StudyRow& r : out.rows)
            if (r.ok && r.variant == variant && large < r.tas.size() && r.tas[large])
                vals.push_back(*r.tas[large]);
        return vals;
    };
    const double tas_small = median(tas_of("smallgap-pretrained"));
    const double tas_random = median(tas_of("random-init"));
    out.verdicts.push_back(
        {"small-gap pretraining raises large-gap task affinity over random init",
         tas_small > tas_random, "median TAS " + fmt(tas_small) + " vs " + fmt(tas_random)});

    const double tas_v = median(tas_of("v-pretrained"));
    out.verdicts.push_back({"v-pretraining raises large-gap task affinity over random init",
                            tas_v > tas_random,
                            "median TAS " + fmt(tas_v) + " vs " + fmt(tas_random)});
    return out;
}

StudyOutcome ablation_study(const StudyProfile& profile, const std::string& out_dir) {
    StudyOutcome out;
    out.name = "ablation";
    const ExperimentConfig base = study_base_config(profile);
    const i64 T = profile.total_iters;

    struct Variant {
        const char* name;
        bool snr, adaptive, beta;
    };
    const Variant variants[] = {
        {"vanilla", false, false, false},   {"minsnr", true, false, false},
        {"dtd", false, true, false},        {"beta", false, false, true},
        {"minsnr+beta", true, false, true}, {"dtd+beta", false, true, true},
    };
    std::vector<Cell> cells;
    for (const Variant& v : variants) {
        for (uint64_t seed : profile.seeds) {
            Cell c;
            c.row.variant = v.name;
            c.row.value = "-";
            c.row.seed = seed;
            c.cfg = base;
            c.cfg.seed = seed;
            StageConfig joint = stage("joint", T, 0.5);
            joint.alpha = v.snr ? AlphaKind::ClampedSnr : AlphaKind::Unit;
            joint.sampler = v.adaptive ? SamplerKind::Adaptive : SamplerKind::Base;
            joint.progressive = v.beta;
            c.cfg.train.stages = {joint};
            std::string cell_name = std::string(v.name) + "_seed" + std::to_string(seed);
            for (auto& ch : cell_name)
                if (ch == '+') ch = '_';
            c.dir = out_dir + "/" + cell_name;
            cells.push_back(std::move(c));
        }
    }
    run_cells(cells, profile.parallel, out.rows);

    const double vanilla = median(collect_1nfe(out.rows, "vanilla", "-"));
    const double full = median(collect_1nfe(out.rows, "dtd+beta", "-"));
    out.verdicts.push_back({"full method (sampler + beta) does not trail vanilla", full <= vanilla,
                            "median 1-NFE W2 " + fmt(full) + " vs " + fmt(vanilla)});
    return out;
}

StudyOutcome ksweep_study(const StudyProfile& profile, const std::string& out_dir) {
    StudyOutcome out;
    out.name = "ksweep";
    ExperimentConfig base = study_base_config(profile);

    SweepResult sweep = run_stage_sweep(base, SweepAxis::KSched, {"0.5", "1", "2", "3"},
                                        profile.seeds, out_dir, profile.parallel);
    for (const SweepCell& c : sweep.cells) {
        StudyRow row;
        row.variant = "k";
        row.value = c.value;
        row.seed = c.seed;
        row.ok = c.ok;
        row.error = c.error;
        row.metrics = c.final_row;
        out.rows.push_back(std::move(row));
    }

    std::vector<std::pair<double, std::string>> ranked;
    for (const char* k : {"0.5", "1", "2", "3"})
        ranked.push_back({median(collect_1nfe(out.rows, "k", k)), k});
    std::sort(ranked.begin(), ranked.end());
    const bool top2 = ranked[0].second == "1" || ranked[1].second == "1";
    std::string order;
    for (const auto& [w2, k] : ranked) order += k + "(" + fmt(w2) + ") ";
    out.verdicts.push_back({"linear schedule k=1 lands in the top-2", top2, "order: " + order});
    return out;
}

}  // namespace

SpeedBenchmark run_speed_benchmark(const StudyProfile& profile, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const i64 T = profile.total_iters;
    SpeedBenchmark bench;

    struct SpeedCell {
        std::string name;
        uint64_t seed;
        bool accelerated;
        std::vector<std::pair<i64, double>> traj;
        std::string error;
    };
    std::vector<SpeedCell> cells;
    for (uint64_t seed : profile.seeds) {
        cells.push_back({"vanilla", seed, false, {}, ""});
        cells.push_back({"full", seed, true, {}, ""});
    }

    parallel_cells(cells.size(), profile.parallel, [&](size_t i) {
        SpeedCell& c = cells[i];
        try {
            ExperimentConfig cfg = study_base_config(profile);
            cfg.seed = c.seed;
            cfg.train.eval_every = std::max<i64>(1, T / profile.trajectory_evals);
            StageConfig joint = stage("joint", T, 0.5);
            joint.progressive = c.accelerated;
            joint.sampler = c.accelerated ? SamplerKind::Adaptive : SamplerKind::Base;
            cfg.train.stages = {joint};
            const std::string cell = out_dir + "/" + c.name + "_seed" + std::to_string(c.seed);
            const fs::path metrics = fs::path(cell) / "metrics.csv";
            const fs::path done = fs::path(cell) / "checkpoint.json";
            if (!fs::exists(done)) train_run(cfg, cell);
            // trajectory from the metrics csv (works for reused cells too)
            std::ifstream in(metrics);
            std::string line;
            std::getline(in, line);  // header
            while (std::getline(in, line)) {
                std::istringstream ls(line);
                std::string field;
                std::vector<std::string> fields;
                while (std::getline(ls, field, ',')) fields.push_back(field);
                while (fields.size() < 11) fields.push_back("");
                if (!fields[8].empty())
                    c.traj.push_back({std::stoll(fields[0]), std::stod(fields[8])});
            }
            if (c.traj.empty()) throw IoError("speed benchmark: no evaluation trajectory");
        } catch (const Error& e) {
            c.error = e.what();
        }
    });

    std::vector<double> finals_vanilla, finals_full;
    for (uint64_t seed : profile.seeds) {
        const SpeedCell* vanilla = nullptr;
        const SpeedCell* full = nullptr;
        for (const SpeedCell& c : cells)
            if (c.seed == seed) (c.accelerated ? full : vanilla) = &c;
        if (!vanilla->error.empty()) throw NumericError(vanilla->error);
        if (!full->error.empty()) throw NumericError(full->error);

        const double vanilla_final = vanilla->traj.back().second;
        const double full_final = full->traj.back().second;
        finals_vanilla.push_back(vanilla_final);
        finals_full.push_back(full_final);

        double reach = 2.0;
        for (const auto& [iter, w2] : full->traj) {
            if (w2 <= vanilla_final) {
                reach = static_cast<double>(iter) / static_cast<double>(T);
                break;
            }
        }
        bench.reach_fractions.push_back(reach);

        for (const SpeedCell* c : {vanilla, full}) {
            StudyRow row;
            row.variant = c->name;
            row.value = "-";
            row.seed = seed;
            row.ok = true;
            row.metrics.iteration = T;
            row.metrics.w2_1nfe = c->traj.back().second;
            bench.rows.push_back(std::move(row));
        }
    }

    bench.median_reach_fraction = median(bench.reach_fractions);
    bench.median_final_vanilla = median(finals_vanilla);
    bench.median_final_full = median(finals_full);
    return bench;
}

StudyOutcome run_study(const std::string& study, const StudyProfile& profile,
                       const std::string& out_dir) {
    fs::create_directories(out_dir);
    StudyOutcome out;
    if (study == "obs1")
        out = obs1_study(profile, out_dir);
    else if (study == "obs2")
        out = obs2_study(profile, out_dir);
    else if (study == "obs3")
        out = obs3_study(profile, out_dir);
    else if (study == "ablation")
        out = ablation_study(profile, out_dir);
    else if (study == "ksweep")
        out = ksweep_study(profile, out_dir);
    else {
        std::string valid;
        for (const auto& n : study_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw ConfigError("unknown study '" + study + "' (valid: " + valid + ")");
    }
    out.csv_path = out_dir + "/" + out.name + ".csv";
    write_rows_csv(out.csv_path, out.rows);
    write_verdicts(out_dir + "/verdicts.txt", out.verdicts);
    return out;
}

}  // namespace meanflow
