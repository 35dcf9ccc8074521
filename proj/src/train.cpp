#include "train.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace meanflow {

namespace fs = std::filesystem;
using nlohmann::json;

const MetricsRecord& TrainResult::final_eval() const {
    for (auto it = metrics.rbegin(); it != metrics.rend(); ++it)
        if (it->w2_1nfe) return *it;
    throw ConfigError("train result carries no evaluated metrics row");
}

namespace {

void apply_stage(ScheduleState& sched, const StageConfig& stage) {
    ScheduleConfig& c = sched.mutable_config();
    c.fm_ratio = stage.fm_ratio;
    c.dt_range = stage.dt_range;
    c.sampler_kind = stage.sampler;
    c.alpha_kind = stage.alpha;
    c.progressive = stage.progressive;
}

// lambda is estimated under the sampling of the first progressive stage (the
// one beta actually weights); base schedule otherwise
double estimate_run_lambda(const ExperimentConfig& cfg) {
    ScheduleState probe{cfg.schedule};
    for (const StageConfig& s : cfg.train.stages) {
        if (s.progressive) {
            apply_stage(probe, s);
            break;
        }
    }
    probe.estimate_lambda(Rng(cfg.seed ^ 0x5bd1e995u));
    return probe.lambda();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out.good()) throw IoError("write to '" + path + "' failed");
}

void audit_run_dir(const std::string& dir) {
    for (const char* f : {"manifest.json", "config.resolved.json", "metrics.csv", "checkpoint.json"})
        if (!fs::exists(fs::path(dir) / f))
            throw IoError("run self-audit: missing artifact '" + std::string(f) + "' in " + dir);
}

}  // namespace

TrainResult train_run(ExperimentConfig cfg, const std::string& run_dir_override,
                      const Checkpoint* resume, i64 stop_after) {
    cfg.finalize_and_validate();
    const std::string run_dir =
        run_dir_override.empty() ? resolve_out_dir(cfg) : run_dir_override;
    fs::create_directories(run_dir);

    const uint64_t digest = config_digest(cfg);
    const i64 total = cfg.train.total_iters;

    Rng init_rng(cfg.seed ^ 0x9e3779b9ull);
    Rng train_rng(cfg.seed);

    NetConfig net_cfg = cfg.net;
    auto task = make_task(cfg.task);
    net_cfg.data_dim = task->dim();
    VelocityNet net(net_cfg, init_rng);
    Adam adam(net.params(),
              {cfg.train.lr, cfg.train.adam_beta1, cfg.train.adam_beta2, cfg.train.adam_eps,
               cfg.train.clip_norm});
    ScheduleState sched{cfg.schedule};
    i64 start_iter = 0;

    if (resume != nullptr) {
        if (resume->config_digest != digest)
            throw ConfigError("resume checkpoint was produced by a different config (digest " +
                              std::to_string(resume->config_digest) + " vs " +
                              std::to_string(digest) + ")");
        net = resume->to_net();
        adam = Adam(net.params(), adam.config());
        adam.restore(resume->adam_m, resume->adam_v, resume->adam_steps);
        train_rng.load_state(resume->rng_state);
        sched.set_lambda(resume->lambda);
        sched.set_sampler_ema(resume->sampler_ema);
        start_iter = resume->iteration;
    } else {
        if (!cfg.init_from.empty()) {
            Checkpoint init = Checkpoint::load(cfg.init_from);
            VelocityNet loaded = init.to_net();
            if (!(loaded.config() == net.config()))
                throw ConfigError("init_from checkpoint architecture does not match config");
            net.params() = loaded.params();
        }
        sched.set_lambda(estimate_run_lambda(cfg));
    }

    // manifest precedes step 0 and is immutable afterwards
    const std::string manifest_path = run_dir + "/manifest.json";
    if (!fs::exists(manifest_path)) {
        json manifest = {{"format_version", 1},
                         {"code_version", kCodeVersion},
                         {"config_digest", digest},
                         {"lambda", sched.lambda()},
                         {"config", json::parse(config_to_json(cfg))}};
        write_file(manifest_path, manifest.dump(2));
    }
    write_file(run_dir + "/config.resolved.json", config_to_json(cfg));

    const std::string metrics_path = run_dir + "/metrics.csv";
    const bool fresh_csv = resume == nullptr || !fs::exists(metrics_path);
    std::ofstream csv(metrics_path, fresh_csv ? std::ios::trunc : std::ios::app);
    if (!csv) throw IoError("cannot open '" + metrics_path + "'");
    if (fresh_csv) csv << MetricsRecord::csv_header() << "\n";

    TrainResult result;
    result.run_dir = run_dir;

    const std::vector<StageConfig> stages = cfg.resolved_stages();
    std::vector<i64> stage_end;
    i64 acc = 0;
    for (const StageConfig& s : stages) stage_end.push_back(acc += s.iters);

    LossOptions loss_opts;
    loss_opts.adp_c = cfg.train.adp_c;
    loss_opts.adp_p = cfg.train.adp_p;

    size_t stage_idx = stages.size();  // forces apply_stage on the first iteration
    const i64 end_iter = stop_after > 0 ? std::min(stop_after, total) : total;

    for (i64 i = start_iter; i < end_iter; ++i) {
        size_t si = 0;
        while (si < stage_end.size() && i >= stage_end[si]) ++si;
        if (si >= stages.size()) break;  // zero-length tail
        if (si != stage_idx) {
            stage_idx = si;
            apply_stage(sched, stages[si]);
            loss_opts.k_noise = stages[si].k_noise;
        }
        sched.set_progress(i, total);

        TrainingBatch batch = make_batch(*task, train_rng, cfg.train.batch, sched);
        Tape tape(net.params().size());
        LossGraph lg = meanflow_loss(tape, net, batch, sched, loss_opts, train_rng);
        if (!std::isfinite(lg.breakdown.total))
            throw NumericError("training loss is non-finite at iteration " + std::to_string(i) +
                               " (stage '" + stages[si].name + "')");
        std::vector<Tensor> grads = net.densify_grads(tape.grad(lg.loss));
        adam.step(net.params(), grads);

        TimeSample times{batch.t, batch.r, batch.is_fm};
        sched.update_sampler(times, lg.breakdown.raw_err);

        const i64 done = i + 1;
        const bool log_now = (cfg.train.log_every > 0 && done % cfg.train.log_every == 0) ||
                             done == end_iter;
        const bool eval_now = (cfg.train.eval_every > 0 && done % cfg.train.eval_every == 0) ||
                              done == total;
        if (log_now || eval_now) {
            MetricsRecord row;
            row.iteration = done;
            row.stage = stages[si].name;
            row.loss_total = lg.breakdown.total;
            row.loss_u = lg.breakdown.u_part;
            row.loss_v = lg.breakdown.v_part;
            row.mean_beta = lg.breakdown.mean_beta;
            row.mean_alpha = lg.breakdown.mean_alpha;
            row.s = sched.s();
            if (eval_now) {
                EvalOptions ev;
                ev.samples = cfg.train.eval_samples;
                ev.seed = cfg.train.eval_seed;
                eval_suite(net, *task, ev, row);
            }
            csv << row.csv_row() << "\n";
            csv.flush();
            result.metrics.push_back(std::move(row));
        }
    }

    Checkpoint ck;
    ck.config_digest = digest;
    ck.net_config = net.config();
    ck.params = net.params();
    ck.adam_m = adam.moments_m();
    ck.adam_v = adam.moments_v();
    ck.adam_steps = adam.steps_taken();
    ck.iteration = end_iter > start_iter ? end_iter : start_iter;
    ck.rng_state = train_rng.save_state();
    ck.lambda = sched.lambda();
    ck.sampler_ema = sched.sampler_ema();
    ck.save(run_dir + "/checkpoint.json");
    result.checkpoint = std::move(ck);

    audit_run_dir(run_dir);
    return result;
}

SweepAxis sweep_axis_from_string(const std::string& name) {
    if (name == "pretrain_epochs") return SweepAxis::PretrainEpochs;
    if (name == "k_noise") return SweepAxis::KNoise;
    if (name == "dt_range") return SweepAxis::DtRange;
    if (name == "k_sched") return SweepAxis::KSched;
    throw ConfigError("unknown sweep axis '" + name +
                      "' (valid: pretrain_epochs, k_noise, dt_range, k_sched)");
}

ExperimentConfig sweep_cell_config(const ExperimentConfig& base, SweepAxis axis,
                                   const std::string& value, uint64_t seed) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    cfg.train.stages.clear();
    const i64 total = cfg.train.total_iters;
    switch (axis) {
        case SweepAxis::PretrainEpochs: {
            const i64 epochs = static_cast<i64>(std::stoll(value));
            const i64 pre = epochs * kEpochIters;
            if (pre > total)
                throw ConfigError("pretrain budget " + std::to_string(pre) +
                                  " exceeds total_iters " + std::to_string(total));
            StageConfig vpre;
            vpre.name = "v-pretrain";
            vpre.iters = pre;
            vpre.fm_ratio = 1.0;
            StageConfig ufin;
            ufin.name = "u-finetune";
            ufin.iters = total - pre;
            ufin.fm_ratio = 0.0;
            cfg.train.stages = {vpre, ufin};
            break;
        }
        case SweepAxis::KNoise: {
            StageConfig joint;
            joint.name = "joint";
            joint.iters = total;
            joint.fm_ratio = base.schedule.fm_ratio;
            joint.k_noise = std::stod(value);
            cfg.train.stages = {joint};
            break;
        }
        case SweepAxis::DtRange: {
            json arr;
            try {
                arr = json::parse(value);
            } catch (const json::exception&) {
                throw ConfigError("dt_range sweep value '" + value + "' is not [lo,hi]");
            }
            if (!arr.is_array() || arr.size() != 2)
                throw ConfigError("dt_range sweep value '" + value + "' is not [lo,hi]");
            StageConfig uonly;
            uonly.name = "u-only";
            uonly.iters = total;
            uonly.fm_ratio = 0.0;
            uonly.dt_range = DtRange{arr[0].get<double>(), arr[1].get<double>()};
            cfg.train.stages = {uonly};
            break;
        }
        case SweepAxis::KSched: {
            cfg.schedule.k_sched = std::stod(value);
            StageConfig joint;
            joint.name = "joint";
            joint.iters = total;
            joint.fm_ratio = base.schedule.fm_ratio;
            joint.progressive = true;
            joint.sampler = SamplerKind::Adaptive;
            cfg.train.stages = {joint};
            break;
        }
    }
    return cfg;
}

namespace {

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s)
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-')
            out += c;
        else
            out += '_';
    return out;
}

}  // namespace

void parallel_cells(size_t n, int parallel, const std::function<void(size_t)>& fn) {
    if (parallel <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    };
    std::vector<std::thread> pool;
    const int workers = std::min<int>(parallel, static_cast<int>(n));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
}

SweepResult run_stage_sweep(const ExperimentConfig& base, SweepAxis axis,
                            const std::vector<std::string>& values,
                            const std::vector<uint64_t>& seeds, const std::string& out_dir,
                            int parallel) {
    if (values.empty()) throw ConfigError("sweep: empty value list");
    if (seeds.empty()) throw ConfigError("sweep: empty seed list");
    fs::create_directories(out_dir);

    SweepResult result;
    for (const std::string& value : values)
        for (uint64_t seed : seeds) {
            SweepCell cell;
            cell.value = value;
            cell.seed = seed;
            result.cells.push_back(std::move(cell));
        }

    parallel_cells(result.cells.size(), parallel, [&](size_t idx) {
        SweepCell& cell = result.cells[idx];
        const std::string cell_dir =
            out_dir + "/cells/" + sanitize(cell.value) + "_seed" + std::to_string(cell.seed);
        const std::string result_path = cell_dir + "/result.json";
        try {
            if (fs::exists(result_path)) {
                // completed earlier; reuse
                std::ifstream in(result_path);
                json r;
                in >> r;
                cell.ok = r.at("ok").get<bool>();
                cell.final_row.iteration = r.at("iteration").get<i64>();
                if (r.contains("w2_1nfe") && !r.at("w2_1nfe").is_null())
                    cell.final_row.w2_1nfe = r.at("w2_1nfe").get<double>();
                if (r.contains("w2_2nfe") && !r.at("w2_2nfe").is_null())
                    cell.final_row.w2_2nfe = r.at("w2_2nfe").get<double>();
                if (r.contains("w2_euler32") && !r.at("w2_euler32").is_null())
                    cell.final_row.w2_euler32 = r.at("w2_euler32").get<double>();
                cell.final_row.loss_total = r.value("loss_total", 0.0);
            } else {
                ExperimentConfig cfg = sweep_cell_config(base, axis, cell.value, cell.seed);
                TrainResult run = train_run(cfg, cell_dir);
                cell.final_row = run.final_eval();
                cell.ok = true;
                json r = {{"ok", true},
                          {"iteration", cell.final_row.iteration},
                          {"loss_total", cell.final_row.loss_total},
                          {"w2_1nfe", cell.final_row.w2_1nfe ? json(*cell.final_row.w2_1nfe)
                                                             : json(nullptr)},
                          {"w2_2nfe", cell.final_row.w2_2nfe ? json(*cell.final_row.w2_2nfe)
                                                             : json(nullptr)},
                          {"w2_euler32", cell.final_row.w2_euler32
                                             ? json(*cell.final_row.w2_euler32)
                                             : json(nullptr)}};
                write_file(result_path, r.dump(2));
            }
        } catch (const Error& e) {
            cell.ok = false;
            cell.error = e.what();
        }
    });

    result.csv_path = out_dir + "/sweep.csv";
    std::ofstream csv(result.csv_path, std::ios::trunc);
    csv << "value,seed,status,w2_1nfe,w2_2nfe,w2_euler32,loss_total\n";
    for (const SweepCell& c : result.cells) {
        csv << c.value << "," << c.seed << "," << (c.ok ? "ok" : "error") << ",";
        csv.precision(12);
        if (c.final_row.w2_1nfe) csv << *c.final_row.w2_1nfe;
        csv << ",";
        if (c.final_row.w2_2nfe) csv << *c.final_row.w2_2nfe;
        csv << ",";
        if (c.final_row.w2_euler32) csv << *c.final_row.w2_euler32;
        csv << "," << c.final_row.loss_total << "\n";
    }
    return result;
}

}  // namespace meanflow
