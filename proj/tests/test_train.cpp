#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "train.hpp"

using namespace meanflow;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "meanflow_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.experiment = "tiny";
    cfg.task = "gauss8";
    cfg.seed = 7;
    cfg.net.widths = {16, 16};
    cfg.net.time_embed_dim = 8;
    cfg.train.total_iters = 40;
    cfg.train.batch = 16;
    cfg.train.log_every = 10;
    cfg.train.eval_every = 0;
    cfg.train.eval_samples = 32;
    cfg.schedule.lambda_draws = 20000;
    return cfg;
}

std::string rows_as_text(const TrainResult& r, i64 after_iter = 0) {
    std::string out;
    for (const MetricsRecord& m : r.metrics)
        if (m.iteration > after_iter) out += m.csv_row() + "\n";
    return out;
}

}  // namespace

TEST_CASE("same seed gives identical loss logs") {
    TrainResult a = train_run(tiny_config(), fresh_dir("det_a"));
    TrainResult b = train_run(tiny_config(), fresh_dir("det_b"));
    REQUIRE(!a.metrics.empty());
    CHECK(rows_as_text(a) == rows_as_text(b));
}

TEST_CASE("zero-iteration run returns the initial checkpoint and no metric rows") {
    ExperimentConfig cfg = tiny_config();
    cfg.train.total_iters = 0;
    TrainResult r = train_run(cfg, fresh_dir("zero"));
    CHECK(r.metrics.empty());
    CHECK(r.checkpoint.iteration == 0);
    CHECK(fs::exists(fs::path(r.run_dir) / "checkpoint.json"));
}

TEST_CASE("interrupted run resumes loss-identically") {
    ExperimentConfig cfg = tiny_config();
    const std::string full_dir = fresh_dir("resume_full");
    const std::string part_dir = fresh_dir("resume_part");

    TrainResult full = train_run(cfg, full_dir);
    TrainResult part = train_run(cfg, part_dir, nullptr, 20);
    CHECK(part.checkpoint.iteration == 20);
    Checkpoint mid = Checkpoint::load(part_dir + "/checkpoint.json");
    TrainResult rest = train_run(cfg, part_dir, &mid);

    CHECK(rows_as_text(rest) == rows_as_text(full, 20));
    REQUIRE(rest.checkpoint.params.size() == full.checkpoint.params.size());
    for (size_t p = 0; p < rest.checkpoint.params.size(); ++p)
        for (size_t i = 0; i < rest.checkpoint.params[p].size(); ++i)
            CHECK(rest.checkpoint.params[p][i] == full.checkpoint.params[p][i]);
}

TEST_CASE("resume rejects a checkpoint from a different config") {
    ExperimentConfig cfg = tiny_config();
    const std::string dir = fresh_dir("resume_mismatch");
    TrainResult r = train_run(cfg, dir, nullptr, 10);
    Checkpoint mid = Checkpoint::load(dir + "/checkpoint.json");
    ExperimentConfig other = cfg;
    other.train.lr = 1e-3;
    CHECK_THROWS_AS(train_run(other, dir, &mid), ConfigError);
}

TEST_CASE("vanilla configuration logs per-term weights of exactly 1") {
    ExperimentConfig cfg = tiny_config();  // progressive off, alpha unit, base sampler
    TrainResult r = train_run(cfg, fresh_dir("vanilla"));
    REQUIRE(!r.metrics.empty());
    for (const MetricsRecord& m : r.metrics) {
        CHECK(m.mean_beta == 1.0);
        CHECK(m.mean_alpha == 1.0);
    }
}

TEST_CASE("checkpoint save/load round-trips parameters bit-exactly") {
    ExperimentConfig cfg = tiny_config();
    TrainResult r = train_run(cfg, fresh_dir("roundtrip"));
    Checkpoint loaded = Checkpoint::load(r.run_dir + "/checkpoint.json");
    REQUIRE(loaded.params.size() == r.checkpoint.params.size());
    for (size_t p = 0; p < loaded.params.size(); ++p)
        for (size_t i = 0; i < loaded.params[p].size(); ++i)
            CHECK(loaded.params[p][i] == r.checkpoint.params[p][i]);
    CHECK(loaded.rng_state == r.checkpoint.rng_state);
    CHECK(loaded.lambda == r.checkpoint.lambda);

    VelocityNet net = loaded.to_net();
    CHECK(net.param_count() > 0);
}

TEST_CASE("corrupt checkpoint file raises an io error with context") {
    const std::string dir = fresh_dir("corrupt");
    std::ofstream(dir + "/bad.json") << "{ not json";
    CHECK_THROWS_AS(Checkpoint::load(dir + "/bad.json"), IoError);
    CHECK_THROWS_AS(Checkpoint::load(dir + "/absent.json"), IoError);
}

TEST_CASE("run directory passes the artifact self-audit") {
    TrainResult r = train_run(tiny_config(), fresh_dir("audit"));
    for (const char* f : {"manifest.json", "config.resolved.json", "metrics.csv", "checkpoint.json"})
        CHECK(fs::exists(fs::path(r.run_dir) / f));
    // manifest was written before step 0 and records lambda
    std::ifstream in(fs::path(r.run_dir) / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("lambda") != std::string::npos);
    CHECK(text.find("config_digest") != std::string::npos);
}

TEST_CASE("strict config parsing") {
    CHECK_THROWS_AS(parse_config_json("{\"unknown_key\": 1}"), ConfigError);
    CHECK_THROWS_AS(parse_config_json("{\"train\": {\"lr\": \"fast\"}}"), ConfigError);
    CHECK_THROWS_AS(parse_config_json("not json"), ConfigError);

    ExperimentConfig cfg = parse_config_json(R"({"task": "spiral", "train": {"total_iters": 10}})");
    CHECK(cfg.task == "spiral");
    CHECK(cfg.train.total_iters == 10);

    // stage budgets must sum to the total
    ExperimentConfig bad = parse_config_json(
        R"({"train": {"total_iters": 10, "stages": [{"name": "a", "iters": 4}]}})");
    CHECK_THROWS_AS(bad.finalize_and_validate(), ConfigError);
}

TEST_CASE("overrides hit existing keys only and round-trip into the resolved config") {
    ExperimentConfig cfg = tiny_config();
    ExperimentConfig set = apply_overrides(cfg, {"train.total_iters=100", "task=spiral"});
    CHECK(set.train.total_iters == 100);
    CHECK(set.task == "spiral");
    CHECK(config_to_json(set).find("\"task\": \"spiral\"") != std::string::npos);
    CHECK_THROWS_AS(apply_overrides(cfg, {"train.bogus=1"}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(cfg, {"no_equals_sign"}), ConfigError);
}

TEST_CASE("adam first step moves a scalar by about lr and solves a quadratic bowl") {
    // g = 1 at step 1: bias-corrected update is exactly lr
    std::vector<Tensor> params = {Tensor::scalar(1.0)};
    Adam adam(params, {0.1, 0.9, 0.999, 1e-8, 0.0});
    std::vector<Tensor> grads = {Tensor::scalar(1.0)};
    adam.step(params, grads);
    CHECK(params[0][0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));

    // zero gradient leaves parameters unchanged, moments decay
    std::vector<Tensor> frozen = {Tensor::scalar(0.5)};
    Adam adam2(frozen, {0.1, 0.9, 0.999, 1e-8, 0.0});
    adam2.step(frozen, {Tensor::scalar(0.0)});
    CHECK(frozen[0][0] == 0.5);

    // quadratic bowl: f(x) = (x - 3)^2
    std::vector<Tensor> x = {Tensor::scalar(-2.0)};
    Adam opt(x, {0.2, 0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < 400; ++i) {
        std::vector<Tensor> g = {Tensor::scalar(2.0 * (x[0][0] - 3.0))};
        opt.step(x, g);
    }
    CHECK(std::abs(x[0][0] - 3.0) < 1e-3);
}

TEST_CASE("staged and monolithic runs produce the same metrics schema") {
    ExperimentConfig staged = tiny_config();
    StageConfig pre;
    pre.name = "v-pretrain";
    pre.iters = 20;
    pre.fm_ratio = 1.0;
    StageConfig fin;
    fin.name = "u-finetune";
    fin.iters = 20;
    fin.fm_ratio = 0.0;
    staged.train.stages = {pre, fin};

    TrainResult a = train_run(staged, fresh_dir("staged"));
    TrainResult b = train_run(tiny_config(), fresh_dir("monolithic"));
    REQUIRE(!a.metrics.empty());
    REQUIRE(!b.metrics.empty());
    CHECK(a.metrics.front().csv_row().find("v-pretrain") != std::string::npos);
    CHECK(a.metrics.back().csv_row().find("u-finetune") != std::string::npos);
    // identical column structure
    const std::string row_a = a.metrics[0].csv_row();
    const std::string row_b = b.metrics[0].csv_row();
    CHECK(std::count(row_a.begin(), row_a.end(), ',') ==
          std::count(row_b.begin(), row_b.end(), ','));
}

TEST_CASE("stage sweep produces one row per value/seed and records failures") {
    ExperimentConfig base = tiny_config();
    base.train.total_iters = 20;
    const std::string dir = fresh_dir("sweep");
    SweepResult r = run_stage_sweep(base, SweepAxis::KNoise, {"0", "0.03", "0.1"}, {1}, dir);
    CHECK(r.cells.size() == 3);
    for (const SweepCell& c : r.cells) CHECK(c.ok);
    CHECK(fs::exists(r.csv_path));

    CHECK_THROWS_AS(run_stage_sweep(base, SweepAxis::KNoise, {}, {1}, dir), ConfigError);

    // restart skips completed cells (results are reused verbatim)
    SweepResult again = run_stage_sweep(base, SweepAxis::KNoise, {"0", "0.03", "0.1"}, {1}, dir);
    REQUIRE(again.cells.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        REQUIRE(again.cells[i].final_row.w2_1nfe.has_value());
        CHECK(*again.cells[i].final_row.w2_1nfe == *r.cells[i].final_row.w2_1nfe);
    }
}

TEST_CASE("sweep cell configs implement the four axes") {
    ExperimentConfig base = tiny_config();
    base.train.total_iters = 500;

    ExperimentConfig pre = sweep_cell_config(base, SweepAxis::PretrainEpochs, "2", 1);
    REQUIRE(pre.train.stages.size() == 2);
    CHECK(pre.train.stages[0].iters == 200);  // one epoch = 100 iterations
    CHECK(pre.train.stages[0].fm_ratio == 1.0);
    CHECK(pre.train.stages[1].fm_ratio == 0.0);

    ExperimentConfig kn = sweep_cell_config(base, SweepAxis::KNoise, "0.03", 2);
    CHECK(kn.train.stages[0].k_noise == 0.03);

    ExperimentConfig dr = sweep_cell_config(base, SweepAxis::DtRange, "[0.1,0.3]", 3);
    REQUIRE(dr.train.stages[0].dt_range.has_value());
    CHECK(dr.train.stages[0].dt_range->lo == 0.1);
    CHECK(dr.train.stages[0].fm_ratio == 0.0);

    ExperimentConfig ks = sweep_cell_config(base, SweepAxis::KSched, "2", 4);
    CHECK(ks.schedule.k_sched == 2.0);
    CHECK(ks.train.stages[0].progressive);
}

TEST_CASE("loss stays finite across a default-config short run") {
    ExperimentConfig cfg = tiny_config();
    cfg.train.total_iters = 60;
    cfg.train.log_every = 1;
    TrainResult r = train_run(cfg, fresh_dir("finite"));
    CHECK(r.metrics.size() == 60);
    for (const MetricsRecord& m : r.metrics) CHECK(std::isfinite(m.loss_total));
}
