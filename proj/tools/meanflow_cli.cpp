#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "meanflow/meanflow.h"

namespace {

int report(mf_context* ctx, mf_status status) {
    if (status != MF_OK) {
        std::vector<char> buf(4096);
        mf_last_error(ctx, buf.data(), buf.size());
        std::fprintf(stderr, "error: %s\n", buf.data());
    }
    return static_cast<int>(status);
}

std::string profile_json(const std::string& task, long long iters, long long pretrain,
                         long long finetune, long long batch, long long eval_samples,
                         const std::vector<unsigned long long>& seeds, int parallel) {
    std::string json = "{";
    auto add = [&](const std::string& piece) {
        if (json.size() > 1) json += ",";
        json += piece;
    };
    if (!task.empty()) add("\"task\":\"" + task + "\"");
    if (iters > 0) add("\"total_iters\":" + std::to_string(iters));
    if (pretrain > 0) add("\"pretrain_iters\":" + std::to_string(pretrain));
    if (finetune > 0) add("\"finetune_iters\":" + std::to_string(finetune));
    if (batch > 0) add("\"batch\":" + std::to_string(batch));
    if (eval_samples > 0) add("\"eval_samples\":" + std::to_string(eval_samples));
    if (parallel > 1) add("\"parallel\":" + std::to_string(parallel));
    if (!seeds.empty()) {
        std::string s = "\"seeds\":[";
        for (size_t i = 0; i < seeds.size(); ++i)
            s += (i ? "," : "") + std::to_string(seeds[i]);
        json += json.size() > 1 ? "," + s + "]" : s + "]";
    }
    json += "}";
    return json;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"meanflow: joint instantaneous/average velocity training on 2-D tasks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mf_version()));

    // train
    auto* train = app.add_subcommand("train", "train a model from a JSON config");
    std::string config_path, out_dir;
    std::vector<std::string> overrides;
    train->add_option("config", config_path, "config file path")->required();
    train->add_option("--set", overrides, "override, e.g. --set train.total_iters=100");
    train->add_option("--out", out_dir, "output directory (default: from config)");

    // eval
    auto* eval = app.add_subcommand("eval", "W2 readouts of a checkpoint");
    std::string ckpt, task = "gauss8", mode = "mean-step", eval_csv;
    std::vector<int> nfe_list = {1, 2, 32};
    eval->add_option("checkpoint", ckpt, "checkpoint file")->required();
    eval->add_option("--task", task, "reference task (default gauss8)");
    eval->add_option("--mode", mode, "mean-step | euler-v");
    eval->add_option("--nfe", nfe_list, "NFE values (default 1 2 32)");
    eval->add_option("--out", eval_csv, "also write a CSV here");

    // reproduce
    auto* rep = app.add_subcommand("reproduce", "rerun one of the paper studies at desk scale");
    std::string study, rep_out, rep_task;
    long long rep_iters = 0, rep_pre = 0, rep_fin = 0, rep_batch = 0, rep_eval = 0;
    std::vector<unsigned long long> rep_seeds;
    int rep_parallel = 1;
    rep->add_option("study", study, "obs1 | obs2 | obs3 | ablation | ksweep")->required();
    rep->add_option("--out", rep_out, "output directory (default <root>/reproduce/<study>)");
    rep->add_option("--task", rep_task, "override the study task");
    rep->add_option("--iters", rep_iters, "override the per-run budget");
    rep->add_option("--pretrain-iters", rep_pre, "override the pretraining budget");
    rep->add_option("--finetune-iters", rep_fin, "override the finetuning budget");
    rep->add_option("--batch", rep_batch, "override the batch size");
    rep->add_option("--eval-samples", rep_eval, "override the W2 sample count");
    rep->add_option("--seeds", rep_seeds, "override the seed list");
    rep->add_option("--parallel", rep_parallel, "run this many cells concurrently");

    // sample
    auto* smp = app.add_subcommand("sample", "draw samples from a checkpoint into files");
    std::string smp_ckpt, smp_mode = "mean-step", smp_out = "samples";
    int smp_nfe = 1;
    size_t smp_n = 2048;
    unsigned long long smp_seed = 0;
    smp->add_option("checkpoint", smp_ckpt, "checkpoint file")->required();
    smp->add_option("--mode", smp_mode, "mean-step | euler-v");
    smp->add_option("--nfe", smp_nfe, "steps (default 1)");
    smp->add_option("--n", smp_n, "sample count (default 2048)");
    smp->add_option("--seed", smp_seed, "noise seed");
    smp->add_option("--out", smp_out, "output base path (writes .csv and .f64)");

    auto* cfgref = app.add_subcommand("config-reference", "print all config keys and defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(MF_ERR_CONFIG);
    }

    mf_context* ctx = mf_context_create();
    int rc = 0;

    if (train->parsed()) {
        std::vector<const char*> ovs;
        for (const std::string& o : overrides) ovs.push_back(o.c_str());
        rc = report(ctx, mf_train(ctx, config_path.c_str(), ovs.data(), ovs.size(),
                                  out_dir.empty() ? nullptr : out_dir.c_str()));
    } else if (eval->parsed()) {
        std::vector<double> w2(nfe_list.size(), 0.0);
        const mf_status st =
            mf_eval(ctx, ckpt.c_str(), task.c_str(), mode.c_str(), nfe_list.data(),
                    nfe_list.size(), w2.data(), eval_csv.empty() ? nullptr : eval_csv.c_str());
        if (st == MF_OK)
            for (size_t i = 0; i < nfe_list.size(); ++i)
                std::printf("%s %d-NFE W2 = %.6f\n", mode.c_str(), nfe_list[i], w2[i]);
        rc = report(ctx, st);
    } else if (rep->parsed()) {
        if (rep_out.empty()) {
            const char* root = std::getenv("MEANFLOW_OUT_ROOT");
            rep_out = std::string(root ? root : "runs") + "/reproduce/" + study;
        }
        const std::string profile = profile_json(rep_task, rep_iters, rep_pre, rep_fin, rep_batch,
                                                 rep_eval, rep_seeds, rep_parallel);
        const mf_status st = mf_reproduce(ctx, study.c_str(), rep_out.c_str(), profile.c_str());
        if (st == MF_OK) {
            std::printf("study artifacts in %s\n", rep_out.c_str());
            // surface the verdicts on stdout
            const std::string verdicts = rep_out + "/verdicts.txt";
            if (FILE* f = std::fopen(verdicts.c_str(), "r")) {
                char line[512];
                while (std::fgets(line, sizeof line, f)) std::fputs(line, stdout);
                std::fclose(f);
            }
        }
        rc = report(ctx, st);
    } else if (smp->parsed()) {
        rc = report(ctx, mf_sample_to_file(ctx, smp_ckpt.c_str(), smp_mode.c_str(), smp_nfe,
                                           smp_n, smp_seed, smp_out.c_str()));
    } else if (cfgref->parsed()) {
        const size_t n = mf_config_reference(nullptr, 0);
        std::vector<char> buf(n + 1);
        mf_config_reference(buf.data(), buf.size());
        std::fputs(buf.data(), stdout);
    }

    mf_context_destroy(ctx);
    return rc;
}
