#include "meanflow/meanflow.h"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "checkpoint.hpp"
#include "config.hpp"
#include "sampler.hpp"
#include "studies.hpp"
#include "tasks.hpp"
#include "train.hpp"
#include "wasserstein.hpp"

using namespace meanflow;
using nlohmann::json;

struct mf_context {
    std::string last_error;
    mf_status last_status = MF_OK;
};

struct mf_model {
    VelocityNet net;
};

namespace {

mf_status set_error(mf_context* ctx, mf_status status, const std::string& msg) {
    if (ctx != nullptr) {
        ctx->last_error = msg;
        ctx->last_status = status;
    }
    return status;
}

template <typename Fn>
mf_status guarded(mf_context* ctx, Fn&& fn) {
    try {
        fn();
        if (ctx != nullptr) {
            ctx->last_error.clear();
            ctx->last_status = MF_OK;
        }
        return MF_OK;
    } catch (const Error& e) {
        return set_error(ctx, static_cast<mf_status>(static_cast<int>(e.kind())), e.what());
    } catch (const std::exception& e) {
        return set_error(ctx, MF_ERR_INVALID, e.what());
    }
}

SamplerSpec spec_for(const std::string& mode, int nfe) {
    if (mode == "mean-step") return SamplerSpec::mean_step(nfe);
    if (mode == "euler-v") return SamplerSpec::euler_v(nfe);
    throw ConfigError("sampler mode must be 'mean-step' or 'euler-v', got '" + mode + "'");
}

size_t copy_out(const std::string& text, char* buf, size_t buf_size) {
    if (buf != nullptr && buf_size > 0) {
        const size_t n = std::min(buf_size - 1, text.size());
        std::memcpy(buf, text.data(), n);
        buf[n] = '\0';
    }
    return text.size();
}

StudyProfile profile_from_json(const char* profile_json, int* parallel) {
    StudyProfile p;
    if (profile_json == nullptr || *profile_json == '\0') return p;
    json j;
    try {
        j = json::parse(profile_json);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("profile: JSON parse failed: ") + e.what());
    }
    for (const auto& item : j.items()) {
        const std::string& k = item.key();
        if (k == "task")
            p.task = item.value().get<std::string>();
        else if (k == "seeds")
            p.seeds = item.value().get<std::vector<uint64_t>>();
        else if (k == "net_widths")
            p.net_widths = item.value().get<std::vector<i64>>();
        else if (k == "total_iters")
            p.total_iters = item.value().get<i64>();
        else if (k == "pretrain_iters")
            p.pretrain_iters = item.value().get<i64>();
        else if (k == "finetune_iters")
            p.finetune_iters = item.value().get<i64>();
        else if (k == "batch")
            p.batch = item.value().get<i64>();
        else if (k == "eval_samples")
            p.eval_samples = item.value().get<i64>();
        else if (k == "trajectory_evals")
            p.trajectory_evals = item.value().get<i64>();
        else if (k == "parallel")
            *parallel = item.value().get<int>();
        else
            throw ConfigError("profile: unknown key '" + k + "'");
    }
    return p;
}

}  // namespace

extern "C" {

uint32_t mf_api_version(void) { return MEANFLOW_API_VERSION; }
const char* mf_version(void) { return kCodeVersion; }

mf_context* mf_context_create(void) { return new mf_context(); }
void mf_context_destroy(mf_context* ctx) { delete ctx; }

size_t mf_last_error(const mf_context* ctx, char* buf, size_t buf_size) {
    if (ctx == nullptr) return copy_out("", buf, buf_size);
    return copy_out(ctx->last_error, buf, buf_size);
}

mf_status mf_train(mf_context* ctx, const char* config_path, const char* const* overrides,
                   size_t n_overrides, const char* out_dir) {
    return guarded(ctx, [&] {
        if (config_path == nullptr) throw ConfigError("train: config path is null");
        ExperimentConfig cfg = load_config_file(config_path);
        std::vector<std::string> ovs;
        for (size_t i = 0; i < n_overrides; ++i) ovs.emplace_back(overrides[i]);
        cfg = apply_overrides(std::move(cfg), ovs);
        train_run(cfg, out_dir ? out_dir : "");
    });
}

mf_status mf_reproduce(mf_context* ctx, const char* study, const char* out_dir,
                       const char* profile_json) {
    return guarded(ctx, [&] {
        if (study == nullptr || out_dir == nullptr)
            throw ConfigError("reproduce: study and out_dir are required");
        int parallel = 1;
        StudyProfile profile = profile_from_json(profile_json, &parallel);
        profile.parallel = parallel;
        run_study(study, profile, out_dir);
    });
}

mf_status mf_eval(mf_context* ctx, const char* checkpoint_path, const char* task,
                  const char* mode, const int* nfe_list, size_t n_nfe, double* w2_out,
                  const char* out_csv) {
    return guarded(ctx, [&] {
        if (checkpoint_path == nullptr || task == nullptr || mode == nullptr)
            throw ConfigError("eval: checkpoint, task and mode are required");
        if (n_nfe == 0) throw ConfigError("eval: empty nfe list");
        Checkpoint ck = Checkpoint::load(checkpoint_path);
        VelocityNet net = ck.to_net();
        auto sampler_task = make_task(task);
        if (sampler_task->dim() != net.config().data_dim)
            throw ConfigError("eval: checkpoint dimensionality " +
                              std::to_string(net.config().data_dim) + " does not match task '" +
                              std::string(task) + "'");

        EvalOptions opts;
        Rng rng(opts.seed);
        const Tensor truth = sampler_task->sample(rng, opts.samples);
        const Tensor eps = rng.normal_tensor({opts.samples, net.config().data_dim});

        std::ofstream csv;
        if (out_csv != nullptr) {
            csv.open(out_csv, std::ios::trunc);
            if (!csv) throw IoError(std::string("eval: cannot open '") + out_csv + "'");
            csv << "task,mode,nfe,samples,w2\n";
            csv.precision(12);
        }
        for (size_t i = 0; i < n_nfe; ++i) {
            const double w2 =
                wasserstein2(sample_from(net, spec_for(mode, nfe_list[i]), eps), truth);
            if (w2_out != nullptr) w2_out[i] = w2;
            if (csv.is_open())
                csv << task << "," << mode << "," << nfe_list[i] << "," << opts.samples << ","
                    << w2 << "\n";
        }
    });
}

mf_status mf_sample_to_file(mf_context* ctx, const char* checkpoint_path, const char* mode,
                            int nfe, size_t n, uint64_t seed, const char* out_base) {
    return guarded(ctx, [&] {
        if (checkpoint_path == nullptr || mode == nullptr || out_base == nullptr)
            throw ConfigError("sample: checkpoint, mode and out path are required");
        Checkpoint ck = Checkpoint::load(checkpoint_path);
        VelocityNet net = ck.to_net();
        Rng rng(seed);
        Tensor points = sample(net, spec_for(mode, nfe), static_cast<i64>(n), rng);

        const std::string csv_path = std::string(out_base) + ".csv";
        std::ofstream csv(csv_path, std::ios::trunc);
        if (!csv) throw IoError("sample: cannot open '" + csv_path + "'");
        csv << "x,y\n";
        csv.precision(12);
        for (i64 i = 0; i < points.rows(); ++i) {
            for (i64 j = 0; j < points.cols(); ++j) csv << (j ? "," : "") << points.at(i, j);
            csv << "\n";
        }

        const std::string bin_path = std::string(out_base) + ".f64";
        std::ofstream bin(bin_path, std::ios::trunc | std::ios::binary);
        if (!bin) throw IoError("sample: cannot open '" + bin_path + "'");
        bin.write(reinterpret_cast<const char*>(points.data()),
                  static_cast<std::streamsize>(points.size() * sizeof(double)));
        if (!bin.good()) throw IoError("sample: write to '" + bin_path + "' failed");
    });
}

size_t mf_config_reference(char* buf, size_t buf_size) {
    return copy_out(config_reference(), buf, buf_size);
}

mf_status mf_model_load(mf_context* ctx, const char* checkpoint_path, mf_model** out_model) {
    return guarded(ctx, [&] {
        if (checkpoint_path == nullptr || out_model == nullptr)
            throw ConfigError("model_load: null argument");
        Checkpoint ck = Checkpoint::load(checkpoint_path);
        *out_model = new mf_model{ck.to_net()};
    });
}

void mf_model_destroy(mf_model* model) { delete model; }

int32_t mf_model_dim(const mf_model* model) {
    return model == nullptr ? -1 : static_cast<int32_t>(model->net.config().data_dim);
}

int64_t mf_model_param_count(const mf_model* model) {
    return model == nullptr ? -1 : static_cast<int64_t>(model->net.param_count());
}

mf_status mf_model_sample(mf_context* ctx, const mf_model* model, const char* mode, int nfe,
                          size_t n, uint64_t seed, double* out) {
    return guarded(ctx, [&] {
        if (model == nullptr || mode == nullptr || out == nullptr)
            throw InvalidError("model_sample: null argument");
        Rng rng(seed);
        Tensor points = sample(model->net, spec_for(mode, nfe), static_cast<i64>(n), rng);
        std::memcpy(out, points.data(), points.size() * sizeof(double));
    });
}

mf_status mf_model_velocity(mf_context* ctx, const mf_model* model, const double* z, size_t n,
                            double r, double t, double* out) {
    return guarded(ctx, [&] {
        if (model == nullptr || z == nullptr || out == nullptr)
            throw InvalidError("model_velocity: null argument");
        const i64 dim = model->net.config().data_dim;
        Tensor zin({static_cast<i64>(n), dim},
                   std::vector<double>(z, z + n * static_cast<size_t>(dim)));
        Tensor u = model->net.eval(zin, r, t);
        std::memcpy(out, u.data(), u.size() * sizeof(double));
    });
}

mf_status mf_wasserstein2(mf_context* ctx, const double* a, const double* b, size_t n,
                          size_t dim, double* out) {
    return guarded(ctx, [&] {
        if (a == nullptr || b == nullptr || out == nullptr)
            throw InvalidError("wasserstein2: null argument");
        Tensor ta({static_cast<i64>(n), static_cast<i64>(dim)},
                  std::vector<double>(a, a + n * dim));
        Tensor tb({static_cast<i64>(n), static_cast<i64>(dim)},
                  std::vector<double>(b, b + n * dim));
        *out = wasserstein2(ta, tb);
    });
}

}  // extern "C"
