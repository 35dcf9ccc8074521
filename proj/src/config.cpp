#include "config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "checkpoint.hpp"
#include "tasks.hpp"

namespace meanflow {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError("config: '" + path + "' must be an object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw ConfigError("config: unknown key '" + path + item.key() + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for '" + std::string(key) + "': " + e.what());
    }
}

SamplerKind sampler_from_string(const std::string& s) {
    if (s == "base") return SamplerKind::Base;
    if (s == "adaptive") return SamplerKind::Adaptive;
    throw ConfigError("config: sampler must be 'base' or 'adaptive', got '" + s + "'");
}

AlphaKind alpha_from_string(const std::string& s) {
    if (s == "unit") return AlphaKind::Unit;
    if (s == "clamped-snr") return AlphaKind::ClampedSnr;
    throw ConfigError("config: alpha must be 'unit' or 'clamped-snr', got '" + s + "'");
}

const char* sampler_to_string(SamplerKind k) {
    return k == SamplerKind::Base ? "base" : "adaptive";
}
const char* alpha_to_string(AlphaKind k) { return k == AlphaKind::Unit ? "unit" : "clamped-snr"; }

std::optional<DtRange> dt_range_from_json(const json& j, const std::string& path) {
    if (j.is_null()) return std::nullopt;
    if (!j.is_array() || j.size() != 2)
        throw ConfigError("config: '" + path + "' must be null or [lo, hi]");
    return DtRange{j[0].get<double>(), j[1].get<double>()};
}

json dt_range_to_json(const std::optional<DtRange>& r) {
    if (!r) return nullptr;
    return json::array({r->lo, r->hi});
}

StageConfig stage_from_json(const json& j, const std::string& path) {
    check_keys(j, path,
               {"name", "iters", "fm_ratio", "k_noise", "dt_range", "sampler", "alpha",
                "progressive"});
    StageConfig s;
    read(j, "name", s.name);
    read(j, "iters", s.iters);
    read(j, "fm_ratio", s.fm_ratio);
    read(j, "k_noise", s.k_noise);
    if (j.contains("dt_range")) s.dt_range = dt_range_from_json(j.at("dt_range"), path + "dt_range");
    if (j.contains("sampler")) s.sampler = sampler_from_string(j.at("sampler").get<std::string>());
    if (j.contains("alpha")) s.alpha = alpha_from_string(j.at("alpha").get<std::string>());
    read(j, "progressive", s.progressive);
    return s;
}

json stage_to_json(const StageConfig& s) {
    return {{"name", s.name},
            {"iters", s.iters},
            {"fm_ratio", s.fm_ratio},
            {"k_noise", s.k_noise},
            {"dt_range", dt_range_to_json(s.dt_range)},
            {"sampler", sampler_to_string(s.sampler)},
            {"alpha", alpha_to_string(s.alpha)},
            {"progressive", s.progressive}};
}

ExperimentConfig config_from_json(const json& j) {
    check_keys(j, "", {"experiment", "task", "seed", "out_dir", "init_from", "net", "train",
                       "schedule"});
    ExperimentConfig cfg;
    read(j, "experiment", cfg.experiment);
    read(j, "task", cfg.task);
    read(j, "seed", cfg.seed);
    read(j, "out_dir", cfg.out_dir);
    read(j, "init_from", cfg.init_from);

    if (j.contains("net")) {
        const json& n = j.at("net");
        check_keys(n, "net.",
                   {"widths", "time_embed_dim", "time_freq_max", "label_count",
                    "label_embed_dim"});
        read(n, "widths", cfg.net.widths);
        read(n, "time_embed_dim", cfg.net.time_embed_dim);
        read(n, "time_freq_max", cfg.net.time_freq_max);
        read(n, "label_count", cfg.net.label_count);
        read(n, "label_embed_dim", cfg.net.label_embed_dim);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, "train.",
                   {"total_iters", "batch", "lr", "adam_beta1", "adam_beta2", "adam_eps",
                    "clip_norm", "log_every", "eval_every", "eval_samples", "eval_seed", "adp_c",
                    "adp_p", "stages"});
        read(t, "total_iters", cfg.train.total_iters);
        read(t, "batch", cfg.train.batch);
        read(t, "lr", cfg.train.lr);
        read(t, "adam_beta1", cfg.train.adam_beta1);
        read(t, "adam_beta2", cfg.train.adam_beta2);
        read(t, "adam_eps", cfg.train.adam_eps);
        read(t, "clip_norm", cfg.train.clip_norm);
        read(t, "log_every", cfg.train.log_every);
        read(t, "eval_every", cfg.train.eval_every);
        read(t, "eval_samples", cfg.train.eval_samples);
        read(t, "eval_seed", cfg.train.eval_seed);
        read(t, "adp_c", cfg.train.adp_c);
        read(t, "adp_p", cfg.train.adp_p);
        if (t.contains("stages")) {
            if (!t.at("stages").is_array())
                throw ConfigError("config: 'train.stages' must be an array");
            for (size_t i = 0; i < t.at("stages").size(); ++i)
                cfg.train.stages.push_back(stage_from_json(
                    t.at("stages")[i], "train.stages[" + std::to_string(i) + "]."));
        }
    }
    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        check_keys(s, "schedule.",
                   {"fm_ratio", "k_sched", "progressive", "alpha", "sampler", "dt_range",
                    "logit_mu", "logit_sigma", "bins", "ema_decay", "floor_mass", "snr_clamp",
                    "lambda_draws"});
        read(s, "fm_ratio", cfg.schedule.fm_ratio);
        read(s, "k_sched", cfg.schedule.k_sched);
        read(s, "progressive", cfg.schedule.progressive);
        if (s.contains("alpha")) cfg.schedule.alpha_kind = alpha_from_string(s.at("alpha"));
        if (s.contains("sampler"))
            cfg.schedule.sampler_kind = sampler_from_string(s.at("sampler"));
        if (s.contains("dt_range"))
            cfg.schedule.dt_range = dt_range_from_json(s.at("dt_range"), "schedule.dt_range");
        read(s, "logit_mu", cfg.schedule.logit_mu);
        read(s, "logit_sigma", cfg.schedule.logit_sigma);
        read(s, "bins", cfg.schedule.bins);
        read(s, "ema_decay", cfg.schedule.ema_decay);
        read(s, "floor_mass", cfg.schedule.floor_mass);
        read(s, "snr_clamp", cfg.schedule.snr_clamp);
        read(s, "lambda_draws", cfg.schedule.lambda_draws);
    }
    return cfg;
}

json config_to_json_obj(const ExperimentConfig& cfg) {
    json stages = json::array();
    for (const StageConfig& s : cfg.train.stages) stages.push_back(stage_to_json(s));
    return {{"experiment", cfg.experiment},
            {"task", cfg.task},
            {"seed", cfg.seed},
            {"out_dir", cfg.out_dir},
            {"init_from", cfg.init_from},
            {"net",
             {{"widths", cfg.net.widths},
              {"time_embed_dim", cfg.net.time_embed_dim},
              {"time_freq_max", cfg.net.time_freq_max},
              {"label_count", cfg.net.label_count},
              {"label_embed_dim", cfg.net.label_embed_dim}}},
            {"train",
             {{"total_iters", cfg.train.total_iters},
              {"batch", cfg.train.batch},
              {"lr", cfg.train.lr},
              {"adam_beta1", cfg.train.adam_beta1},
              {"adam_beta2", cfg.train.adam_beta2},
              {"adam_eps", cfg.train.adam_eps},
              {"clip_norm", cfg.train.clip_norm},
              {"log_every", cfg.train.log_every},
              {"eval_every", cfg.train.eval_every},
              {"eval_samples", cfg.train.eval_samples},
              {"eval_seed", cfg.train.eval_seed},
              {"adp_c", cfg.train.adp_c},
              {"adp_p", cfg.train.adp_p},
              {"stages", stages}}},
            {"schedule",
             {{"fm_ratio", cfg.schedule.fm_ratio},
              {"k_sched", cfg.schedule.k_sched},
              {"progressive", cfg.schedule.progressive},
              {"alpha", alpha_to_string(cfg.schedule.alpha_kind)},
              {"sampler", sampler_to_string(cfg.schedule.sampler_kind)},
              {"dt_range", dt_range_to_json(cfg.schedule.dt_range)},
              {"logit_mu", cfg.schedule.logit_mu},
              {"logit_sigma", cfg.schedule.logit_sigma},
              {"bins", cfg.schedule.bins},
              {"ema_decay", cfg.schedule.ema_decay},
              {"floor_mass", cfg.schedule.floor_mass},
              {"snr_clamp", cfg.schedule.snr_clamp},
              {"lambda_draws", cfg.schedule.lambda_draws}}}};
}

}  // namespace

void ExperimentConfig::finalize_and_validate() {
    if (train.total_iters < 0) throw ConfigError("config: train.total_iters must be >= 0");
    if (train.batch < 1) throw ConfigError("config: train.batch must be >= 1");
    if (train.stages.empty()) {
        StageConfig joint;
        joint.name = "joint";
        joint.iters = train.total_iters;
        joint.fm_ratio = schedule.fm_ratio;
        joint.dt_range = schedule.dt_range;
        joint.sampler = schedule.sampler_kind;
        joint.alpha = schedule.alpha_kind;
        joint.progressive = schedule.progressive;
        train.stages.push_back(joint);
    }
    i64 total = 0;
    for (const StageConfig& s : train.stages) {
        if (s.iters < 0) throw ConfigError("config: stage '" + s.name + "' has negative budget");
        if (s.fm_ratio < 0.0 || s.fm_ratio > 1.0)
            throw ConfigError("config: stage '" + s.name + "' fm_ratio must be in [0,1]");
        total += s.iters;
    }
    if (total != train.total_iters)
        throw ConfigError("config: stage budgets sum to " + std::to_string(total) +
                          " but train.total_iters is " + std::to_string(train.total_iters));
    (void)make_task(task);  // validates the task name
}

std::vector<StageConfig> ExperimentConfig::resolved_stages() const { return train.stages; }

ExperimentConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: JSON parse failed: ") + e.what());
    }
    return config_from_json(j);
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_json(buf.str());
}

ExperimentConfig apply_overrides(ExperimentConfig base,
                                 const std::vector<std::string>& overrides) {
    if (overrides.empty()) return base;
    json j = config_to_json_obj(base);
    for (const std::string& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + ov + "' is not of the form path=value");
        std::string path = ov.substr(0, eq);
        const std::string value = ov.substr(eq + 1);
        for (auto& c : path)
            if (c == '.') c = '/';
        const json::json_pointer ptr("/" + path);
        json parsed;
        try {
            parsed = json::parse(value);
        } catch (const json::exception&) {
            parsed = value;  // plain string
        }
        try {
            // the key must already exist: overrides cannot invent config keys
            (void)j.at(ptr);
            j[ptr] = parsed;
        } catch (const json::exception&) {
            throw ConfigError("override targets unknown config key '" + ov.substr(0, eq) + "'");
        }
    }
    return config_from_json(j);
}

std::string config_to_json(const ExperimentConfig& cfg) { return config_to_json_obj(cfg).dump(2); }

uint64_t config_digest(const ExperimentConfig& cfg) { return fnv1a64(config_to_json(cfg)); }

std::string output_root() {
    if (const char* env = std::getenv("MEANFLOW_OUT_ROOT")) return env;
    return "runs";
}

std::string resolve_out_dir(const ExperimentConfig& cfg) {
    if (!cfg.out_dir.empty()) {
        if (cfg.out_dir.front() == '/') return cfg.out_dir;
        return output_root() + "/" + cfg.out_dir;
    }
    return output_root() + "/" + cfg.experiment;
}

std::string config_reference() {
    struct Row {
        const char* key;
        const char* type;
        const char* def;
        const char* doc;
    };
    static const Row rows[] = {
        {"experiment", "string", "default", "run name; default output directory stem"},
        {"task", "string", "gauss8",
         "data distribution: two-moons | gauss8 | checkerboard | spiral | single-datum"},
        {"seed", "int", "1", "master seed for init, data and time sampling"},
        {"out_dir", "string", "", "output directory (relative paths live under the out root)"},
        {"init_from", "string", "", "checkpoint whose parameters seed the model"},
        {"net.widths", "int list", "[256,256,256]", "hidden layer widths"},
        {"net.time_embed_dim", "int", "64", "sinusoidal embedding size per time argument"},
        {"net.time_freq_max", "float", "1000", "top of the log-spaced frequency band"},
        {"net.label_count", "int", "0", "class count; 0 = unconditional"},
        {"net.label_embed_dim", "int", "16", "label embedding size when conditional"},
        {"train.total_iters", "int", "4000", "total iteration budget; must equal the stage sum"},
        {"train.batch", "int", "512", "rows per iteration"},
        {"train.lr", "float", "3e-4", "Adam learning rate"},
        {"train.adam_beta1", "float", "0.9", "Adam beta1"},
        {"train.adam_beta2", "float", "0.999", "Adam beta2"},
        {"train.adam_eps", "float", "1e-8", "Adam epsilon"},
        {"train.clip_norm", "float", "1.0", "global gradient-norm clip; <= 0 disables"},
        {"train.log_every", "int", "50", "loss logging cadence in iterations"},
        {"train.eval_every", "int", "0", "W2 evaluation cadence; 0 = final only"},
        {"train.eval_samples", "int", "2048", "points per cloud in the W2 readouts"},
        {"train.eval_seed", "int", "9000", "fixed seed for evaluation draws"},
        {"train.adp_c", "float", "1e-3", "adaptive weight constant c"},
        {"train.adp_p", "float", "1.0", "adaptive weight exponent p"},
        {"train.stages", "list", "[]",
         "stage list (name, iters, fm_ratio, k_noise, dt_range, sampler, alpha, progressive); "
         "empty = one joint stage from the schedule section"},
        {"schedule.fm_ratio", "float", "0.5", "probability of a t == r row"},
        {"schedule.k_sched", "float", "1.0", "progress exponent: s = 1 - (i/T)^k"},
        {"schedule.progressive", "bool", "false", "enable the gap weighting beta(dt, s)"},
        {"schedule.alpha", "string", "unit", "fm-row weight: unit | clamped-snr"},
        {"schedule.sampler", "string", "base", "time sampler: base | adaptive"},
        {"schedule.dt_range", "[lo,hi]|null", "null", "gap restriction for gap rows"},
        {"schedule.logit_mu", "float", "-0.4", "base sampler logit-normal location"},
        {"schedule.logit_sigma", "float", "1.0", "base sampler logit-normal scale"},
        {"schedule.bins", "int", "64", "adaptive sampler histogram bins"},
        {"schedule.ema_decay", "float", "0.99", "adaptive sampler loss EMA decay"},
        {"schedule.floor_mass", "float", "0.1", "uniform mass share mixed into the density"},
        {"schedule.snr_clamp", "float", "5.0", "gamma for the clamped-snr weight"},
        {"schedule.lambda_draws", "int", "200000", "Monte-Carlo draws for the lambda estimate"},
    };
    std::ostringstream os;
    os << "# configuration reference (JSON config files; --set path=value overrides)\n";
    for (const Row& r : rows)
        os << r.key << "  [" << r.type << ", default " << r.def << "]\n    " << r.doc << "\n";
    return os.str();
}

}  // namespace meanflow
