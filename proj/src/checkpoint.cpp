#include "checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace meanflow {

using nlohmann::json;

uint64_t fnv1a64(const std::string& text) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

json tensor_to_json(const Tensor& t) {
    json j;
    j["shape"] = t.shape();
    j["data"] = std::vector<double>(t.data(), t.data() + t.size());
    return j;
}

Tensor tensor_from_json(const json& j) {
    return Tensor(j.at("shape").get<std::vector<i64>>(),
                  j.at("data").get<std::vector<double>>());
}

json tensors_to_json(const std::vector<Tensor>& ts) {
    json arr = json::array();
    for (const Tensor& t : ts) arr.push_back(tensor_to_json(t));
    return arr;
}

std::vector<Tensor> tensors_from_json(const json& arr) {
    std::vector<Tensor> out;
    for (const json& j : arr) out.push_back(tensor_from_json(j));
    return out;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    json j;
    j["format_version"] = format_version;
    j["config_digest"] = config_digest;
    j["net"] = {{"data_dim", net_config.data_dim},
                {"widths", net_config.widths},
                {"time_embed_dim", net_config.time_embed_dim},
                {"time_freq_max", net_config.time_freq_max},
                {"label_count", net_config.label_count},
                {"label_embed_dim", net_config.label_embed_dim}};
    j["params"] = tensors_to_json(params);
    j["adam_m"] = tensors_to_json(adam_m);
    j["adam_v"] = tensors_to_json(adam_v);
    j["adam_steps"] = adam_steps;
    j["iteration"] = iteration;
    j["rng_state"] = rng_state;
    j["lambda"] = lambda;
    j["sampler_ema"] = sampler_ema;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    out << j.dump();
    out.close();
    if (!out) throw IoError("checkpoint: write to '" + path + "' failed");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
        Checkpoint c;
        c.format_version = j.at("format_version").get<int>();
        if (c.format_version != kCheckpointFormatVersion)
            throw IoError("checkpoint: unsupported format version " +
                          std::to_string(c.format_version) + " in '" + path + "'");
        c.config_digest = j.at("config_digest").get<uint64_t>();
        const json& n = j.at("net");
        c.net_config.data_dim = n.at("data_dim").get<i64>();
        c.net_config.widths = n.at("widths").get<std::vector<i64>>();
        c.net_config.time_embed_dim = n.at("time_embed_dim").get<i64>();
        c.net_config.time_freq_max = n.at("time_freq_max").get<double>();
        c.net_config.label_count = n.at("label_count").get<i64>();
        c.net_config.label_embed_dim = n.at("label_embed_dim").get<i64>();
        c.params = tensors_from_json(j.at("params"));
        c.adam_m = tensors_from_json(j.at("adam_m"));
        c.adam_v = tensors_from_json(j.at("adam_v"));
        c.adam_steps = j.at("adam_steps").get<i64>();
        c.iteration = j.at("iteration").get<i64>();
        c.rng_state = j.at("rng_state").get<std::string>();
        c.lambda = j.at("lambda").get<double>();
        c.sampler_ema = j.at("sampler_ema").get<std::vector<double>>();
        return c;
    } catch (const json::exception& e) {
        throw IoError("checkpoint: decode of '" + path + "' failed: " + e.what());
    } catch (const InvalidError& e) {
        throw IoError("checkpoint: decode of '" + path + "' failed: " + std::string(e.what()));
    }
}

VelocityNet Checkpoint::to_net() const {
    Rng scratch(0);
    VelocityNet net(net_config, scratch);
    if (net.params().size() != params.size())
        throw ConfigError("checkpoint: parameter tensor count does not match architecture");
    for (size_t i = 0; i < params.size(); ++i) {
        if (!net.params()[i].same_shape(params[i]))
            throw ConfigError("checkpoint: parameter " + std::to_string(i) + " has shape " +
                              params[i].shape_str() + ", architecture expects " +
                              net.params()[i].shape_str());
        net.params()[i] = params[i];
    }
    return net;
}

}  // namespace meanflow
