#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "net.hpp"

namespace meanflow {

constexpr int kCheckpointFormatVersion = 1;

uint64_t fnv1a64(const std::string& text);

// Full training snapshot: parameters, optimizer moments, iteration counter,
// RNG stream state and the frozen schedule extras. Loading a snapshot and
// continuing reproduces the uninterrupted run bit-exactly.
struct Checkpoint {
    int format_version = kCheckpointFormatVersion;
    uint64_t config_digest = 0;
    NetConfig net_config;
    std::vector<Tensor> params;
    std::vector<Tensor> adam_m, adam_v;
    i64 adam_steps = 0;
    i64 iteration = 0;
    std::string rng_state;
    double lambda = 1.0;
    std::vector<double> sampler_ema;

    void save(const std::string& path) const;
    // IoError on unreadable/corrupt files (decode context in the message).
    static Checkpoint load(const std::string& path);

    VelocityNet to_net() const;
};

}  // namespace meanflow
