#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "errors.hpp"
#include "tensor.hpp"

namespace meanflow {

// Deterministic RNG: mt19937_64 bit source with explicit, stateless
// transforms on top, so the full stream state is the engine state alone
// (serializable for exact training resume).
class Rng {
public:
    Rng() : engine_(0) {}
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller from two fresh uniforms; no cached state.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    size_t index(size_t n) { return static_cast<size_t>(uniform() * static_cast<double>(n)) % n; }

    Tensor normal_tensor(std::vector<i64> shape) {
        Tensor t(std::move(shape));
        for (size_t i = 0; i < t.size(); ++i) t[i] = normal();
        return t;
    }

    // Derive an independent stream (e.g. per sweep cell or eval pass).
    Rng fork(uint64_t salt) {
        Rng r(next_u64() ^ (salt * 0x9e3779b97f4a7c15ull));
        return r;
    }

    std::string save_state() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void load_state(const std::string& state) {
        std::istringstream is(state);
        is >> engine_;
        if (is.fail()) throw IoError("rng: malformed engine state");
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace meanflow
