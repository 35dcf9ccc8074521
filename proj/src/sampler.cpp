#include "sampler.hpp"

namespace meanflow {

namespace {

std::vector<double> uniform_grid(int nfe) {
    std::vector<double> g;
    for (int k = 0; k <= nfe; ++k)
        g.push_back(1.0 - static_cast<double>(k) / static_cast<double>(nfe));
    g.front() = 1.0;
    g.back() = 0.0;
    return g;
}

}  // namespace

SamplerSpec SamplerSpec::mean_step(int nfe) {
    return {SamplerMode::MeanStep, nfe, uniform_grid(nfe)};
}
SamplerSpec SamplerSpec::euler_v(int nfe) { return {SamplerMode::EulerV, nfe, uniform_grid(nfe)}; }

void SamplerSpec::validate() const {
    if (nfe < 1) throw ConfigError("sampler: nfe must be >= 1");
    if (grid.size() != static_cast<size_t>(nfe) + 1)
        throw ConfigError("sampler: grid must have nfe + 1 points");
    if (grid.front() != 1.0 || grid.back() != 0.0)
        throw ConfigError("sampler: grid endpoints must be exactly 1 and 0");
    for (size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] < grid[i - 1]))
            throw ConfigError("sampler: grid must be strictly decreasing");
}

}  // namespace meanflow
