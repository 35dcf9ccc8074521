#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace meanflow {

// Ground-truth 2-D data distributions. Sampling doubles as the reference for
// evaluation: fresh draws from the same sampler are the "real" point cloud.
class DataSampler {
public:
    virtual ~DataSampler() = default;
    virtual i64 dim() const { return 2; }
    virtual Tensor sample(Rng& rng, i64 n) const = 0;
};

// name in {two-moons, gauss8, checkerboard, spiral, single-datum};
// unknown names raise ConfigError listing the valid set.
std::unique_ptr<DataSampler> make_task(const std::string& name);
const std::vector<std::string>& task_names();

// The single-datum task's fixed point, used by closed-form oracles.
Tensor single_datum_point();

}  // namespace meanflow
