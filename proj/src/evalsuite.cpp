#include "evalsuite.hpp"

#include <sstream>

#include "sampler.hpp"
#include "wasserstein.hpp"

namespace meanflow {

const char* MetricsRecord::csv_header() {
    return "iter,stage,loss_total,loss_u,loss_v,mean_beta,mean_alpha,s,w2_1nfe,w2_2nfe,w2_euler32";
}

namespace {

void put(std::ostringstream& os, const std::optional<double>& v) {
    os << ",";
    if (v) os << *v;
}

}  // namespace

std::string MetricsRecord::csv_row() const {
    std::ostringstream os;
    os.precision(12);
    os << iteration << "," << stage << "," << loss_total << "," << loss_u << "," << loss_v << ","
       << mean_beta << "," << mean_alpha << "," << s;
    put(os, w2_1nfe);
    put(os, w2_2nfe);
    put(os, w2_euler32);
    return os.str();
}

void eval_suite(const VelocityNet& net, const DataSampler& task, const EvalOptions& opts,
                MetricsRecord& record) {
    Rng rng(opts.seed);
    const Tensor truth = task.sample(rng, opts.samples);
    const Tensor eps = rng.normal_tensor({opts.samples, net.config().data_dim});

    record.w2_1nfe = wasserstein2(sample_from(net, SamplerSpec::mean_step(1), eps), truth);
    record.w2_2nfe = wasserstein2(sample_from(net, SamplerSpec::mean_step(2), eps), truth);
    record.w2_euler32 =
        wasserstein2(sample_from(net, SamplerSpec::euler_v(opts.euler_nfe), eps), truth);
}

}  // namespace meanflow
