#include "tasks.hpp"

#include <cmath>

namespace meanflow {

namespace {

struct TwoMoons : DataSampler {
    Tensor sample(Rng& rng, i64 n) const override {
        Tensor out({n, 2});
        for (i64 i = 0; i < n; ++i) {
            const double theta = rng.uniform() * M_PI;
            double x, y;
            if (rng.uniform() < 0.5) {
                x = std::cos(theta);
                y = std::sin(theta);
            } else {
                x = 1.0 - std::cos(theta);
                y = 0.5 - std::sin(theta);
            }
            out.at(i, 0) = 2.0 * (x - 0.5 + 0.08 * rng.normal());
            out.at(i, 1) = 2.0 * (y - 0.25 + 0.08 * rng.normal());
        }
        return out;
    }
};

struct Gauss8 : DataSampler {
    Tensor sample(Rng& rng, i64 n) const override {
        Tensor out({n, 2});
        for (i64 i = 0; i < n; ++i) {
            const double angle = 2.0 * M_PI * static_cast<double>(rng.index(8)) / 8.0;
            out.at(i, 0) = 2.0 * std::cos(angle) + 0.15 * rng.normal();
            out.at(i, 1) = 2.0 * std::sin(angle) + 0.15 * rng.normal();
        }
        return out;
    }
};

struct Checkerboard : DataSampler {
    Tensor sample(Rng& rng, i64 n) const override {
        Tensor out({n, 2});
        for (i64 i = 0; i < n; ++i) {
            // 8 of the 16 unit cells of [-2,2]^2, alternating
            const i64 col = static_cast<i64>(rng.index(4));
            const i64 row2 = static_cast<i64>(rng.index(2));
            const i64 row = 2 * row2 + (col % 2);
            out.at(i, 0) = static_cast<double>(col) - 2.0 + rng.uniform();
            out.at(i, 1) = static_cast<double>(row) - 2.0 + rng.uniform();
        }
        return out;
    }
};

struct Spiral : DataSampler {
    Tensor sample(Rng& rng, i64 n) const override {
        Tensor out({n, 2});
        for (i64 i = 0; i < n; ++i) {
            const double theta = 3.0 * M_PI * std::sqrt(rng.uniform());
            const double radius = 2.0 * theta / (3.0 * M_PI);
            out.at(i, 0) = radius * std::cos(theta) + 0.05 * rng.normal();
            out.at(i, 1) = radius * std::sin(theta) + 0.05 * rng.normal();
        }
        return out;
    }
};

struct SingleDatum : DataSampler {
    Tensor sample(Rng&, i64 n) const override {
        Tensor out({n, 2});
        const Tensor p = single_datum_point();
        for (i64 i = 0; i < n; ++i) {
            out.at(i, 0) = p[0];
            out.at(i, 1) = p[1];
        }
        return out;
    }
};

}  // namespace

Tensor single_datum_point() { return Tensor({1, 2}, {1.0, -0.5}); }

const std::vector<std::string>& task_names() {
    static const std::vector<std::string> names = {"two-moons", "gauss8", "checkerboard", "spiral",
                                                   "single-datum"};
    return names;
}

std::unique_ptr<DataSampler> make_task(const std::string& name) {
    if (name == "two-moons") return std::make_unique<TwoMoons>();
    if (name == "gauss8") return std::make_unique<Gauss8>();
    if (name == "checkerboard") return std::make_unique<Checkerboard>();
    if (name == "spiral") return std::make_unique<Spiral>();
    if (name == "single-datum") return std::make_unique<SingleDatum>();
    std::string valid;
    for (const auto& n : task_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown task '" + name + "' (valid: " + valid + ")");
}

}  // namespace meanflow
