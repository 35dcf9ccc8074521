#include "tensor.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <sstream>

namespace meanflow {

namespace {

size_t shape_numel(const std::vector<i64>& shape) {
    size_t n = 1;
    for (i64 d : shape) {
        if (d <= 0) throw InvalidError("tensor: non-positive dimension in shape");
        n *= static_cast<size_t>(d);
    }
    return shape.empty() ? 0 : n;
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
    throw InvalidError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                       b.shape_str());
}

using MatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutMatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

Tensor::Tensor(std::vector<i64> shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {
    if (rank() > 2) throw InvalidError("tensor: rank > 2 is not supported");
}

Tensor::Tensor(std::vector<i64> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (rank() > 2) throw InvalidError("tensor: rank > 2 is not supported");
    if (shape_numel(shape_) != data_.size())
        throw InvalidError("tensor: shape " + shape_str() + " does not match data length " +
                           std::to_string(data_.size()));
}

Tensor Tensor::full(std::vector<i64> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

double Tensor::value() const {
    if (size() != 1) throw InvalidError("tensor: value() on non-scalar of shape " + shape_str());
    return data_[0];
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << "]";
    return os.str();
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::check_finite(const char* context) const {
    if (!all_finite()) throw NumericError(std::string("non-finite values in ") + context);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) shape_fail("matmul", a, b);
    Tensor out({a.rows(), b.cols()});
    MatMap ma(a.data(), a.rows(), a.cols());
    MatMap mb(b.data(), b.rows(), b.cols());
    MutMatMap mo(out.data(), out.rows(), out.cols());
    mo.noalias() = ma * mb;
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.same_shape(b)) {
        Tensor out = a;
        for (size_t i = 0; i < out.size(); ++i) out[i] += b[i];
        return out;
    }
    // bias broadcast: {B,K} + {1,K}
    if (a.rank() == 2 && b.rank() == 2 && b.rows() == 1 && b.cols() == a.cols()) {
        Tensor out = a;
        const i64 k = a.cols();
        for (i64 i = 0; i < a.rows(); ++i)
            for (i64 j = 0; j < k; ++j) out.at(i, j) += b[static_cast<size_t>(j)];
        return out;
    }
    shape_fail("add", a, b);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_fail("sub", a, b);
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_fail("mul", a, b);
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= c;
    return out;
}

Tensor add_scalar(const Tensor& a, double c) {
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] += c;
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows()) shape_fail("concat", a, b);
    Tensor out({a.rows(), a.cols() + b.cols()});
    for (i64 i = 0; i < a.rows(); ++i) {
        for (i64 j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j);
        for (i64 j = 0; j < b.cols(); ++j) out.at(i, a.cols() + j) = b.at(i, j);
    }
    return out;
}

Tensor silu(const Tensor& a) {
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) {
        const double x = out[i];
        out[i] = x / (1.0 + std::exp(-x));
    }
    return out;
}

Tensor sin_of(const Tensor& a) {
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::sin(out[i]);
    return out;
}

Tensor cos_of(const Tensor& a) {
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::cos(out[i]);
    return out;
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i];
    return Tensor::scalar(s);
}

Tensor mean_all(const Tensor& a) {
    if (a.empty()) throw InvalidError("mean: empty tensor");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i];
    return Tensor::scalar(s / static_cast<double>(a.size()));
}

Tensor row_sqnorm(const Tensor& a) {
    if (a.rank() != 2) throw InvalidError("row_sqnorm: rank-2 input required, got " + a.shape_str());
    Tensor out({a.rows(), 1});
    for (i64 i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (i64 j = 0; j < a.cols(); ++j) {
            const double v = a.at(i, j);
            s += v * v;
        }
        out[static_cast<size_t>(i)] = s;
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw InvalidError("transpose: rank-2 input required, got " + a.shape_str());
    Tensor out({a.cols(), a.rows()});
    for (i64 i = 0; i < a.rows(); ++i)
        for (i64 j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor col_sum(const Tensor& a) {
    if (a.rank() != 2) throw InvalidError("col_sum: rank-2 input required, got " + a.shape_str());
    Tensor out({1, a.cols()});
    for (i64 i = 0; i < a.rows(); ++i)
        for (i64 j = 0; j < a.cols(); ++j) out[static_cast<size_t>(j)] += a.at(i, j);
    return out;
}

Tensor row_scale(const Tensor& a, const Tensor& s) {
    if (a.rank() != 2 || s.rank() != 2 || s.cols() != 1 || s.rows() != a.rows())
        shape_fail("row_scale", a, s);
    Tensor out = a;
    for (i64 i = 0; i < a.rows(); ++i) {
        const double c = s[static_cast<size_t>(i)];
        for (i64 j = 0; j < a.cols(); ++j) out.at(i, j) *= c;
    }
    return out;
}

double dot_flat(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) shape_fail("dot_flat", a, b);
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace meanflow
