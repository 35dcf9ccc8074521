#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace meanflow {

using i64 = std::int64_t;

// Dense row-major tensor of doubles. Immutable by convention once handed to
// the tape; all operations return fresh values. Rank 1 and 2 are supported,
// which covers batches (B x D), parameters (in x out / 1 x out), per-row
// columns (B x 1) and flat vectors.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<i64> shape);  // zero-filled
    Tensor(std::vector<i64> shape, std::vector<double> data);

    static Tensor zeros(std::vector<i64> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<i64> shape, double value);
    static Tensor scalar(double value) { return Tensor({1, 1}, {value}); }

    const std::vector<i64>& shape() const { return shape_; }
    i64 rank() const { return static_cast<i64>(shape_.size()); }
    i64 rows() const { return shape_.empty() ? 0 : shape_[0]; }
    i64 cols() const { return rank() == 2 ? shape_[1] : 1; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }
    double& at(i64 i, i64 j) { return data_[static_cast<size_t>(i) * cols() + j]; }
    double at(i64 i, i64 j) const { return data_[static_cast<size_t>(i) * cols() + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double value() const;  // single-element tensors only

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    bool all_finite() const;
    // Throws NumericError naming `context` if any element is NaN/Inf.
    void check_finite(const char* context) const;

private:
    std::vector<i64> shape_;
    std::vector<double> data_;
};

// ---- kernels -------------------------------------------------------------
// Shape violations throw InvalidError naming the operation and dims.

Tensor matmul(const Tensor& a, const Tensor& b);
// Equal shapes, or b of shape {1,K} broadcast across rows of a {B,K}.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor silu(const Tensor& a);
Tensor sin_of(const Tensor& a);
Tensor cos_of(const Tensor& a);
Tensor sum_all(const Tensor& a);   // {1,1}
Tensor mean_all(const Tensor& a);  // {1,1}
Tensor row_sqnorm(const Tensor& a);  // {B,K} -> {B,1}, sum of squares per row
Tensor transpose(const Tensor& a);
Tensor col_sum(const Tensor& a);  // {B,K} -> {1,K}

// {B,K} scaled per row by column s {B,1}. Plain helper (not a tape op).
Tensor row_scale(const Tensor& a, const Tensor& s);

double dot_flat(const Tensor& a, const Tensor& b);

}  // namespace meanflow
