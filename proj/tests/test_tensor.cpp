#include <doctest.h>

#include <cmath>

#include "rng.hpp"
#include "tensor.hpp"

using namespace meanflow;

namespace {

// independent O(n^3) oracle for matmul
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    Tensor c({a.rows(), b.cols()});
    for (i64 i = 0; i < a.rows(); ++i)
        for (i64 j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (i64 k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
            c.at(i, j) = s;
        }
    return c;
}

double rel_err(const Tensor& got, const Tensor& want) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < got.size(); ++i) {
        num += (got[i] - want[i]) * (got[i] - want[i]);
        den += want[i] * want[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace

TEST_CASE("matmul of all-ones 2x3 and 3x1") {
    Tensor a = Tensor::full({2, 3}, 1.0);
    Tensor b = Tensor::full({3, 1}, 1.0);
    Tensor c = matmul(a, b);
    CHECK(c.shape() == std::vector<i64>{2, 1});
    CHECK(c[0] == 3.0);
    CHECK(c[1] == 3.0);
}

TEST_CASE("silu at zero is zero") {
    Tensor x = Tensor::zeros({1, 1});
    CHECK(silu(x)[0] == 0.0);
}

TEST_CASE("matmul chain matches naive triple product") {
    Rng rng(7);
    Tensor a = rng.normal_tensor({8, 8});
    Tensor b = rng.normal_tensor({8, 8});
    Tensor c = rng.normal_tensor({8, 8});
    Tensor got = matmul(matmul(a, b), c);
    Tensor want = naive_matmul(naive_matmul(a, b), c);
    CHECK(rel_err(got, want) < 1e-12);
}

TEST_CASE("shape mismatch names the operation and dims") {
    Tensor a({2, 3});
    Tensor b({2, 3});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("matmul"), InvalidError);
    CHECK_THROWS_WITH_AS(add(Tensor({2, 2}), Tensor({3, 2})), doctest::Contains("add"),
                         InvalidError);
}

TEST_CASE("finiteness check flags NaN and Inf") {
    Tensor t({2, 1});
    t[0] = 1.0;
    CHECK_NOTHROW(t.check_finite("test"));
    t[1] = std::nan("");
    CHECK_THROWS_AS(t.check_finite("test"), NumericError);
    t[1] = INFINITY;
    CHECK_THROWS_AS(t.check_finite("test"), NumericError);
}

TEST_CASE("bias broadcast add") {
    Tensor a = Tensor::full({3, 2}, 1.0);
    Tensor b({1, 2}, {10.0, 20.0});
    Tensor c = add(a, b);
    CHECK(c.at(0, 0) == 11.0);
    CHECK(c.at(2, 1) == 21.0);
}

TEST_CASE("row_sqnorm and row_scale") {
    Tensor a({2, 2}, {3.0, 4.0, 1.0, 2.0});
    Tensor n = row_sqnorm(a);
    CHECK(n[0] == 25.0);
    CHECK(n[1] == 5.0);
    Tensor s({2, 1}, {2.0, -1.0});
    Tensor scaled = row_scale(a, s);
    CHECK(scaled.at(0, 1) == 8.0);
    CHECK(scaled.at(1, 0) == -1.0);
}

TEST_CASE("rng state round-trips") {
    Rng a(123);
    for (int i = 0; i < 100; ++i) a.normal();
    std::string state = a.save_state();
    Rng b;
    b.load_state(state);
    for (int i = 0; i < 50; ++i) CHECK(a.uniform() == b.uniform());
}
