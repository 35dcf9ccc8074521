#pragma once

#include <vector>

#include "tensor.hpp"

namespace meanflow {

constexpr i64 kWassersteinMaxPoints = 4096;

// Exact 2-Wasserstein distance between equal-size point clouds:
// W2 = sqrt( min_assignment mean_i ||a_i - b_sigma(i)||^2 ), solved with an
// O(n^3) shortest-augmenting-path assignment (no entropic approximation).
double wasserstein2(const Tensor& a, const Tensor& b);

// Optimal assignment on a dense square cost matrix (row-major n x n);
// returns column index per row.
std::vector<i64> solve_assignment(const std::vector<double>& cost, i64 n);

}  // namespace meanflow
