#include "wasserstein.hpp"

#include <cmath>
#include <limits>

namespace meanflow {

// Jonker-Volgenant style shortest augmenting path with dual potentials.
std::vector<i64> solve_assignment(const std::vector<double>& cost, i64 n) {
    if (n < 1) throw InvalidError("assignment: empty instance");
    if (cost.size() != static_cast<size_t>(n) * static_cast<size_t>(n))
        throw InvalidError("assignment: cost matrix is not n x n");
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
    std::vector<i64> match(static_cast<size_t>(n) + 1, 0);  // match[col] = row (1-based)
    std::vector<i64> way(static_cast<size_t>(n) + 1, 0);

    for (i64 row = 1; row <= n; ++row) {
        match[0] = row;
        i64 j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<size_t>(n) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const i64 i0 = match[static_cast<size_t>(j0)];
            double delta = inf;
            i64 j1 = -1;
            for (i64 j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = cost[static_cast<size_t>(i0 - 1) * n + (j - 1)] -
                                   u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (i64 j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<size_t>(j0)] != 0);
        do {
            const i64 j1 = way[static_cast<size_t>(j0)];
            match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<i64> row_to_col(static_cast<size_t>(n), -1);
    for (i64 j = 1; j <= n; ++j) row_to_col[static_cast<size_t>(match[static_cast<size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

double wasserstein2(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
        throw InvalidError("wasserstein2: point clouds must share dimension, got " +
                           a.shape_str() + " vs " + b.shape_str());
    if (a.rows() != b.rows())
        throw InvalidError("wasserstein2: sample counts differ (" + std::to_string(a.rows()) +
                           " vs " + std::to_string(b.rows()) + ")");
    const i64 n = a.rows();
    if (n > kWassersteinMaxPoints)
        throw InvalidError("wasserstein2: " + std::to_string(n) + " points exceeds the exact cap " +
                           std::to_string(kWassersteinMaxPoints) + "; subsample first");

    std::vector<double> cost(static_cast<size_t>(n) * static_cast<size_t>(n));
    for (i64 i = 0; i < n; ++i)
        for (i64 j = 0; j < n; ++j) {
            double s = 0.0;
            for (i64 d = 0; d < a.cols(); ++d) {
                const double diff = a.at(i, d) - b.at(j, d);
                s += diff * diff;
            }
            cost[static_cast<size_t>(i) * n + j] = s;
        }

    const std::vector<i64> assign = solve_assignment(cost, n);
    double total = 0.0;
    for (i64 i = 0; i < n; ++i) total += cost[static_cast<size_t>(i) * n + assign[static_cast<size_t>(i)]];
    return std::sqrt(total / static_cast<double>(n));
}

}  // namespace meanflow
