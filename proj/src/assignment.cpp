#include "ratrack/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ratrack {

namespace {

// Hungarian algorithm with row/column potentials, 1-indexed internally.
// Requires rows <= cols; returns col_of_row. Scanning columns in ascending
// order with strict '<' updates gives the lowest-index tie-bias.
std::vector<int> hungarian(const Mat& a) {
    const int n = int(a.rows());
    const int m = int(a.cols());
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    std::vector<char> used(m + 1, 0);

    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            int i0 = p[j0];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> col_of_row(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] != 0) col_of_row[p[j] - 1] = j - 1;
    return col_of_row;
}

}  // namespace

Matching solve_min_cost(const Mat& cost) {
    if (!cost.allFinite()) {
        throw ValidationError("assignment cost matrix has non-finite entries");
    }
    const int n = int(cost.rows());
    const int m = int(cost.cols());

    Matching out;
    if (n == 0 || m == 0) {
        for (int i = 0; i < n; ++i) out.unmatched_rows.push_back(i);
        for (int j = 0; j < m; ++j) out.unmatched_cols.push_back(j);
        return out;
    }

    std::vector<int> col_of_row;
    if (n <= m) {
        col_of_row = hungarian(cost);
    } else {
        std::vector<int> row_of_col = hungarian(cost.transpose());
        col_of_row.assign(n, -1);
        for (int j = 0; j < m; ++j)
            if (row_of_col[j] >= 0) col_of_row[row_of_col[j]] = j;
    }

    std::vector<char> col_used(m, 0);
    for (int i = 0; i < n; ++i) {
        int j = col_of_row[i];
        if (j >= 0) {
            out.pairs.emplace_back(i, j);
            out.total_cost += cost(i, j);
            col_used[j] = 1;
        } else {
            out.unmatched_rows.push_back(i);
        }
    }
    for (int j = 0; j < m; ++j)
        if (!col_used[j]) out.unmatched_cols.push_back(j);
    return out;
}

Matching match_by_affinity(const Mat& affinity, double min_affinity) {
    if (!affinity.allFinite()) {
        throw ValidationError("affinity matrix has non-finite entries");
    }
    Matching raw = solve_min_cost(Mat(1.0 - affinity.array()));

    Matching out;
    out.unmatched_cols = raw.unmatched_cols;
    out.unmatched_rows = raw.unmatched_rows;
    for (auto [i, j] : raw.pairs) {
        double a = affinity(i, j);
        bool keep = min_affinity > 0.0 ? a >= min_affinity : a > 0.0;
        if (keep) {
            out.pairs.emplace_back(i, j);
            out.total_cost += a;
        } else {
            out.unmatched_rows.push_back(i);
            out.unmatched_cols.push_back(j);
        }
    }
    std::sort(out.unmatched_rows.begin(), out.unmatched_rows.end());
    std::sort(out.unmatched_cols.begin(), out.unmatched_cols.end());
    return out;
}

}  // namespace ratrack
