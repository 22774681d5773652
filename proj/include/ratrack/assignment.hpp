#pragma once

#include <utility>
#include <vector>

#include "ratrack/common.hpp"

namespace ratrack {

struct Matching {
    std::vector<std::pair<int, int>> pairs;  // (row, col), ascending by row
    std::vector<int> unmatched_rows;
    std::vector<int> unmatched_cols;
    double total_cost = 0.0;  // sum of cost entries over pairs
};

// Minimum-cost assignment of min(rows, cols) pairs (Hungarian algorithm with
// potentials, O(n^2 m)). Deterministic: ties are broken toward the lowest row
// index, then the lowest column index, on every platform. Non-finite entries
// are rejected.
Matching solve_min_cost(const Mat& cost);

// Maximizes total affinity via solve_min_cost on (1 - affinity), then demotes
// weak pairs to unmatched: pairs with affinity < min_affinity, or with
// affinity <= 0 when min_affinity is 0 (a zero-affinity pair is never a
// match). total_cost is the summed affinity of the surviving pairs.
Matching match_by_affinity(const Mat& affinity, double min_affinity);

}  // namespace ratrack
