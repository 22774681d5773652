#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "doctest.h"
#include "ratrack/assignment.hpp"
#include "ratrack/rng.hpp"

using namespace ratrack;

namespace {

// Exhaustive minimum over all max-cardinality assignments; n!, fine to 7x7.
double brute_force_min(const Mat& c) {
    Eigen::Index n = c.rows(), m = c.cols();
    if (n == 0 || m == 0) return 0.0;
    if (n > m) return brute_force_min(Mat(c.transpose()));
    std::vector<int> cols(static_cast<std::size_t>(m));
    std::iota(cols.begin(), cols.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += c(i, cols[std::size_t(i)]);
        best = std::min(best, s);
    } while (std::next_permutation(cols.begin(), cols.end()));
    return best;
}

void check_partition(const Matching& m, Eigen::Index rows, Eigen::Index cols) {
    std::set<int> rs, cs;
    for (auto [r, cc] : m.pairs) {
        CHECK(rs.insert(r).second);
        CHECK(cs.insert(cc).second);
    }
    for (int r : m.unmatched_rows) CHECK(rs.insert(r).second);
    for (int c : m.unmatched_cols) CHECK(cs.insert(c).second);
    CHECK(rs.size() == std::size_t(rows));
    CHECK(cs.size() == std::size_t(cols));
}

}  // namespace

TEST_CASE("hand-checked minimum cost assignments") {
    Mat one(1, 1);
    one << 0;
    Matching m = solve_min_cost(one);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0] == std::pair<int, int>{0, 0});
    CHECK(m.total_cost == 0.0);

    Mat two(2, 2);
    two << 1, 2, 2, 1;
    m = solve_min_cost(two);
    CHECK(m.pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});
    CHECK(m.total_cost == 2.0);

    Mat three(3, 3);
    three << 4, 1, 3, 2, 0, 5, 3, 2, 2;
    m = solve_min_cost(three);
    CHECK(m.pairs == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}, {2, 2}});
    CHECK(m.total_cost == 5.0);
    CHECK(m.unmatched_rows.empty());
    CHECK(m.unmatched_cols.empty());
}

TEST_CASE("empty and rectangular matrices") {
    Matching m = solve_min_cost(Mat(0, 0));
    CHECK(m.pairs.empty());
    CHECK(m.total_cost == 0.0);

    m = solve_min_cost(Mat(0, 3));
    CHECK(m.pairs.empty());
    CHECK(m.unmatched_cols == std::vector<int>{0, 1, 2});

    Mat wide(2, 3);
    wide << 5, 1, 9, 5, 8, 1;
    m = solve_min_cost(wide);
    CHECK(m.pairs == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
    CHECK(m.total_cost == 2.0);
    CHECK(m.unmatched_rows.empty());
    CHECK(m.unmatched_cols == std::vector<int>{0});

    Mat tall(3, 2);
    tall << 5, 5, 1, 8, 9, 1;
    m = solve_min_cost(tall);
    CHECK(m.pairs == std::vector<std::pair<int, int>>{{1, 0}, {2, 1}});
    CHECK(m.unmatched_rows == std::vector<int>{0});
    CHECK(m.unmatched_cols.empty());
}

TEST_CASE("ties break toward the lowest row, then lowest column") {
    Mat flat(2, 2);
    flat << 1, 1, 1, 1;
    Matching m = solve_min_cost(flat);
    CHECK(m.pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});

    Mat row(1, 3);
    row << 7, 7, 7;
    m = solve_min_cost(row);
    CHECK(m.pairs == std::vector<std::pair<int, int>>{{0, 0}});
}

TEST_CASE("non-finite costs are rejected") {
    Mat bad(1, 2);
    bad << 1.0, std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(solve_min_cost(bad), ValidationError);
    bad(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(solve_min_cost(bad), ValidationError);
}

TEST_CASE("total cost matches exhaustive enumeration on random integer matrices") {
    Rng rng(123);
    for (int trial = 0; trial < 500; ++trial) {
        Eigen::Index n = Eigen::Index(rng.next_below(7)) + 1;
        Eigen::Index m = Eigen::Index(rng.next_below(7)) + 1;
        Mat c(n, m);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                c(i, j) = double(rng.next_below(10));
        Matching got = solve_min_cost(c);
        CHECK(got.total_cost == brute_force_min(c));
        CHECK(got.pairs.size() == std::size_t(std::min(n, m)));
        check_partition(got, n, m);
        double sum = 0.0;
        for (auto [r, cc] : got.pairs) sum += c(r, cc);
        CHECK(sum == got.total_cost);
    }
}

TEST_CASE("real-valued random matrices agree with the oracle within 1e-9") {
    Rng rng(321);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::Index n = Eigen::Index(rng.next_below(6)) + 1;
        Eigen::Index m = Eigen::Index(rng.next_below(6)) + 1;
        Mat c(n, m);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < m; ++j) c(i, j) = rng.uniform(-5, 5);
        CHECK(solve_min_cost(c).total_cost ==
              doctest::Approx(brute_force_min(c)).epsilon(1e-9));
    }
}

TEST_CASE("affinity matching keeps strong pairs and demotes weak ones") {
    Mat a(1, 1);
    a << 1.0;
    Matching m = match_by_affinity(a, 0.5);
    CHECK(m.pairs == std::vector<std::pair<int, int>>{{0, 0}});
    CHECK(m.total_cost == 1.0);

    a << 0.3;
    m = match_by_affinity(a, 0.5);
    CHECK(m.pairs.empty());
    CHECK(m.unmatched_rows == std::vector<int>{0});
    CHECK(m.unmatched_cols == std::vector<int>{0});

    Mat b(2, 2);
    b << 0.9, 0.0, 0.0, 0.2;
    m = match_by_affinity(b, 0.5);
    CHECK(m.pairs == std::vector<std::pair<int, int>>{{0, 0}});
    CHECK(m.unmatched_rows == std::vector<int>{1});
    CHECK(m.unmatched_cols == std::vector<int>{1});
    CHECK(m.total_cost == 0.9);
}

TEST_CASE("zero threshold still rejects zero-affinity pairs") {
    Mat a(2, 2);
    a << 0.5, 0.0, 0.0, 0.0;
    Matching m = match_by_affinity(a, 0.0);
    CHECK(m.pairs == std::vector<std::pair<int, int>>{{0, 0}});
    CHECK(m.unmatched_rows == std::vector<int>{1});

    Mat z(1, 1);
    z << 0.0;
    CHECK(match_by_affinity(z, 0.0).pairs.empty());
}

TEST_CASE("threshold zero keeps every positive-affinity pair") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::Index n = Eigen::Index(rng.next_below(5)) + 1;
        Eigen::Index m = Eigen::Index(rng.next_below(5)) + 1;
        Mat a(n, m);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                a(i, j) = 0.01 + 0.99 * rng.uniform();
        CHECK(match_by_affinity(a, 0.0).pairs.size() ==
              std::size_t(std::min(n, m)));
    }
}

TEST_CASE("raising the threshold never adds pairs") {
    Rng rng(88);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::Index n = Eigen::Index(rng.next_below(6)) + 1;
        Eigen::Index m = Eigen::Index(rng.next_below(6)) + 1;
        Mat a(n, m);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < m; ++j) a(i, j) = rng.uniform();
        std::set<std::pair<int, int>> prev;
        bool first = true;
        for (double thr : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            Matching m2 = match_by_affinity(a, thr);
            std::set<std::pair<int, int>> cur(m2.pairs.begin(), m2.pairs.end());
            if (!first)
                for (const auto& p : cur) CHECK(prev.count(p) == 1);
            prev = std::move(cur);
            first = false;
            check_partition(m2, n, m);
        }
    }
}
