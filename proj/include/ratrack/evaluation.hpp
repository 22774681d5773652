#pragma once

#include <span>
#include <string>
#include <vector>

#include "ratrack/common.hpp"
#include "ratrack/tracking.hpp"

namespace ratrack {

struct MetricsReport {
    double mota = 0.0;
    double idf1 = 0.0;
    double idp = 0.0;
    double idr = 0.0;
    long fp = 0;
    long fn = 0;
    long ids = 0;
    long gt_count = 0;
    int mt = 0;  // gt trajectories tracked >= 80% of their span
    int ml = 0;  // gt trajectories tracked <= 20% of their span
};

// CLEAR protocol: per frame, previous-frame correspondences persist while
// their IoU stays >= iou_gate; the rest are re-matched by Hungarian on IoU.
// An identity switch is counted whenever a gt object's correspondence
// differs from its last known one. MOTA = 1 - (FP+FN+IDS)/GT_count.
// idf1 fields of the result are left zero; use evaluate() for both.
MetricsReport clear_mot(std::span<const Trajectory> gt,
                        std::span<const Trajectory> hyp,
                        double iou_gate = 0.5);

struct IdScores {
    double idf1 = 0.0;
    double idp = 0.0;
    double idr = 0.0;
};

// Identity scores under the optimal global gt<->hyp identity bijection
// (min-cost on ID-FP + ID-FN): IDF1 = 2*IDTP / (2*IDTP + IDFP + IDFN).
IdScores idf1(std::span<const Trajectory> gt, std::span<const Trajectory> hyp,
              double iou_gate = 0.5);

// clear_mot + idf1 merged into one report.
MetricsReport evaluate(std::span<const Trajectory> gt,
                       std::span<const Trajectory> hyp, double iou_gate = 0.5);

// Davies-Bouldin index: mean over clusters of the worst (s_i + s_j) / d_ij
// ratio, Euclidean centroids, mean intra-cluster distance. Lower is tighter.
// Needs >= 2 distinct labels; coincident centroids are an error.
double dbi(const Mat& features, const std::vector<int>& labels);

std::string metrics_csv(const MetricsReport& r);
std::string metrics_table(const MetricsReport& r);

}  // namespace ratrack
