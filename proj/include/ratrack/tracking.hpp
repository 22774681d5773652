#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ratrack/assignment.hpp"
#include "ratrack/geometry.hpp"
#include "ratrack/ram.hpp"

namespace ratrack {

struct Detection {
    int frame = 0;
    BBox box;
    double score = 0.0;  // in [0, 1]
    Vec appearance;      // optional; size 0 when absent
};

struct TrajectoryPoint {
    int frame = 0;
    BBox box;
};

// Matched detection boxes only; frames strictly increase, with gaps where the
// track aged unmatched.
struct Trajectory {
    int id = 0;
    std::vector<TrajectoryPoint> points;
};

// Noise scales follow the SORT family: standard deviations proportional to
// the box height. The factors are configurable so tests can drive the filter
// into near-exact regimes (tiny measurement noise, huge velocity noise).
struct KalmanConfig {
    double pos_weight = 1.0 / 20.0;   // sigma = pos_weight * h for cx,cy,w,h
    double vel_weight = 1.0 / 160.0;  // sigma = vel_weight * h for velocities
    double init_pos_factor = 2.0;
    double init_vel_factor = 10.0;

    void validate() const;
};

// Constant-velocity filter over (cx, cy, w, h) and their velocities.
class KalmanBoxFilter {
public:
    KalmanBoxFilter() = default;
    KalmanBoxFilter(const BBox& box, const KalmanConfig& cfg);

    // Advances one frame; covariance grows by process noise.
    BBox predict();
    void update(const BBox& observed);
    BBox box() const;

private:
    Eigen::Matrix<double, 8, 1> mean_ = Eigen::Matrix<double, 8, 1>::Zero();
    Eigen::Matrix<double, 8, 8> cov_ = Eigen::Matrix<double, 8, 8>::Zero();
    KalmanConfig cfg_;
};

struct FusionCoefficients {
    double alpha_t = 0.2;
    double alpha_s = 0.2;
    double lambda = 0.5;
};

struct StageConfig {
    FusionCoefficients fusion;
    double eps_iou = 0.9;  // match gate on the fused affinity
    bool use_ram = true;
};

struct TrackerConfig {
    double tau_high = 0.6;
    double tau_low = 0.1;
    StageConfig stage1{{0.2, 0.2, 0.5}, 0.9, true};
    StageConfig stage2{{0.3, 0.3, 0.5}, 0.5, true};
    bool two_stage = true;
    // Used instead of stage1/stage2 when two_stage is off; only high-score
    // detections are associated then.
    StageConfig single_stage{{0.3, 0.3, 0.5}, 0.9, true};
    int max_age = 30;
    double min_score_new_track = -1.0;  // < 0 means: use tau_high
    RamKind ram_kind = RamKind::none;
    double mark_area_fraction = 0.6;
    FrameSize frame;
    KalmanConfig kalman;
    // Feed detection appearance vectors (instead of box features) to the
    // temporal alignment and the raw affinity term. Spatial alignment needs
    // box geometry, so this is valid for ram_kind none or tram only.
    bool use_appearance = false;

    double effective_min_score() const {
        return min_score_new_track < 0.0 ? tau_high : min_score_new_track;
    }
    void validate() const;
};

struct Track {
    int id = 0;
    KalmanBoxFilter kalman;
    BBox last_box;
    BBox predicted_box;
    int age_since_update = 0;
    std::vector<TrajectoryPoint> history;
    Vec cached_aligned_human;  // spatially aligned feature from last match
    Vec appearance;            // from last matched detection
};

struct StepResult {
    std::vector<std::pair<int, int>> matches;  // (track id, detection index)
    std::vector<int> spawned_ids;
    std::vector<int> retired_ids;
};

// Two-stage association: high-score detections against all tracks first,
// then low-score detections against the leftovers. Optional alignment
// affinities are fused into the IoU affinity per stage before gating.
class Tracker {
public:
    explicit Tracker(const TrackerConfig& cfg, const TrainedRam* ram = nullptr);

    // All detections must carry `frame`; frames must be fed in order.
    StepResult step(int frame, const std::vector<Detection>& detections);

    // Active + retired, ascending id. Ids are never reused.
    std::vector<Trajectory> trajectories() const;
    const std::vector<Track>& active_tracks() const { return tracks_; }

private:
    struct StageOutcome;
    StageOutcome associate(const std::vector<int>& track_idx,
                           const std::vector<const Detection*>& dets,
                           const StageConfig& stage) const;

    TrackerConfig cfg_;
    const TrainedRam* ram_ = nullptr;
    std::vector<Track> tracks_;
    std::vector<Track> retired_;
    int next_id_ = 1;
    int last_frame_ = 0;
    bool started_ = false;
};

// Folds Tracker::step over the frames; element i is frame first_frame + i
// (empty frames still age the tracks). Detection frame fields must agree.
std::vector<Trajectory> track_sequence(
    const std::vector<std::vector<Detection>>& frames, const TrackerConfig& cfg,
    const TrainedRam* ram = nullptr, int first_frame = 1);

}  // namespace ratrack
