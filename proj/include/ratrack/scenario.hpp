#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "ratrack/geometry.hpp"
#include "ratrack/tracking.hpp"

namespace ratrack {

// Synthetic random-walk scene. Everything is drawn from one seeded stream in
// a fixed order, so a spec maps to exactly one output on every platform.
struct ScenarioSpec {
    int n_objects = 16;
    int n_frames = 300;
    FrameSize frame;
    double speed_min = 1.0;  // px/frame
    double speed_max = 3.0;
    double direction_change_prob = 0.05;  // per object per frame
    double size_min = 40.0;  // box sides, constant per object
    double size_max = 120.0;
    double dropout = 0.1;      // detection miss probability
    double coord_noise = 1.0;  // Gaussian sigma on x, y, w, h (px)
    double clutter_rate = 0.5;  // Poisson false positives per frame
    double matched_score_min = 0.6;
    double matched_score_max = 1.0;
    double clutter_score_min = 0.1;
    double clutter_score_max = 0.6;
    // Occlusion model: overlapping the same spot makes the lower (larger
    // bottom edge) box's dropout probability grow by this factor.
    double occlusion_iou = 0.3;
    double occlusion_factor = 3.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Scenario {
    std::vector<Trajectory> gt;  // ids 1..n_objects, one point per frame
    std::map<int, std::vector<Detection>> detections;
};

Scenario generate_scenario(const ScenarioSpec& spec);

}  // namespace ratrack
