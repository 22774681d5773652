#include "ratrack/scenario.hpp"

#include <cmath>
#include <numbers>

#include "ratrack/common.hpp"
#include "ratrack/rng.hpp"

namespace ratrack {

void ScenarioSpec::validate() const {
    if (n_objects < 0) throw ValidationError("n_objects must be >= 0");
    if (n_frames < 1) throw ValidationError("n_frames must be >= 1");
    if (!(frame.width > 0) || !(frame.height > 0))
        throw ValidationError("frame size must be positive");
    if (!(speed_min >= 0) || !(speed_max >= speed_min))
        throw ValidationError("speed range must satisfy 0 <= min <= max");
    if (!(direction_change_prob >= 0) || !(direction_change_prob <= 1))
        throw ValidationError("direction_change_prob must be in [0,1]");
    if (!(size_min > 0) || !(size_max >= size_min))
        throw ValidationError("size range must satisfy 0 < min <= max");
    if (size_max > frame.width || size_max > frame.height)
        throw ValidationError("size_max must fit inside the frame");
    if (!(dropout >= 0) || !(dropout <= 1))
        throw ValidationError("dropout must be in [0,1]");
    if (!(coord_noise >= 0)) throw ValidationError("coord_noise must be >= 0");
    if (!(clutter_rate >= 0)) throw ValidationError("clutter_rate must be >= 0");
    auto score_range = [](double lo, double hi, const char* what) {
        if (!(lo >= 0) || !(hi >= lo) || !(hi <= 1))
            throw ValidationError(std::string(what) + " score range must satisfy 0 <= min <= max <= 1");
    };
    score_range(matched_score_min, matched_score_max, "matched");
    score_range(clutter_score_min, clutter_score_max, "clutter");
    if (!(occlusion_iou > 0) || !(occlusion_iou <= 1))
        throw ValidationError("occlusion_iou must be in (0,1]");
    if (!(occlusion_factor >= 1))
        throw ValidationError("occlusion_factor must be >= 1");
}

namespace {

struct MovingBox {
    double cx, cy, w, h;
    double speed;
    double vx, vy;

    BBox box() const { return {cx - w / 2, cy - h / 2, w, h}; }
};

// Reflect a center coordinate into [lo, hi] mirroring the matching velocity
// component. Walk steps are a few px, so one bounce is the common case; the
// loop just guards degenerate ranges.
void reflect(double& c, double& v, double lo, double hi) {
    if (lo >= hi) {  // box as wide as the frame: pin to the only legal spot
        c = (lo + hi) / 2;
        v = 0;
        return;
    }
    while (c < lo || c > hi) {
        if (c < lo) {
            c = 2 * lo - c;
            v = -v;
        } else {
            c = 2 * hi - c;
            v = -v;
        }
    }
}

}  // namespace

Scenario generate_scenario(const ScenarioSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const double two_pi = 2 * std::numbers::pi;

    std::vector<MovingBox> objs(static_cast<std::size_t>(spec.n_objects));
    for (auto& o : objs) {
        o.w = rng.uniform(spec.size_min, spec.size_max);
        o.h = rng.uniform(spec.size_min, spec.size_max);
        o.cx = rng.uniform(o.w / 2, spec.frame.width - o.w / 2);
        o.cy = rng.uniform(o.h / 2, spec.frame.height - o.h / 2);
        o.speed = rng.uniform(spec.speed_min, spec.speed_max);
        double angle = rng.uniform(0.0, two_pi);
        o.vx = o.speed * std::cos(angle);
        o.vy = o.speed * std::sin(angle);
    }

    Scenario out;
    out.gt.resize(objs.size());
    for (std::size_t i = 0; i < objs.size(); ++i) out.gt[i].id = static_cast<int>(i) + 1;

    for (int f = 1; f <= spec.n_frames; ++f) {
        std::vector<BBox> boxes(objs.size());
        for (std::size_t i = 0; i < objs.size(); ++i) {
            boxes[i] = objs[i].box();
            out.gt[i].points.push_back({f, boxes[i]});
        }

        // An object overlapped from behind is more likely to be missed. The
        // lower box of an overlapping pair is the occluded one; ties fall to
        // the higher index so the outcome never depends on float quirks.
        std::vector<char> occluded(objs.size(), 0);
        for (std::size_t i = 0; i < objs.size(); ++i)
            for (std::size_t j = 0; j < objs.size(); ++j) {
                if (i == j || iou(boxes[i], boxes[j]) <= spec.occlusion_iou) continue;
                if (boxes[i].bottom() > boxes[j].bottom() ||
                    (boxes[i].bottom() == boxes[j].bottom() && i > j))
                    occluded[i] = 1;
            }

        auto& dets = out.detections[f];
        for (std::size_t i = 0; i < objs.size(); ++i) {
            double p = spec.dropout * (occluded[i] ? spec.occlusion_factor : 1.0);
            if (rng.uniform() < std::min(p, 1.0)) continue;
            BBox b = boxes[i];
            if (spec.coord_noise > 0) {
                b.x += spec.coord_noise * rng.normal();
                b.y += spec.coord_noise * rng.normal();
                b.w = std::max(1.0, b.w + spec.coord_noise * rng.normal());
                b.h = std::max(1.0, b.h + spec.coord_noise * rng.normal());
            }
            double score = rng.uniform(spec.matched_score_min, spec.matched_score_max);
            dets.push_back({f, b, score, {}});
        }
        int n_clutter = spec.clutter_rate > 0 ? rng.poisson(spec.clutter_rate) : 0;
        for (int c = 0; c < n_clutter; ++c) {
            double w = rng.uniform(spec.size_min, spec.size_max);
            double h = rng.uniform(spec.size_min, spec.size_max);
            double cx = rng.uniform(w / 2, spec.frame.width - w / 2);
            double cy = rng.uniform(h / 2, spec.frame.height - h / 2);
            double score = rng.uniform(spec.clutter_score_min, spec.clutter_score_max);
            dets.push_back({f, {cx - w / 2, cy - h / 2, w, h}, score, {}});
        }

        for (auto& o : objs) {
            if (rng.uniform() < spec.direction_change_prob) {
                double angle = rng.uniform(0.0, two_pi);
                o.vx = o.speed * std::cos(angle);
                o.vy = o.speed * std::sin(angle);
            }
            o.cx += o.vx;
            o.cy += o.vy;
            reflect(o.cx, o.vx, o.w / 2, spec.frame.width - o.w / 2);
            reflect(o.cy, o.vy, o.h / 2, spec.frame.height - o.h / 2);
        }
    }
    return out;
}

}  // namespace ratrack
