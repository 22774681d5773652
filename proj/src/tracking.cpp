#include "ratrack/tracking.hpp"

#include <algorithm>
#include <cmath>

namespace ratrack {

namespace {

using Mat8 = Eigen::Matrix<double, 8, 8>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Vec4 = Eigen::Matrix<double, 4, 1>;

Vec4 box_to_measurement(const BBox& b) {
    return {b.cx(), b.cy(), b.w, b.h};
}

BBox measurement_to_box(const Vec4& m) {
    return {m(0) - 0.5 * m(2), m(1) - 0.5 * m(3), m(2), m(3)};
}

}  // namespace

void KalmanConfig::validate() const {
    if (!(pos_weight > 0.0) || !(vel_weight > 0.0) ||
        !(init_pos_factor > 0.0) || !(init_vel_factor > 0.0))
        throw ValidationError("kalman noise weights must be positive");
}

KalmanBoxFilter::KalmanBoxFilter(const BBox& box, const KalmanConfig& cfg)
    : cfg_(cfg) {
    cfg_.validate();
    Vec4 z = box_to_measurement(box);
    mean_.head<4>() = z;
    double sp = cfg_.init_pos_factor * cfg_.pos_weight * box.h;
    double sv = cfg_.init_vel_factor * cfg_.vel_weight * box.h;
    for (int i = 0; i < 4; ++i) {
        cov_(i, i) = sp * sp;
        cov_(i + 4, i + 4) = sv * sv;
    }
}

BBox KalmanBoxFilter::predict() {
    Mat8 f = Mat8::Identity();
    for (int i = 0; i < 4; ++i) f(i, i + 4) = 1.0;

    double h = mean_(3);
    double qp = cfg_.pos_weight * h;
    double qv = cfg_.vel_weight * h;
    Mat8 q = Mat8::Zero();
    for (int i = 0; i < 4; ++i) {
        q(i, i) = qp * qp;
        q(i + 4, i + 4) = qv * qv;
    }

    mean_ = f * mean_;
    cov_ = f * cov_ * f.transpose() + q;
    return box();
}

void KalmanBoxFilter::update(const BBox& observed) {
    Eigen::Matrix<double, 4, 8> hm = Eigen::Matrix<double, 4, 8>::Zero();
    hm.leftCols<4>() = Mat4::Identity();

    double rh = cfg_.pos_weight * mean_(3);
    Mat4 r = (rh * rh) * Mat4::Identity();

    Mat4 s = hm * cov_ * hm.transpose() + r;
    Eigen::Matrix<double, 8, 4> k =
        cov_ * hm.transpose() * s.llt().solve(Mat4::Identity());
    Vec4 innovation = box_to_measurement(observed) - hm * mean_;
    mean_ += k * innovation;
    cov_ = (Mat8::Identity() - k * hm) * cov_;
}

BBox KalmanBoxFilter::box() const {
    return measurement_to_box(mean_.head<4>());
}

void TrackerConfig::validate() const {
    if (!(tau_low >= 0.0) || !(tau_low < tau_high) || !(tau_high <= 1.0))
        throw ValidationError("need 0 <= tau_low < tau_high <= 1");
    for (const StageConfig* s : {&stage1, &stage2, &single_stage}) {
        if (!(s->fusion.alpha_t > 0.0) || s->fusion.alpha_t > 1.0 ||
            !(s->fusion.alpha_s > 0.0) || s->fusion.alpha_s > 1.0)
            throw ValidationError("fusion alphas must be in (0, 1]");
        if (s->fusion.lambda < 0.0 || s->fusion.lambda > 1.0)
            throw ValidationError("lambda must be in [0, 1]");
        if (s->eps_iou < 0.0 || s->eps_iou > 1.0)
            throw ValidationError("match gate must be in [0, 1]");
    }
    if (max_age < 0) throw ValidationError("max_age must be >= 0");
    double ms = effective_min_score();
    if (ms < 0.0 || ms > 1.0)
        throw ValidationError("min_score_new_track must be in [0, 1]");
    if (!(mark_area_fraction > 0.0) || mark_area_fraction > 1.0)
        throw ValidationError("mark_area_fraction must be in (0, 1]");
    if (!(frame.width > 0.0) || !(frame.height > 0.0))
        throw ValidationError("frame size must be positive");
    kalman.validate();
    if (use_appearance &&
        (ram_kind == RamKind::sram || ram_kind == RamKind::stram))
        throw ValidationError(
            "appearance features cannot drive spatial alignment (marks need "
            "box geometry); use ram_kind none or tram");
}

Tracker::Tracker(const TrackerConfig& cfg, const TrainedRam* ram)
    : cfg_(cfg), ram_(ram) {
    cfg_.validate();
    RamKind have = ram_ ? ram_->kind : RamKind::none;
    if (ram_) ram_->validate();
    if (have != cfg_.ram_kind)
        throw ValidationError("configured ram_kind does not match the "
                              "supplied alignment parameters");
    if (ram_ && !cfg_.use_appearance) {
        const RamParams& any =
            ram_->temporal ? *ram_->temporal : *ram_->spatial;
        if (any.input_dim != 4)
            throw ValidationError("model expects feature width " +
                                  std::to_string(any.input_dim) +
                                  " but box features are 4-dimensional");
    }
}

struct Tracker::StageOutcome {
    Matching matching;       // rows = candidate tracks, cols = dets
    Mat aligned_human_rows;  // spatially aligned det features (may be empty)
};

Tracker::StageOutcome Tracker::associate(
    const std::vector<int>& track_idx,
    const std::vector<const Detection*>& dets, const StageConfig& stage) const {
    StageOutcome out;
    const std::size_t nt = track_idx.size();
    const std::size_t nd = dets.size();

    std::vector<BBox> det_boxes;
    det_boxes.reserve(nd);
    for (const Detection* d : dets) det_boxes.push_back(d->box);

    const bool has_spatial =
        ram_ && (ram_->kind == RamKind::sram || ram_->kind == RamKind::stram);
    const bool has_temporal =
        ram_ && (ram_->kind == RamKind::tram || ram_->kind == RamKind::stram);

    // Spatial alignment of this stage's detections; needed for cache refresh
    // even when the stage itself fuses nothing.
    if (has_spatial && nd > 0) {
        std::vector<BBox> marks;
        marks.reserve(nd);
        for (const BBox& b : det_boxes)
            marks.push_back(mark_box(b, cfg_.mark_area_fraction));
        out.aligned_human_rows =
            sram_align(*ram_->spatial, det_boxes, marks, cfg_.frame).a;
    }

    if (nt == 0 || nd == 0) {
        Mat empty(nt, nd);
        out.matching = match_by_affinity(empty, stage.eps_iou);
        return out;
    }

    Mat det_app, track_app;
    if (cfg_.use_appearance) {
        for (const Detection* d : dets)
            if (d->appearance.size() == 0)
                throw ValidationError("appearance mode: detection without "
                                      "appearance vector");
        det_app.resize(Eigen::Index(nd), dets[0]->appearance.size());
        for (std::size_t j = 0; j < nd; ++j) {
            if (dets[j]->appearance.size() != det_app.cols())
                throw ValidationError("appearance vectors differ in size");
            det_app.row(Eigen::Index(j)) = dets[j]->appearance.transpose();
        }
        track_app = Mat::Zero(Eigen::Index(nt), det_app.cols());
        for (std::size_t i = 0; i < nt; ++i) {
            const Vec& a = tracks_[std::size_t(track_idx[i])].appearance;
            if (a.size() == det_app.cols())
                track_app.row(Eigen::Index(i)) = a.transpose();
        }
    }

    std::vector<BBox> pred_boxes;
    pred_boxes.reserve(nt);
    for (int ti : track_idx)
        pred_boxes.push_back(tracks_[std::size_t(ti)].predicted_box);

    // Raw affinity: IoU for box features, clipped cosine for appearance.
    Mat raw = cfg_.use_appearance
                  ? clipped_cosine_matrix(l2_normalize_rows(track_app),
                                          l2_normalize_rows(det_app))
                  : iou_matrix(pred_boxes, det_boxes);

    Mat fused = raw;
    if (stage.use_ram && ram_) {
        Mat a_t, a_s;
        if (has_temporal) {
            AlignedPair ap =
                cfg_.use_appearance
                    ? align_pair(*ram_->temporal, det_app, Role::human,
                                 track_app, Role::trajectory)
                    : tram_align(*ram_->temporal, det_boxes, pred_boxes,
                                 cfg_.frame);
            a_t = clipped_cosine_matrix(ap.b, ap.a);  // rows=tracks, cols=dets
        }
        if (has_spatial) {
            Mat cached = Mat::Zero(Eigen::Index(nt), ram_->spatial->dim);
            for (std::size_t i = 0; i < nt; ++i) {
                const Vec& c = tracks_[std::size_t(track_idx[i])].cached_aligned_human;
                if (c.size() == cached.cols())
                    cached.row(Eigen::Index(i)) = c.transpose();
            }
            a_s = clipped_cosine_matrix(cached, out.aligned_human_rows);
        }
        switch (ram_->kind) {
            case RamKind::tram:
                fused = fuse_temporal(raw, a_t, stage.fusion.alpha_t);
                break;
            case RamKind::sram:
                fused = fuse_spatial(raw, a_s, stage.fusion.alpha_s);
                break;
            case RamKind::stram:
                fused = fuse_st(fuse_spatial(raw, a_s, stage.fusion.alpha_s),
                                fuse_temporal(raw, a_t, stage.fusion.alpha_t),
                                stage.fusion.lambda);
                break;
            case RamKind::none:
                break;
        }
    }

    out.matching = match_by_affinity(fused, stage.eps_iou);
    return out;
}

StepResult Tracker::step(int frame, const std::vector<Detection>& detections) {
    if (started_ && frame <= last_frame_)
        throw ValidationError("frames must be fed in increasing order");
    for (const Detection& d : detections) {
        if (d.frame != frame)
            throw ValidationError("mixed-frame detections in one step");
        if (d.score < 0.0 || d.score > 1.0)
            throw ValidationError("detection score outside [0, 1]");
    }
    started_ = true;
    last_frame_ = frame;

    for (Track& t : tracks_) t.predicted_box = t.kalman.predict();

    std::vector<const Detection*> high, low;
    for (const Detection& d : detections) {
        if (d.score >= cfg_.tau_high)
            high.push_back(&d);
        else if (d.score >= cfg_.tau_low)
            low.push_back(&d);
    }

    StepResult result;
    std::vector<char> track_matched(tracks_.size(), 0);
    std::vector<char> high_matched(high.size(), 0);

    auto apply = [&](const std::vector<int>& track_idx,
                     const std::vector<const Detection*>& dets,
                     const StageOutcome& oc, std::vector<char>* det_matched) {
        for (auto [r, c] : oc.matching.pairs) {
            Track& t = tracks_[std::size_t(track_idx[std::size_t(r)])];
            const Detection& d = *dets[std::size_t(c)];
            t.kalman.update(d.box);
            t.last_box = d.box;
            t.age_since_update = 0;
            t.history.push_back({frame, d.box});
            if (oc.aligned_human_rows.rows() > 0)
                t.cached_aligned_human = oc.aligned_human_rows.row(c).transpose();
            if (d.appearance.size() > 0) t.appearance = d.appearance;
            track_matched[std::size_t(track_idx[std::size_t(r)])] = 1;
            if (det_matched) (*det_matched)[std::size_t(c)] = 1;
            result.matches.emplace_back(t.id, int(&d - detections.data()));
        }
    };

    std::vector<int> all_tracks(tracks_.size());
    for (std::size_t i = 0; i < tracks_.size(); ++i) all_tracks[i] = int(i);

    const StageConfig& first_stage = cfg_.two_stage ? cfg_.stage1 : cfg_.single_stage;
    StageOutcome oc1 = associate(all_tracks, high, first_stage);
    apply(all_tracks, high, oc1, &high_matched);

    if (cfg_.two_stage) {
        std::vector<int> rest;
        for (std::size_t i = 0; i < tracks_.size(); ++i)
            if (!track_matched[i]) rest.push_back(int(i));
        StageOutcome oc2 = associate(rest, low, cfg_.stage2);
        apply(rest, low, oc2, nullptr);
    }

    // New tracks from unmatched high-score detections.
    for (std::size_t j = 0; j < high.size(); ++j) {
        if (high_matched[j]) continue;
        const Detection& d = *high[j];
        if (d.score < cfg_.effective_min_score()) continue;
        Track t;
        t.id = next_id_++;
        t.kalman = KalmanBoxFilter(d.box, cfg_.kalman);
        t.last_box = d.box;
        t.predicted_box = d.box;
        t.history.push_back({frame, d.box});
        if (oc1.aligned_human_rows.rows() > 0)
            t.cached_aligned_human =
                oc1.aligned_human_rows.row(Eigen::Index(j)).transpose();
        if (d.appearance.size() > 0) t.appearance = d.appearance;
        result.spawned_ids.push_back(t.id);
        track_matched.push_back(1);
        tracks_.push_back(std::move(t));
    }

    // Age the unmatched, retire the stale.
    std::vector<Track> alive;
    alive.reserve(tracks_.size());
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        Track& t = tracks_[i];
        if (!track_matched[i]) t.age_since_update += 1;
        if (t.age_since_update > cfg_.max_age) {
            result.retired_ids.push_back(t.id);
            retired_.push_back(std::move(t));
        } else {
            alive.push_back(std::move(t));
        }
    }
    tracks_ = std::move(alive);
    return result;
}

std::vector<Trajectory> Tracker::trajectories() const {
    std::vector<Trajectory> out;
    out.reserve(retired_.size() + tracks_.size());
    for (const auto* set : {&retired_, &tracks_}) {
        for (const Track& t : *set) {
            Trajectory tr;
            tr.id = t.id;
            tr.points = t.history;
            out.push_back(std::move(tr));
        }
    }
    std::sort(out.begin(), out.end(),
              [](const Trajectory& a, const Trajectory& b) { return a.id < b.id; });
    return out;
}

std::vector<Trajectory> track_sequence(
    const std::vector<std::vector<Detection>>& frames, const TrackerConfig& cfg,
    const TrainedRam* ram, int first_frame) {
    Tracker tracker(cfg, ram);
    for (std::size_t i = 0; i < frames.size(); ++i)
        tracker.step(first_frame + int(i), frames[i]);
    return tracker.trajectories();
}

}  // namespace ratrack
