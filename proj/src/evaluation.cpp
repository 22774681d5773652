#include "ratrack/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "ratrack/assignment.hpp"

namespace ratrack {

namespace {

struct FrameBox {
    int id;
    BBox box;
};

// frame -> boxes sorted by id; rejects duplicate (id, frame) pairs.
std::map<int, std::vector<FrameBox>> by_frame(std::span<const Trajectory> trs,
                                              const char* what) {
    std::map<int, std::vector<FrameBox>> out;
    for (const Trajectory& t : trs)
        for (const TrajectoryPoint& p : t.points)
            out[p.frame].push_back({t.id, p.box});
    for (auto& [frame, boxes] : out) {
        std::sort(boxes.begin(), boxes.end(),
                  [](const FrameBox& a, const FrameBox& b) { return a.id < b.id; });
        for (std::size_t i = 1; i < boxes.size(); ++i)
            if (boxes[i].id == boxes[i - 1].id)
                throw ValidationError(std::string(what) + ": duplicate id " +
                                      std::to_string(boxes[i].id) + " in frame " +
                                      std::to_string(frame));
    }
    return out;
}

}  // namespace

MetricsReport clear_mot(std::span<const Trajectory> gt,
                        std::span<const Trajectory> hyp, double iou_gate) {
    if (!(iou_gate > 0.0) || iou_gate > 1.0)
        throw ValidationError("iou_gate must be in (0, 1]");
    auto gt_frames = by_frame(gt, "gt");
    auto hyp_frames = by_frame(hyp, "hyp");

    long gt_count = 0;
    for (const auto& [f, boxes] : gt_frames) gt_count += long(boxes.size());
    if (gt_count == 0) throw ValidationError("ground truth has no boxes");

    std::set<int> frames;
    for (const auto& [f, b] : gt_frames) frames.insert(f);
    for (const auto& [f, b] : hyp_frames) frames.insert(f);

    MetricsReport rep;
    rep.gt_count = gt_count;
    std::map<int, int> last_known;                 // gt id -> last hyp id
    std::vector<std::pair<int, int>> prev_pairs;   // matched (gt, hyp) last frame
    std::map<int, long> gt_total, gt_matched;      // per gt id, for MT/ML

    static const std::vector<FrameBox> kNone;
    for (int f : frames) {
        auto git = gt_frames.find(f);
        auto hit = hyp_frames.find(f);
        const auto& g = git != gt_frames.end() ? git->second : kNone;
        const auto& h = hit != hyp_frames.end() ? hit->second : kNone;
        for (const FrameBox& b : g) gt_total[b.id] += 1;

        auto find_box = [](const std::vector<FrameBox>& v, int id) -> const BBox* {
            for (const FrameBox& b : v)
                if (b.id == id) return &b.box;
            return nullptr;
        };

        // Correspondence persistence: keep last frame's pairs that still gate.
        std::vector<std::pair<int, int>> pairs;
        std::set<int> used_gt, used_hyp;
        for (auto [gid, hid] : prev_pairs) {
            const BBox* gb = find_box(g, gid);
            const BBox* hb = find_box(h, hid);
            if (gb && hb && iou(*gb, *hb) >= iou_gate) {
                pairs.emplace_back(gid, hid);
                used_gt.insert(gid);
                used_hyp.insert(hid);
            }
        }

        // Hungarian over the rest, max IoU, gated.
        std::vector<const FrameBox*> gr, hr;
        for (const FrameBox& b : g)
            if (!used_gt.count(b.id)) gr.push_back(&b);
        for (const FrameBox& b : h)
            if (!used_hyp.count(b.id)) hr.push_back(&b);
        Mat aff(gr.size(), hr.size());
        for (std::size_t i = 0; i < gr.size(); ++i)
            for (std::size_t j = 0; j < hr.size(); ++j)
                aff(Eigen::Index(i), Eigen::Index(j)) = iou(gr[i]->box, hr[j]->box);
        for (auto [i, j] : match_by_affinity(aff, iou_gate).pairs) {
            int gid = gr[std::size_t(i)]->id;
            int hid = hr[std::size_t(j)]->id;
            auto known = last_known.find(gid);
            if (known != last_known.end() && known->second != hid) rep.ids += 1;
            pairs.emplace_back(gid, hid);
        }

        for (auto [gid, hid] : pairs) {
            last_known[gid] = hid;
            gt_matched[gid] += 1;
        }
        rep.fp += long(h.size()) - long(pairs.size());
        rep.fn += long(g.size()) - long(pairs.size());
        std::sort(pairs.begin(), pairs.end());
        prev_pairs = std::move(pairs);
    }

    for (const auto& [gid, total] : gt_total) {
        double ratio = double(gt_matched[gid]) / double(total);
        if (ratio >= 0.8) rep.mt += 1;
        if (ratio <= 0.2) rep.ml += 1;
    }
    rep.mota = 1.0 - double(rep.fp + rep.fn + rep.ids) / double(gt_count);
    return rep;
}

IdScores idf1(std::span<const Trajectory> gt, std::span<const Trajectory> hyp,
              double iou_gate) {
    if (!(iou_gate > 0.0) || iou_gate > 1.0)
        throw ValidationError("iou_gate must be in (0, 1]");
    auto gt_frames = by_frame(gt, "gt");
    auto hyp_frames = by_frame(hyp, "hyp");

    std::map<int, long> gt_len, hyp_len;
    for (const auto& [f, boxes] : gt_frames)
        for (const FrameBox& b : boxes) gt_len[b.id] += 1;
    for (const auto& [f, boxes] : hyp_frames)
        for (const FrameBox& b : boxes) hyp_len[b.id] += 1;

    std::vector<int> gids, hids;
    for (const auto& [id, n] : gt_len) gids.push_back(id);
    for (const auto& [id, n] : hyp_len) hids.push_back(id);
    const int ng = int(gids.size());
    const int nh = int(hids.size());
    long total_gt = 0, total_hyp = 0;
    for (const auto& [id, n] : gt_len) total_gt += n;
    for (const auto& [id, n] : hyp_len) total_hyp += n;
    if (total_gt == 0) throw ValidationError("ground truth has no boxes");
    if (total_hyp == 0) return {0.0, 0.0, 0.0};

    std::map<int, int> gpos, hpos;
    for (int i = 0; i < ng; ++i) gpos[gids[std::size_t(i)]] = i;
    for (int j = 0; j < nh; ++j) hpos[hids[std::size_t(j)]] = j;

    // overlap[g][h] = frames where the identities' boxes gate on IoU
    Mat overlap = Mat::Zero(ng, nh);
    for (const auto& [f, gboxes] : gt_frames) {
        auto hit = hyp_frames.find(f);
        if (hit == hyp_frames.end()) continue;
        for (const FrameBox& gb : gboxes)
            for (const FrameBox& hb : hit->second)
                if (iou(gb.box, hb.box) >= iou_gate)
                    overlap(gpos[gb.id], hpos[hb.id]) += 1.0;
    }

    // Square cost matrix with per-identity dummies (Ristani protocol): a
    // real pairing costs its ID-FN + ID-FP, a dummy costs the identity's
    // whole length; forbidden cells get a cost no optimum can afford.
    const int n = ng + nh;
    const double forbidden = double(total_gt + total_hyp + 1);
    Mat cost(n, n);
    cost.setConstant(forbidden);
    for (int i = 0; i < ng; ++i)
        for (int j = 0; j < nh; ++j)
            cost(i, j) = double(gt_len[gids[std::size_t(i)]]) +
                         double(hyp_len[hids[std::size_t(j)]]) -
                         2.0 * overlap(i, j);
    for (int i = 0; i < ng; ++i)
        cost(i, nh + i) = double(gt_len[gids[std::size_t(i)]]);
    for (int j = 0; j < nh; ++j)
        cost(ng + j, j) = double(hyp_len[hids[std::size_t(j)]]);
    cost.block(ng, nh, nh, ng).setZero();

    double idtp = 0.0;
    for (auto [i, j] : solve_min_cost(cost).pairs)
        if (i < ng && j < nh) idtp += overlap(i, j);

    IdScores s;
    double idfp = double(total_hyp) - idtp;
    double idfn = double(total_gt) - idtp;
    s.idp = idtp + idfp > 0.0 ? idtp / (idtp + idfp) : 0.0;
    s.idr = idtp + idfn > 0.0 ? idtp / (idtp + idfn) : 0.0;
    s.idf1 = 2.0 * idtp / (2.0 * idtp + idfp + idfn);
    return s;
}

MetricsReport evaluate(std::span<const Trajectory> gt,
                       std::span<const Trajectory> hyp, double iou_gate) {
    MetricsReport rep = clear_mot(gt, hyp, iou_gate);
    IdScores s = idf1(gt, hyp, iou_gate);
    rep.idf1 = s.idf1;
    rep.idp = s.idp;
    rep.idr = s.idr;
    return rep;
}

double dbi(const Mat& features, const std::vector<int>& labels) {
    if (std::size_t(features.rows()) != labels.size())
        throw ValidationError("feature rows and labels differ in length");
    std::map<int, std::vector<Eigen::Index>> groups;
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        groups[labels[std::size_t(i)]].push_back(i);
    const int k = int(groups.size());
    if (k < 2) throw ValidationError("need at least 2 clusters");

    Mat centroids(k, features.cols());
    Vec spread(k);
    int idx = 0;
    for (const auto& [label, rows] : groups) {
        Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(features.cols());
        for (Eigen::Index r : rows) c += features.row(r);
        c /= double(rows.size());
        double s = 0.0;
        for (Eigen::Index r : rows) s += (features.row(r) - c).norm();
        centroids.row(idx) = c;
        spread(idx) = s / double(rows.size());
        ++idx;
    }

    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        double worst = 0.0;
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            double d = (centroids.row(i) - centroids.row(j)).norm();
            if (d == 0.0)
                throw ValidationError("coincident cluster centroids");
            worst = std::max(worst, (spread(i) + spread(j)) / d);
        }
        sum += worst;
    }
    return sum / double(k);
}

std::string metrics_csv(const MetricsReport& r) {
    std::string out = "MOTA,IDF1,IDP,IDR,FP,FN,IDS,GT,MT,ML\n";
    out += format_double(r.mota) + ',' + format_double(r.idf1) + ',' +
           format_double(r.idp) + ',' + format_double(r.idr) + ',' +
           std::to_string(r.fp) + ',' + std::to_string(r.fn) + ',' +
           std::to_string(r.ids) + ',' + std::to_string(r.gt_count) + ',' +
           std::to_string(r.mt) + ',' + std::to_string(r.ml) + '\n';
    return out;
}

std::string metrics_table(const MetricsReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%-6s %-6s %-6s %-6s %6s %6s %5s %7s %4s %4s\n"
                  "%-6.4f %-6.4f %-6.4f %-6.4f %6ld %6ld %5ld %7ld %4d %4d\n",
                  "MOTA", "IDF1", "IDP", "IDR", "FP", "FN", "IDS", "GT", "MT",
                  "ML", r.mota, r.idf1, r.idp, r.idr, r.fp, r.fn, r.ids,
                  r.gt_count, r.mt, r.ml);
    return buf;
}

}  // namespace ratrack
