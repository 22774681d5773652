#include "ratrack/ram.hpp"

namespace ratrack {

RamKind ram_kind_from_string(const std::string& s) {
    if (s == "none") return RamKind::none;
    if (s == "tram") return RamKind::tram;
    if (s == "sram") return RamKind::sram;
    if (s == "stram") return RamKind::stram;
    throw ValidationError("unknown alignment kind: '" + s +
                          "' (expected none, tram, sram or stram)");
}

std::string to_string(RamKind kind) {
    switch (kind) {
        case RamKind::none: return "none";
        case RamKind::tram: return "tram";
        case RamKind::sram: return "sram";
        case RamKind::stram: return "stram";
    }
    throw ValidationError("invalid alignment kind");
}

void TrainedRam::validate() const {
    bool need_t = kind == RamKind::tram || kind == RamKind::stram;
    bool need_s = kind == RamKind::sram || kind == RamKind::stram;
    if (need_t != temporal.has_value() || need_s != spatial.has_value())
        throw ValidationError("alignment parameters do not match declared kind");
}

Mat clipped_cosine_matrix(const Mat& a, const Mat& b) {
    if (a.cols() != b.cols())
        throw ValidationError("cosine affinity: feature widths differ");
    return (a * b.transpose()).cwiseMax(0.0);
}

static void check_fusable(const Mat& x, const Mat& y, double coef) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw ValidationError("fusion inputs have different shapes");
    if (!(coef >= 0.0) || coef > 1.0)
        throw ValidationError("fusion coefficient must be in [0, 1]");
}

Mat fuse_temporal(const Mat& raw, const Mat& aligned, double alpha_t) {
    check_fusable(raw, aligned, alpha_t);
    if (alpha_t == 1.0) return raw;
    if (alpha_t == 0.0) return aligned;
    return alpha_t * raw + (1.0 - alpha_t) * aligned;
}

Mat fuse_spatial(const Mat& raw, const Mat& aligned, double alpha_s) {
    check_fusable(raw, aligned, alpha_s);
    if (alpha_s == 1.0) return raw;
    if (alpha_s == 0.0) return aligned;
    return alpha_s * raw + (1.0 - alpha_s) * aligned;
}

Mat fuse_st(const Mat& a_s, const Mat& a_t, double lambda) {
    check_fusable(a_s, a_t, lambda);
    if (lambda == 1.0) return a_s;
    if (lambda == 0.0) return a_t;
    return lambda * a_s + (1.0 - lambda) * a_t;
}

AlignedPair align_pair(const RamParams& p, const Mat& feats_a, Role role_a,
                       const Mat& feats_b, Role role_b) {
    const Eigen::Index na = feats_a.rows();
    const Eigen::Index nb = feats_b.rows();
    MaskedSequence seq;
    seq.features.resize(na + nb, p.dim);
    seq.features.topRows(na) = project(p, feats_a, role_a);
    seq.features.bottomRows(nb) = project(p, feats_b, role_b);
    seq.valid.assign(std::size_t(na + nb), 1);

    Mat out = l2_normalize_rows(encoder_forward(p, seq));
    AlignedPair pair;
    pair.a = out.topRows(na);
    pair.b = out.bottomRows(nb);
    return pair;
}

AlignedPair tram_align(const RamParams& p, std::span<const BBox> humans,
                       std::span<const BBox> trajectories,
                       const FrameSize& frame) {
    return align_pair(p, box_feature_rows(humans, frame), Role::human,
                      box_feature_rows(trajectories, frame), Role::trajectory);
}

AlignedPair sram_align(const RamParams& p, std::span<const BBox> humans,
                       std::span<const BBox> marks, const FrameSize& frame) {
    return align_pair(p, box_feature_rows(humans, frame), Role::human,
                      box_feature_rows(marks, frame), Role::mark);
}

}  // namespace ratrack
