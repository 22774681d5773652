#pragma once

#include <optional>
#include <string>

#include "ratrack/geometry.hpp"
#include "ratrack/neural.hpp"

namespace ratrack {

enum class RamKind { none, tram, sram, stram };

// Alignment encoders by kind: tram carries temporal only, sram spatial only,
// stram both (independent parameter sets, including input projections).
struct TrainedRam {
    RamKind kind = RamKind::none;
    std::optional<RamParams> temporal;
    std::optional<RamParams> spatial;

    void validate() const;
};

RamKind ram_kind_from_string(const std::string& s);
std::string to_string(RamKind kind);

// Entry (i, j) = max(0, a_i . b_j). Rows are expected unit-norm or zero, so
// entries land in [0, 1]; zero rows give zero affinity.
Mat clipped_cosine_matrix(const Mat& a, const Mat& b);

// alpha * raw + (1 - alpha) * aligned, elementwise. alpha = 1 returns raw
// bit-for-bit, alpha = 0 returns aligned bit-for-bit.
Mat fuse_temporal(const Mat& raw, const Mat& aligned, double alpha_t);
Mat fuse_spatial(const Mat& raw, const Mat& aligned, double alpha_s);

// lambda * spatial + (1 - lambda) * temporal.
Mat fuse_st(const Mat& a_s, const Mat& a_t, double lambda);

struct AlignedPair {
    Mat a;  // one aligned row per input row of the first stream
    Mat b;
};

// Stacks role-projected features [a; b] into one fully-valid sequence, runs
// the shared encoder so the two streams attend to each other, then splits and
// L2-normalizes the output rows. Either stream may be empty.
AlignedPair align_pair(const RamParams& p, const Mat& feats_a, Role role_a,
                       const Mat& feats_b, Role role_b);

// Temporal alignment of current detections against track representations.
AlignedPair tram_align(const RamParams& p, std::span<const BBox> humans,
                       std::span<const BBox> trajectories,
                       const FrameSize& frame);

// Spatial alignment of detections against their center marks.
AlignedPair sram_align(const RamParams& p, std::span<const BBox> humans,
                       std::span<const BBox> marks, const FrameSize& frame);

}  // namespace ratrack
