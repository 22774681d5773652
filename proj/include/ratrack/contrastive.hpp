#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ratrack/geometry.hpp"
#include "ratrack/neural.hpp"
#include "ratrack/ram.hpp"
#include "ratrack/rng.hpp"

namespace ratrack {

enum class TripletRule { temporal, spatial };
enum class TripletSide { forward, backward };

// Anchor/positive/negative indices address rows of the stacked sequence the
// batch was generated for: first stream rows 0..|A|-1, second stream rows
// |A|..|A|+|B|-1. Padding rows never appear. positives[i] == anchors[i]
// marks a self-positive (no trusted counterpart).
struct TripletBatch {
    TripletRule rule = TripletRule::temporal;
    TripletSide side = TripletSide::forward;
    std::vector<int> anchors;
    std::vector<int> positives;
    std::vector<std::vector<int>> negatives;
};

struct TripletBatchPair {
    TripletBatch forward;
    TripletBatch backward;
};

// Matches prev and cur boxes by Hungarian assignment on IoU; a pair counts
// only when its IoU strictly exceeds eps_iou, otherwise the anchor falls back
// to itself and every box on the other side is a negative. Stacked layout:
// cur box i -> i, prev box j -> |cur| + j. Forward anchors are prev boxes,
// backward anchors are cur boxes.
TripletBatchPair temporal_triplets(std::span<const BBox> prev,
                                   std::span<const BBox> cur, double eps_iou);

// Same construction on intersection rate between marks and humans (strict
// > eps_ir). Stacked layout: human i -> i, mark j -> |humans| + j. Forward
// anchors are marks, backward anchors are humans.
TripletBatchPair spatial_triplets(std::span<const BBox> humans,
                                  std::span<const BBox> marks, double eps_ir);

struct InfoNceResult {
    double loss = 0.0;
    Mat grad;  // same shape as `aligned`
};

// Sum over anchors of -log( e^{s_ap/tau} / (e^{s_ap/tau} + sum_n e^{s_an/tau}) )
// where s_xy is the dot product of rows x and y of `aligned`; exact gradient
// w.r.t. every row. Anchors with no negatives contribute zero.
InfoNceResult infonce(const Mat& aligned, const TripletBatch& batch, double tau);

struct TrainConfig {
    int epochs = 50;
    int batch_size = 5;  // samples per optimizer step, losses summed
    double lr = 2e-3;
    int lr_decay_epochs = 10;
    double lr_decay = 0.1;
    double tau = 0.1;
    double eps_iou = 0.9;  // temporal triplet gate
    double eps_ir = 0.0;   // spatial triplet gate
    int pad_length = 110;  // per-stream slot count
    std::uint64_t seed = 0;
    int input_dim = 4;
    int dim = 128;
    int heads = 8;
    int ffn_dim = 0;  // 0 -> 4 * dim
    double mark_area_fraction = 0.6;
    double corrupt_positive_rate = 0.0;  // label-noise robustness experiments

    int effective_ffn_dim() const { return ffn_dim > 0 ? ffn_dim : 4 * dim; }
    void validate() const;
};

struct EpochLoss {
    double l_t = 0.0;
    double l_s = 0.0;
    double l_st = 0.0;
};

// Per-epoch averages: l_t over frame pairs, l_s over frames, l_st their sum.
struct LossReport {
    std::vector<EpochLoss> epochs;
};

// CSV with header "epoch,L_T,L_S,L_ST", 1-based epoch numbers.
std::string loss_report_csv(const LossReport& report);

struct SampleLoss {
    double l_t = 0.0;
    double l_s = 0.0;
};

// One training sample: the spatial loss of `cur` (when spatial params are
// given) plus the temporal loss of (prev, cur) (when temporal params and a
// previous frame are given). Sequences are padded to 2 * cfg.pad_length slots
// with the two streams stacked in front. When gradient accumulators are
// passed, exact parameter gradients are added into them. corrupt_rng enables
// random positive corruption at cfg.corrupt_positive_rate.
SampleLoss sample_loss(const RamParams* temporal_params,
                       const RamParams* spatial_params,
                       const std::vector<BBox>* prev,
                       const std::vector<BBox>& cur, const FrameSize& frame,
                       const TrainConfig& cfg, RamParams* temporal_grad,
                       RamParams* spatial_grad, Rng* corrupt_rng = nullptr);

// Full training loop: shuffled samples, summed-loss batches, AdamW with the
// step schedule lr * decay^(epoch / decay_epochs). STRAM trains its two
// encoders on their respective losses in lockstep. Deterministic in cfg.seed.
TrainedRam train_ram(const std::vector<std::vector<BBox>>& frames,
                     RamKind kind, const TrainConfig& cfg,
                     const FrameSize& frame, LossReport* history);

}  // namespace ratrack
