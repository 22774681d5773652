#include "ratrack/contrastive.hpp"

#include <algorithm>
#include <cmath>

#include "ratrack/assignment.hpp"

namespace ratrack {

namespace {

// partner[a] = trusted other-side index for anchor a, or -1 (self-positive).
TripletBatch build_batch(TripletRule rule, TripletSide side, int n_anchor,
                         int n_other, int anchor_base, int other_base,
                         const std::vector<int>& partner) {
    TripletBatch b;
    b.rule = rule;
    b.side = side;
    b.anchors.reserve(std::size_t(n_anchor));
    for (int a = 0; a < n_anchor; ++a) {
        int anchor = anchor_base + a;
        int pos = partner[std::size_t(a)] >= 0
                      ? other_base + partner[std::size_t(a)]
                      : anchor;
        std::vector<int> negs;
        negs.reserve(std::size_t(n_other));
        for (int o = 0; o < n_other; ++o) {
            int idx = other_base + o;
            if (idx != pos) negs.push_back(idx);
        }
        b.anchors.push_back(anchor);
        b.positives.push_back(pos);
        b.negatives.push_back(std::move(negs));
    }
    return b;
}

}  // namespace

TripletBatchPair temporal_triplets(std::span<const BBox> prev,
                                   std::span<const BBox> cur, double eps_iou) {
    const int np = int(prev.size());
    const int nc = int(cur.size());
    Mat m = iou_matrix(prev, cur);
    std::vector<int> cur_of_prev(std::size_t(np), -1);
    std::vector<int> prev_of_cur(std::size_t(nc), -1);
    for (auto [j, i] : solve_min_cost(Mat(1.0 - m.array())).pairs) {
        if (m(j, i) > eps_iou) {
            cur_of_prev[std::size_t(j)] = i;
            prev_of_cur[std::size_t(i)] = j;
        }
    }
    // stacked layout: cur i -> i, prev j -> nc + j
    TripletBatchPair out;
    out.forward = build_batch(TripletRule::temporal, TripletSide::forward,
                              np, nc, nc, 0, cur_of_prev);
    out.backward = build_batch(TripletRule::temporal, TripletSide::backward,
                               nc, np, 0, nc, prev_of_cur);
    return out;
}

TripletBatchPair spatial_triplets(std::span<const BBox> humans,
                                  std::span<const BBox> marks, double eps_ir) {
    const int nh = int(humans.size());
    const int nm = int(marks.size());
    Mat m = ir_matrix(marks, humans);
    std::vector<int> human_of_mark(std::size_t(nm), -1);
    std::vector<int> mark_of_human(std::size_t(nh), -1);
    for (auto [j, i] : solve_min_cost(Mat(1.0 - m.array())).pairs) {
        if (m(j, i) > eps_ir) {
            human_of_mark[std::size_t(j)] = i;
            mark_of_human[std::size_t(i)] = j;
        }
    }
    // stacked layout: human i -> i, mark j -> nh + j
    TripletBatchPair out;
    out.forward = build_batch(TripletRule::spatial, TripletSide::forward,
                              nm, nh, nh, 0, human_of_mark);
    out.backward = build_batch(TripletRule::spatial, TripletSide::backward,
                               nh, nm, 0, nh, mark_of_human);
    return out;
}

InfoNceResult infonce(const Mat& aligned, const TripletBatch& batch, double tau) {
    if (!(tau > 0.0)) throw ValidationError("temperature must be positive");
    if (batch.positives.size() != batch.anchors.size() ||
        batch.negatives.size() != batch.anchors.size())
        throw ValidationError("triplet batch arrays disagree in length");
    const int rows = int(aligned.rows());
    auto check = [rows](int i) {
        if (i < 0 || i >= rows)
            throw ValidationError("triplet index outside aligned matrix");
    };

    InfoNceResult res;
    res.grad = Mat::Zero(aligned.rows(), aligned.cols());
    std::vector<double> ez;
    for (std::size_t t = 0; t < batch.anchors.size(); ++t) {
        const int a = batch.anchors[t];
        const int p = batch.positives[t];
        check(a);
        check(p);
        const auto& negs = batch.negatives[t];
        if (negs.empty()) continue;

        double sp = aligned.row(a).dot(aligned.row(p));
        double z = 0.0;
        ez.assign(negs.size(), 0.0);
        for (std::size_t k = 0; k < negs.size(); ++k) {
            check(negs[k]);
            double sn = aligned.row(a).dot(aligned.row(negs[k]));
            ez[k] = std::exp((sn - sp) / tau);
            z += ez[k];
        }
        res.loss += std::log1p(z);

        const double denom = 1.0 + z;
        // loss = -s_p/tau + logsumexp; softmax weight of the positive is
        // 1/denom, so d loss/d s_p = (1/denom - 1)/tau. Self-positives
        // (p == a) come out right through plain accumulation.
        const double dsp = (1.0 / denom - 1.0) / tau;
        res.grad.row(a) += dsp * aligned.row(p);
        res.grad.row(p) += dsp * aligned.row(a);
        for (std::size_t k = 0; k < negs.size(); ++k) {
            const double dsn = ez[k] / denom / tau;
            res.grad.row(a) += dsn * aligned.row(negs[k]);
            res.grad.row(negs[k]) += dsn * aligned.row(a);
        }
    }
    return res;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ValidationError("epochs must be >= 0");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (!(lr > 0.0)) throw ValidationError("lr must be positive");
    if (lr_decay_epochs < 1) throw ValidationError("lr_decay_epochs must be >= 1");
    if (!(lr_decay > 0.0)) throw ValidationError("lr_decay must be positive");
    if (!(tau > 0.0)) throw ValidationError("temperature must be positive");
    if (eps_iou < 0.0 || eps_iou > 1.0) throw ValidationError("eps_iou must be in [0, 1]");
    if (eps_ir < 0.0 || eps_ir > 1.0) throw ValidationError("eps_ir must be in [0, 1]");
    if (pad_length < 1) throw ValidationError("pad_length must be >= 1");
    if (input_dim < 1 || dim < 1 || heads < 1 || effective_ffn_dim() < 1)
        throw ValidationError("encoder dimensions must be positive");
    if (dim % heads != 0) throw ValidationError("dim must be divisible by heads");
    if (!(mark_area_fraction > 0.0) || mark_area_fraction > 1.0)
        throw ValidationError("mark_area_fraction must be in (0, 1]");
    if (corrupt_positive_rate < 0.0 || corrupt_positive_rate > 1.0)
        throw ValidationError("corrupt_positive_rate must be in [0, 1]");
}

std::string loss_report_csv(const LossReport& report) {
    std::string out = "epoch,L_T,L_S,L_ST\n";
    for (std::size_t i = 0; i < report.epochs.size(); ++i) {
        const auto& e = report.epochs[i];
        out += std::to_string(i + 1);
        out += ',';
        out += format_double(e.l_t);
        out += ',';
        out += format_double(e.l_s);
        out += ',';
        out += format_double(e.l_st);
        out += '\n';
    }
    return out;
}

namespace {

// Replace some positives with a random negative; the displaced positive
// becomes a negative so batch invariants keep holding.
void corrupt_positives(TripletBatch& b, double rate, Rng& rng) {
    for (std::size_t t = 0; t < b.anchors.size(); ++t) {
        auto& negs = b.negatives[t];
        if (negs.empty() || rng.uniform() >= rate) continue;
        std::size_t k = std::size_t(rng.next_below(negs.size()));
        int old_pos = b.positives[t];
        b.positives[t] = negs[k];
        if (old_pos != b.anchors[t])
            negs[k] = old_pos;
        else
            negs.erase(negs.begin() + long(k));
    }
}

struct PaddedSeq {
    MaskedSequence seq;
    int na = 0;
    int nb = 0;
};

// Two streams stacked in front of 2 * pad_each slots; the tail is masked.
// Attention ignores masked slots entirely, so this is equivalent to padding
// each stream separately while keeping triplet indices contiguous.
PaddedSeq build_padded(const RamParams& p, const Mat& fa, Role ra,
                       const Mat& fb, Role rb, int pad_each) {
    PaddedSeq s;
    s.na = int(fa.rows());
    s.nb = int(fb.rows());
    if (s.na > pad_each || s.nb > pad_each)
        throw ValidationError("frame exceeds pad_length boxes");
    const int len = 2 * pad_each;
    s.seq.features = Mat::Zero(len, p.dim);
    s.seq.features.topRows(s.na) = project(p, fa, ra);
    s.seq.features.middleRows(s.na, s.nb) = project(p, fb, rb);
    s.seq.valid.assign(std::size_t(len), 0);
    std::fill(s.seq.valid.begin(), s.seq.valid.begin() + (s.na + s.nb), 1);
    return s;
}

double rule_loss(const RamParams& params, const Mat& fa, Role ra, const Mat& fb,
                 Role rb, const TripletBatchPair& triplets,
                 const TrainConfig& cfg, RamParams* grad) {
    PaddedSeq s = build_padded(params, fa, ra, fb, rb, cfg.pad_length);
    EncoderTape tape;
    Mat out = encoder_forward(params, s.seq, grad ? &tape : nullptr);
    Mat normed = l2_normalize_rows(out);
    InfoNceResult fwd = infonce(normed, triplets.forward, cfg.tau);
    InfoNceResult bwd = infonce(normed, triplets.backward, cfg.tau);
    if (grad) {
        Mat g_out = l2_normalize_rows_backward(out, fwd.grad + bwd.grad);
        Mat g_in = encoder_backward(params, tape, g_out, *grad);
        project_backward(params, fa, ra, g_in.topRows(s.na), *grad);
        project_backward(params, fb, rb, g_in.middleRows(s.na, s.nb), *grad);
    }
    return fwd.loss + bwd.loss;
}

}  // namespace

SampleLoss sample_loss(const RamParams* temporal_params,
                       const RamParams* spatial_params,
                       const std::vector<BBox>* prev,
                       const std::vector<BBox>& cur, const FrameSize& frame,
                       const TrainConfig& cfg, RamParams* temporal_grad,
                       RamParams* spatial_grad, Rng* corrupt_rng) {
    SampleLoss out;
    if (temporal_params && prev) {
        TripletBatchPair trip = temporal_triplets(*prev, cur, cfg.eps_iou);
        if (corrupt_rng && cfg.corrupt_positive_rate > 0.0) {
            corrupt_positives(trip.forward, cfg.corrupt_positive_rate, *corrupt_rng);
            corrupt_positives(trip.backward, cfg.corrupt_positive_rate, *corrupt_rng);
        }
        out.l_t = rule_loss(*temporal_params, box_feature_rows(cur, frame),
                            Role::human, box_feature_rows(*prev, frame),
                            Role::trajectory, trip, cfg, temporal_grad);
    }
    if (spatial_params) {
        std::vector<BBox> marks;
        marks.reserve(cur.size());
        for (const BBox& b : cur) marks.push_back(mark_box(b, cfg.mark_area_fraction));
        TripletBatchPair trip = spatial_triplets(cur, marks, cfg.eps_ir);
        if (corrupt_rng && cfg.corrupt_positive_rate > 0.0) {
            corrupt_positives(trip.forward, cfg.corrupt_positive_rate, *corrupt_rng);
            corrupt_positives(trip.backward, cfg.corrupt_positive_rate, *corrupt_rng);
        }
        out.l_s = rule_loss(*spatial_params, box_feature_rows(cur, frame),
                            Role::human, box_feature_rows(marks, frame),
                            Role::mark, trip, cfg, spatial_grad);
    }
    return out;
}

TrainedRam train_ram(const std::vector<std::vector<BBox>>& frames, RamKind kind,
                     const TrainConfig& cfg, const FrameSize& frame,
                     LossReport* history) {
    cfg.validate();
    if (kind == RamKind::none)
        throw ValidationError("training requires tram, sram or stram");
    if (frames.size() < 2)
        throw ValidationError("training needs at least 2 frames");
    for (const auto& f : frames)
        if (int(f.size()) > cfg.pad_length)
            throw ValidationError("frame exceeds pad_length boxes");

    const bool has_t = kind == RamKind::tram || kind == RamKind::stram;
    const bool has_s = kind == RamKind::sram || kind == RamKind::stram;
    const int ffn = cfg.effective_ffn_dim();

    TrainedRam model;
    model.kind = kind;
    if (has_t)
        model.temporal = RamParams::init(cfg.input_dim, cfg.dim, cfg.heads, ffn,
                                         mix_seed(cfg.seed, 1));
    if (has_s)
        model.spatial = RamParams::init(cfg.input_dim, cfg.dim, cfg.heads, ffn,
                                        mix_seed(cfg.seed, 2));
    if (history) history->epochs.clear();
    if (cfg.epochs == 0) return model;

    Rng shuffle_rng(mix_seed(cfg.seed, 3));
    Rng corrupt_rng(mix_seed(cfg.seed, 4));
    Rng* crng = cfg.corrupt_positive_rate > 0.0 ? &corrupt_rng : nullptr;

    AdamWState st_t, st_s;
    RamParams grad_t, grad_s;
    if (has_t) {
        st_t = AdamWState::zeros_like(*model.temporal);
        grad_t = RamParams::zeros_like(*model.temporal);
    }
    if (has_s) {
        st_s = AdamWState::zeros_like(*model.spatial);
        grad_s = RamParams::zeros_like(*model.spatial);
    }

    // Samples are frame indices; temporal parts pair each frame with its
    // predecessor, so temporal-only training starts at frame 1.
    std::vector<int> samples;
    for (int t = has_s ? 0 : 1; t < int(frames.size()); ++t) samples.push_back(t);

    for (int e = 0; e < cfg.epochs; ++e) {
        AdamWConfig opt;
        opt.lr = cfg.lr * std::pow(cfg.lr_decay, double(e / cfg.lr_decay_epochs));

        std::vector<int> order = samples;
        shuffle_rng.shuffle(order);

        double sum_t = 0.0, sum_s = 0.0;
        long cnt_t = 0, cnt_s = 0;
        int pending = 0;
        auto flush = [&] {
            if (pending == 0) return;
            if (has_t) {
                adamw_step(*model.temporal, grad_t, st_t, opt);
                grad_t.set_zero();
            }
            if (has_s) {
                adamw_step(*model.spatial, grad_s, st_s, opt);
                grad_s.set_zero();
            }
            pending = 0;
        };

        for (int t : order) {
            const std::vector<BBox>* prev =
                (has_t && t >= 1) ? &frames[std::size_t(t - 1)] : nullptr;
            SampleLoss sl = sample_loss(
                has_t ? &*model.temporal : nullptr,
                has_s ? &*model.spatial : nullptr, prev, frames[std::size_t(t)],
                frame, cfg, has_t ? &grad_t : nullptr,
                has_s ? &grad_s : nullptr, crng);
            if (prev) {
                sum_t += sl.l_t;
                ++cnt_t;
            }
            if (has_s) {
                sum_s += sl.l_s;
                ++cnt_s;
            }
            if (++pending == cfg.batch_size) flush();
        }
        flush();

        if (history) {
            EpochLoss el;
            el.l_t = cnt_t > 0 ? sum_t / double(cnt_t) : 0.0;
            el.l_s = cnt_s > 0 ? sum_s / double(cnt_s) : 0.0;
            el.l_st = el.l_t + el.l_s;
            history->epochs.push_back(el);
        }
    }
    return model;
}

}  // namespace ratrack
