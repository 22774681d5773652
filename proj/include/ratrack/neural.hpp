#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ratrack/common.hpp"

namespace ratrack {

// Which input projection a feature row goes through before entering the
// encoder. Box features use the same 4-d layout for every role; separate
// projections let the encoder tell roles apart without positional encoding.
enum class Role { human, mark, trajectory };

// Fixed-length slot sequence; rows beyond the real inputs carry valid = 0 and
// are excluded from attention, produce zero output rows and zero gradients.
struct MaskedSequence {
    Mat features;             // L x D
    std::vector<char> valid;  // length L
};

// One shared-dimension encoder layer plus the three role projections.
// Biases and layer-norm vectors are stored 1 x N so every parameter is a Mat
// and can be visited uniformly (init, optimizer, serialization, flattening).
struct RamParams {
    int input_dim = 4;
    int dim = 128;
    int heads = 8;
    int ffn_dim = 512;
    std::uint64_t revision = 0;  // bumped on every optimizer step

    Mat w_human, b_human;
    Mat w_mark, b_mark;
    Mat w_traj, b_traj;
    Mat wq, bq, wk, bk, wv, bv, wo, bo;
    Mat w_ffn1, b_ffn1;
    Mat w_ffn2, b_ffn2;
    Mat ln1_scale, ln1_shift;
    Mat ln2_scale, ln2_shift;

    // Affine maps draw uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) elementwise
    // from the seed; layer-norm starts at scale 1, shift 0.
    static RamParams init(int input_dim, int dim, int heads, int ffn_dim,
                          std::uint64_t seed);
    static RamParams zeros(int input_dim, int dim, int heads, int ffn_dim);
    static RamParams zeros_like(const RamParams& shape);

    struct Field {
        const char* name;
        Mat RamParams::* member;
    };
    // Fixed traversal order shared by init, AdamW, serialization and the
    // finite-difference flattening in tests.
    static const std::vector<Field>& fields();

    std::vector<Mat*> tensors();
    std::vector<const Mat*> tensors() const;
    bool same_shape(const RamParams& other) const;
    void set_zero();
};

// feats (N x input_dim) -> N x dim through the projection for `role`.
Mat project(const RamParams& p, const Mat& feats, Role role);
// Accumulates projection gradients for grad_rows flowing into projected rows.
void project_backward(const RamParams& p, const Mat& feats, Role role,
                      const Mat& grad_rows, RamParams& grad);

// Intermediates recorded by encoder_forward for the exact backward pass.
struct EncoderTape {
    std::uint64_t params_revision = 0;
    MaskedSequence input;
    Mat q, k, v;
    std::vector<Mat> attn;  // per head, L x L, zero weight on masked keys
    Mat attn_concat;
    Mat res1;
    Mat ln1_xhat;
    Vec ln1_inv_std;
    Mat z;  // ln1 output
    Mat ffn_pre;
    Mat ffn_act;
    Mat res2;
    Mat ln2_xhat;
    Vec ln2_inv_std;
};

// Single pre-projected sequence through multi-head attention + FFN with
// residual connections and post-norm. Invalid rows come out exactly zero.
// Valid rows are permutation-equivariant: there is no positional signal.
Mat encoder_forward(const RamParams& p, const MaskedSequence& seq,
                    EncoderTape* tape = nullptr);

// Exact reverse-mode gradients. Accumulates parameter gradients into `grad`
// (callers zero it when they want fresh values) and returns the gradient with
// respect to the projected input rows. Throws if the tape predates an
// optimizer step on `p`.
Mat encoder_backward(const RamParams& p, const EncoderTape& tape,
                     const Mat& grad_out, RamParams& grad);

// Row-wise L2 normalization; zero rows stay zero.
Mat l2_normalize_rows(const Mat& x);
// Gradient of l2_normalize_rows at input x given upstream grad g.
Mat l2_normalize_rows_backward(const Mat& x, const Mat& g);

struct AdamWConfig {
    double lr = 2e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

// First and second moment buffers parallel to RamParams::fields().
struct AdamWState {
    std::vector<Mat> m, v;
    long step = 0;

    static AdamWState zeros_like(const RamParams& shape);
};

// Decoupled weight decay: with zero gradients a parameter shrinks
// geometrically by (1 - lr * weight_decay) per step.
void adamw_step(RamParams& params, const RamParams& grad, AdamWState& state,
                const AdamWConfig& cfg);

}  // namespace ratrack
