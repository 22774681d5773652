#include "ratrack/neural.hpp"

#include <cmath>
#include <cstring>

#include "ratrack/rng.hpp"

namespace ratrack {

namespace {

constexpr double kLnEps = 1e-5;

// Softmax over valid key columns only; rows with no valid key become zero.
Mat masked_softmax_rows(const Mat& s, const std::vector<char>& valid) {
    Mat a = Mat::Zero(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < s.cols(); ++j)
            if (valid[std::size_t(j)] && s(i, j) > mx) mx = s(i, j);
        if (!std::isfinite(mx)) continue;
        double sum = 0.0;
        for (Eigen::Index j = 0; j < s.cols(); ++j) {
            if (!valid[std::size_t(j)]) continue;
            double e = std::exp(s(i, j) - mx);
            a(i, j) = e;
            sum += e;
        }
        a.row(i) /= sum;
    }
    return a;
}

Mat layer_norm_rows(const Mat& x, const Mat& scale, const Mat& shift,
                    Mat& xhat, Vec& inv_std) {
    const Eigen::Index n = x.cols();
    xhat.resize(x.rows(), n);
    inv_std.resize(x.rows());
    Mat out(x.rows(), n);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double mu = x.row(i).mean();
        double var = (x.row(i).array() - mu).square().sum() / double(n);
        double is = 1.0 / std::sqrt(var + kLnEps);
        inv_std(i) = is;
        xhat.row(i) = (x.row(i).array() - mu) * is;
        out.row(i) = xhat.row(i).cwiseProduct(scale.row(0)) + shift.row(0);
    }
    return out;
}

// dy -> dx for layer_norm_rows; accumulates scale/shift gradients.
Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& inv_std,
                        const Mat& scale, Mat& dscale, Mat& dshift) {
    dscale.row(0) += dy.cwiseProduct(xhat).colwise().sum();
    dshift.row(0) += dy.colwise().sum();
    Mat dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        Eigen::RowVectorXd dxhat = dy.row(i).cwiseProduct(scale.row(0));
        double m1 = dxhat.mean();
        double m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
        dx.row(i) = inv_std(i) * (dxhat.array() - m1 - xhat.row(i).array() * m2);
    }
    return dx;
}

}  // namespace

const std::vector<RamParams::Field>& RamParams::fields() {
    static const std::vector<Field> f = {
        {"w_human", &RamParams::w_human}, {"b_human", &RamParams::b_human},
        {"w_mark", &RamParams::w_mark},   {"b_mark", &RamParams::b_mark},
        {"w_traj", &RamParams::w_traj},   {"b_traj", &RamParams::b_traj},
        {"wq", &RamParams::wq},           {"bq", &RamParams::bq},
        {"wk", &RamParams::wk},           {"bk", &RamParams::bk},
        {"wv", &RamParams::wv},           {"bv", &RamParams::bv},
        {"wo", &RamParams::wo},           {"bo", &RamParams::bo},
        {"w_ffn1", &RamParams::w_ffn1},   {"b_ffn1", &RamParams::b_ffn1},
        {"w_ffn2", &RamParams::w_ffn2},   {"b_ffn2", &RamParams::b_ffn2},
        {"ln1_scale", &RamParams::ln1_scale}, {"ln1_shift", &RamParams::ln1_shift},
        {"ln2_scale", &RamParams::ln2_scale}, {"ln2_shift", &RamParams::ln2_shift},
    };
    return f;
}

static void allocate(RamParams& p) {
    p.w_human.resize(p.input_dim, p.dim);
    p.w_mark.resize(p.input_dim, p.dim);
    p.w_traj.resize(p.input_dim, p.dim);
    for (Mat* w : {&p.wq, &p.wk, &p.wv, &p.wo}) w->resize(p.dim, p.dim);
    p.w_ffn1.resize(p.dim, p.ffn_dim);
    p.w_ffn2.resize(p.ffn_dim, p.dim);
    p.b_ffn1.resize(1, p.ffn_dim);
    for (Mat* b : {&p.b_human, &p.b_mark, &p.b_traj, &p.bq, &p.bk, &p.bv,
                   &p.bo, &p.b_ffn2, &p.ln1_scale, &p.ln1_shift, &p.ln2_scale,
                   &p.ln2_shift})
        b->resize(1, p.dim);
}

RamParams RamParams::init(int input_dim, int dim, int heads, int ffn_dim,
                          std::uint64_t seed) {
    if (input_dim <= 0 || dim <= 0 || heads <= 0 || ffn_dim <= 0)
        throw ValidationError("encoder dimensions must be positive");
    if (dim % heads != 0)
        throw ValidationError("dim must be divisible by heads");
    RamParams p;
    p.input_dim = input_dim;
    p.dim = dim;
    p.heads = heads;
    p.ffn_dim = ffn_dim;
    allocate(p);

    Rng rng(seed);
    double bound = 0.0;  // biases reuse the preceding weight's fan-in
    for (const auto& f : fields()) {
        Mat& t = p.*(f.member);
        if (std::strncmp(f.name, "ln", 2) == 0) {
            bool is_scale = std::strstr(f.name, "scale") != nullptr;
            t.setConstant(is_scale ? 1.0 : 0.0);
            continue;
        }
        if (f.name[0] == 'w') bound = std::sqrt(1.0 / double(t.rows()));
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c)
                t(r, c) = rng.uniform(-bound, bound);
    }
    return p;
}

RamParams RamParams::zeros(int input_dim, int dim, int heads, int ffn_dim) {
    if (input_dim <= 0 || dim <= 0 || heads <= 0 || ffn_dim <= 0)
        throw ValidationError("encoder dimensions must be positive");
    if (dim % heads != 0)
        throw ValidationError("dim must be divisible by heads");
    RamParams p;
    p.input_dim = input_dim;
    p.dim = dim;
    p.heads = heads;
    p.ffn_dim = ffn_dim;
    allocate(p);
    p.set_zero();
    return p;
}

RamParams RamParams::zeros_like(const RamParams& shape) {
    return zeros(shape.input_dim, shape.dim, shape.heads, shape.ffn_dim);
}

std::vector<Mat*> RamParams::tensors() {
    std::vector<Mat*> out;
    out.reserve(fields().size());
    for (const auto& f : fields()) out.push_back(&(this->*(f.member)));
    return out;
}

std::vector<const Mat*> RamParams::tensors() const {
    std::vector<const Mat*> out;
    out.reserve(fields().size());
    for (const auto& f : fields()) out.push_back(&(this->*(f.member)));
    return out;
}

bool RamParams::same_shape(const RamParams& other) const {
    if (input_dim != other.input_dim || dim != other.dim ||
        heads != other.heads || ffn_dim != other.ffn_dim)
        return false;
    auto a = tensors();
    auto b = other.tensors();
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols())
            return false;
    return true;
}

void RamParams::set_zero() {
    for (Mat* t : tensors()) t->setZero();
}

static void role_maps(RamParams& p, Role role, Mat*& w, Mat*& b) {
    switch (role) {
        case Role::human: w = &p.w_human; b = &p.b_human; break;
        case Role::mark: w = &p.w_mark; b = &p.b_mark; break;
        case Role::trajectory: w = &p.w_traj; b = &p.b_traj; break;
    }
}

Mat project(const RamParams& p, const Mat& feats, Role role) {
    if (feats.cols() != p.input_dim)
        throw ValidationError("feature width does not match encoder input_dim");
    Mat* w = nullptr;
    Mat* b = nullptr;
    role_maps(const_cast<RamParams&>(p), role, w, b);
    return (feats * *w).rowwise() + b->row(0);
}

void project_backward(const RamParams& p, const Mat& feats, Role role,
                      const Mat& grad_rows, RamParams& grad) {
    if (feats.rows() != grad_rows.rows() || grad_rows.cols() != p.dim)
        throw ValidationError("projection gradient shape mismatch");
    Mat* w = nullptr;
    Mat* b = nullptr;
    role_maps(grad, role, w, b);
    *w += feats.transpose() * grad_rows;
    b->row(0) += grad_rows.colwise().sum();
}

Mat encoder_forward(const RamParams& p, const MaskedSequence& seq,
                    EncoderTape* tape) {
    const Eigen::Index L = seq.features.rows();
    if (seq.features.cols() != p.dim)
        throw ValidationError("sequence width does not match encoder dim");
    if (Eigen::Index(seq.valid.size()) != L)
        throw ValidationError("valid mask length does not match sequence");
    if (p.dim % p.heads != 0)
        throw ValidationError("dim must be divisible by heads");

    const int dh = p.dim / p.heads;
    const double scale = 1.0 / std::sqrt(double(dh));
    const Mat& x = seq.features;

    Mat q = (x * p.wq).rowwise() + p.bq.row(0);
    Mat k = (x * p.wk).rowwise() + p.bk.row(0);
    Mat v = (x * p.wv).rowwise() + p.bv.row(0);

    Mat concat(L, p.dim);
    std::vector<Mat> attn(std::size_t(p.heads));
    for (int h = 0; h < p.heads; ++h) {
        auto qh = q.middleCols(h * dh, dh);
        auto kh = k.middleCols(h * dh, dh);
        auto vh = v.middleCols(h * dh, dh);
        Mat s = scale * (qh * kh.transpose());
        attn[std::size_t(h)] = masked_softmax_rows(s, seq.valid);
        concat.middleCols(h * dh, dh) = attn[std::size_t(h)] * vh;
    }

    Mat mha = (concat * p.wo).rowwise() + p.bo.row(0);
    Mat res1 = x + mha;
    Mat xhat1;
    Vec inv1;
    Mat z = layer_norm_rows(res1, p.ln1_scale, p.ln1_shift, xhat1, inv1);
    Mat ffn_pre = (z * p.w_ffn1).rowwise() + p.b_ffn1.row(0);
    Mat ffn_act = ffn_pre.cwiseMax(0.0);
    Mat ffn_out = (ffn_act * p.w_ffn2).rowwise() + p.b_ffn2.row(0);
    Mat res2 = z + ffn_out;
    Mat xhat2;
    Vec inv2;
    Mat out = layer_norm_rows(res2, p.ln2_scale, p.ln2_shift, xhat2, inv2);
    for (Eigen::Index i = 0; i < L; ++i)
        if (!seq.valid[std::size_t(i)]) out.row(i).setZero();

    if (tape) {
        tape->params_revision = p.revision;
        tape->input = seq;
        tape->q = std::move(q);
        tape->k = std::move(k);
        tape->v = std::move(v);
        tape->attn = std::move(attn);
        tape->attn_concat = std::move(concat);
        tape->res1 = std::move(res1);
        tape->ln1_xhat = std::move(xhat1);
        tape->ln1_inv_std = std::move(inv1);
        tape->z = std::move(z);
        tape->ffn_pre = std::move(ffn_pre);
        tape->ffn_act = std::move(ffn_act);
        tape->res2 = std::move(res2);
        tape->ln2_xhat = std::move(xhat2);
        tape->ln2_inv_std = std::move(inv2);
    }
    return out;
}

Mat encoder_backward(const RamParams& p, const EncoderTape& tape,
                     const Mat& grad_out, RamParams& grad) {
    if (tape.params_revision != p.revision)
        throw ValidationError("stale tape: parameters changed since forward");
    if (!grad.same_shape(p))
        throw ValidationError("gradient accumulator shape mismatch");
    const Eigen::Index L = tape.input.features.rows();
    if (grad_out.rows() != L || grad_out.cols() != p.dim)
        throw ValidationError("grad_out shape does not match forward output");

    const int dh = p.dim / p.heads;
    const double scale = 1.0 / std::sqrt(double(dh));
    const Mat& x = tape.input.features;
    const auto& valid = tape.input.valid;

    Mat g = grad_out;
    for (Eigen::Index i = 0; i < L; ++i)
        if (!valid[std::size_t(i)]) g.row(i).setZero();

    Mat d_res2 = layer_norm_backward(g, tape.ln2_xhat, tape.ln2_inv_std,
                                     p.ln2_scale, grad.ln2_scale, grad.ln2_shift);
    Mat d_z = d_res2;
    // ffn branch
    grad.w_ffn2 += tape.ffn_act.transpose() * d_res2;
    grad.b_ffn2.row(0) += d_res2.colwise().sum();
    Mat d_act = d_res2 * p.w_ffn2.transpose();
    Mat d_pre =
        ((tape.ffn_pre.array() > 0.0).cast<double>() * d_act.array()).matrix();
    grad.w_ffn1 += tape.z.transpose() * d_pre;
    grad.b_ffn1.row(0) += d_pre.colwise().sum();
    d_z += d_pre * p.w_ffn1.transpose();

    Mat d_res1 = layer_norm_backward(d_z, tape.ln1_xhat, tape.ln1_inv_std,
                                     p.ln1_scale, grad.ln1_scale, grad.ln1_shift);
    Mat d_x = d_res1;
    // attention branch
    grad.wo += tape.attn_concat.transpose() * d_res1;
    grad.bo.row(0) += d_res1.colwise().sum();
    Mat d_concat = d_res1 * p.wo.transpose();

    Mat dq = Mat::Zero(L, p.dim), dk = Mat::Zero(L, p.dim), dv = Mat::Zero(L, p.dim);
    for (int h = 0; h < p.heads; ++h) {
        auto qh = tape.q.middleCols(h * dh, dh);
        auto kh = tape.k.middleCols(h * dh, dh);
        auto vh = tape.v.middleCols(h * dh, dh);
        const Mat& a = tape.attn[std::size_t(h)];
        Mat d_oh = d_concat.middleCols(h * dh, dh);
        Mat d_a = d_oh * vh.transpose();
        dv.middleCols(h * dh, dh) = a.transpose() * d_oh;
        // softmax rows: ds = a .* (da - rowsum(da .* a))
        Vec rowdot = (d_a.cwiseProduct(a)).rowwise().sum();
        Mat d_s = a.cwiseProduct(d_a.colwise() - rowdot) * scale;
        dq.middleCols(h * dh, dh) = d_s * kh;
        dk.middleCols(h * dh, dh) = d_s.transpose() * qh;
    }
    grad.wq += x.transpose() * dq;
    grad.bq.row(0) += dq.colwise().sum();
    grad.wk += x.transpose() * dk;
    grad.bk.row(0) += dk.colwise().sum();
    grad.wv += x.transpose() * dv;
    grad.bv.row(0) += dv.colwise().sum();
    d_x += dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();

    for (Eigen::Index i = 0; i < L; ++i)
        if (!valid[std::size_t(i)]) d_x.row(i).setZero();
    return d_x;
}

Mat l2_normalize_rows(const Mat& x) {
    Mat out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double n = x.row(i).norm();
        if (n == 0.0)
            out.row(i).setZero();
        else
            out.row(i) = x.row(i) / n;
    }
    return out;
}

Mat l2_normalize_rows_backward(const Mat& x, const Mat& g) {
    Mat out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double n = x.row(i).norm();
        if (n == 0.0) {
            out.row(i).setZero();
            continue;
        }
        Eigen::RowVectorXd y = x.row(i) / n;
        out.row(i) = (g.row(i) - y * y.dot(g.row(i))) / n;
    }
    return out;
}

AdamWState AdamWState::zeros_like(const RamParams& shape) {
    AdamWState st;
    for (const Mat* t : shape.tensors()) {
        st.m.emplace_back(Mat::Zero(t->rows(), t->cols()));
        st.v.emplace_back(Mat::Zero(t->rows(), t->cols()));
    }
    return st;
}

void adamw_step(RamParams& params, const RamParams& grad, AdamWState& state,
                const AdamWConfig& cfg) {
    if (!params.same_shape(grad))
        throw ValidationError("gradient shape does not match parameters");
    auto ps = params.tensors();
    auto gs = grad.tensors();
    if (state.m.size() != ps.size())
        throw ValidationError("optimizer state does not match parameters");

    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Mat& m = state.m[i];
        Mat& v = state.v[i];
        const Mat& g = *gs[i];
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v.array() = cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square();
        Eigen::ArrayXXd mhat = m.array() / bc1;
        Eigen::ArrayXXd vhat = v.array() / bc2;
        ps[i]->array() -=
            cfg.lr * (mhat / (vhat.sqrt() + cfg.eps) + cfg.weight_decay * ps[i]->array());
    }
    params.revision += 1;
}

}  // namespace ratrack
