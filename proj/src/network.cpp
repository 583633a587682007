#include "mousesim/detail/network.hpp"

#include "mousesim/error.hpp"
#include "mousesim/rng.hpp"

#include <cmath>

namespace mousesim::model::detail {

namespace {

using Eigen::Index;

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

Index ix(std::size_t v) { return static_cast<Index>(v); }

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

template <typename S>
Eigen::Map<const Mat<S>> view(const std::vector<S>& data, const TensorSlot& s) {
    return Eigen::Map<const Mat<S>>(data.data() + s.offset, ix(s.rows), ix(s.cols));
}

template <typename S>
Eigen::Map<Mat<S>> view(std::vector<S>& data, const TensorSlot& s) {
    return Eigen::Map<Mat<S>>(data.data() + s.offset, ix(s.rows), ix(s.cols));
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
    using S = typename Derived::Scalar;
    return (S(1) + (-x).exp()).inverse();
}

// Column block k*c_in + c of the result holds input channel c shifted by
// (k - pad) steps in time, zero outside each sample's window.
template <typename S>
Mat<S> im2col(const Mat<S>& x, std::size_t batch, std::size_t steps, std::size_t kernel) {
    const Index cin = x.cols();
    const Index T = ix(steps);
    const Index pad = ix((kernel - 1) / 2);
    Mat<S> cols = Mat<S>::Zero(ix(batch) * T, ix(kernel) * cin);
    for (Index k = 0; k < ix(kernel); ++k) {
        const Index shift = k - pad;
        const Index t0 = std::max<Index>(0, -shift);
        const Index t1 = std::min<Index>(T, T - shift);
        if (t1 <= t0) continue;
        for (Index c = 0; c < cin; ++c) {
            for (Index b = 0; b < ix(batch); ++b)
                cols.col(k * cin + c).segment(b * T + t0, t1 - t0) = x.col(c).segment(b * T + t0 + shift, t1 - t0);
        }
    }
    return cols;
}

template <typename S>
Mat<S> col2im(const Mat<S>& dcols, std::size_t batch, std::size_t steps, std::size_t kernel, Index cin) {
    const Index T = ix(steps);
    const Index pad = ix((kernel - 1) / 2);
    Mat<S> dx = Mat<S>::Zero(ix(batch) * T, cin);
    for (Index k = 0; k < ix(kernel); ++k) {
        const Index shift = k - pad;
        const Index t0 = std::max<Index>(0, -shift);
        const Index t1 = std::min<Index>(T, T - shift);
        if (t1 <= t0) continue;
        for (Index c = 0; c < cin; ++c) {
            for (Index b = 0; b < ix(batch); ++b)
                dx.col(c).segment(b * T + t0 + shift, t1 - t0) += dcols.col(k * cin + c).segment(b * T + t0, t1 - t0);
        }
    }
    return dx;
}

template <typename S>
struct EmbedTape {
    std::array<Mat<S>, 3> cols, xhat, out;
    std::array<RowVec<S>, 3> invstd, mean, var;
    std::array<Mat<S>, 2> x, act, c, tc, h;
};

template <typename S>
Mat<S> forward_embed(const Network<S>& net, std::span<const float* const> inputs, bool training,
                     EmbedTape<S>* tape) {
    const ModelConfig& cfg = net.config();
    const Layout& L = net.layout();
    const auto& p = net.params();
    const auto& buf = net.buffers();
    const std::size_t B = inputs.size();
    const std::size_t T = cfg.seq_len;
    const std::size_t F = cfg.input_features;
    const Index H = ix(cfg.recurrent_hidden);

    // Convolutional branch, batch-major rows (b * T + t).
    Mat<S> x(ix(B * T), ix(F));
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t f = 0; f < F; ++f) x(ix(b * T + t), ix(f)) = static_cast<S>(inputs[b][t * F + f]);

    for (std::size_t l = 0; l < 3; ++l) {
        Mat<S> cols = im2col<S>(x, B, T, cfg.conv_kernel);
        Mat<S> y = cols * view(p, L.conv_w[l]);
        RowVec<S> mean, var;
        if (training) {
            mean = y.colwise().mean();
            var = (y.rowwise() - mean).array().square().colwise().mean();
        } else {
            mean = view(buf, L.bn_mean[l]).transpose();
            var = view(buf, L.bn_var[l]).transpose();
        }
        RowVec<S> invstd = (var.array() + S(kBnEps)).rsqrt();
        Mat<S> xhat = (y.rowwise() - mean) * invstd.asDiagonal();
        auto gamma = view(p, L.bn_gamma[l]);
        auto beta = view(p, L.bn_beta[l]);
        Mat<S> z = xhat * gamma.col(0).asDiagonal();
        z.rowwise() += beta.col(0).transpose();
        z = z.cwiseMax(S(0));
        if (tape) {
            tape->cols[l] = std::move(cols);
            tape->xhat[l] = std::move(xhat);
            tape->invstd[l] = invstd;
            tape->mean[l] = mean;
            tape->var[l] = var;
            tape->out[l] = z;
        }
        x = std::move(z);
    }
    const Index c3 = x.cols();
    Mat<S> pooled(ix(B), c3);
    for (std::size_t b = 0; b < B; ++b) pooled.row(ix(b)) = x.middleRows(ix(b * T), ix(T)).colwise().mean();

    // Recurrent branch, time-major rows (t * B + b).
    Mat<S> seq(ix(T * B), ix(F));
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t f = 0; f < F; ++f) seq(ix(t * B + b), ix(f)) = static_cast<S>(inputs[b][t * F + f]);

    const Index Bi = ix(B);
    for (std::size_t l = 0; l < 2; ++l) {
        auto wx = view(p, L.lstm_wx[l]);
        auto wh = view(p, L.lstm_wh[l]);
        auto bias = view(p, L.lstm_b[l]);
        Mat<S> gates = seq * wx;
        gates.rowwise() += bias.col(0).transpose();
        Mat<S> act(ix(T * B), 4 * H), cell(ix(T * B), H), tcell(ix(T * B), H), hid(ix(T * B), H);
        Mat<S> h_prev = Mat<S>::Zero(Bi, H);
        Mat<S> c_prev = Mat<S>::Zero(Bi, H);
        Mat<S> a(Bi, 4 * H);
        for (std::size_t t = 0; t < T; ++t) {
            const Index r = ix(t) * Bi;
            a = gates.middleRows(r, Bi);
            a.noalias() += h_prev * wh;
            auto ab = act.middleRows(r, Bi);
            ab.leftCols(H) = sigmoid(a.leftCols(H).array()).matrix();
            ab.middleCols(H, H) = sigmoid(a.middleCols(H, H).array()).matrix();
            ab.middleCols(2 * H, H) = a.middleCols(2 * H, H).array().tanh().matrix();
            ab.rightCols(H) = sigmoid(a.rightCols(H).array()).matrix();
            c_prev = (ab.middleCols(H, H).array() * c_prev.array() +
                      ab.leftCols(H).array() * ab.middleCols(2 * H, H).array())
                         .matrix();
            cell.middleRows(r, Bi) = c_prev;
            tcell.middleRows(r, Bi) = c_prev.array().tanh().matrix();
            h_prev = (ab.rightCols(H).array() * tcell.middleRows(r, Bi).array()).matrix();
            hid.middleRows(r, Bi) = h_prev;
        }
        if (tape) {
            tape->x[l] = std::move(seq);
            tape->act[l] = std::move(act);
            tape->c[l] = std::move(cell);
            tape->tc[l] = std::move(tcell);
            tape->h[l] = hid;
        }
        seq = std::move(hid);
    }

    Mat<S> emb(Bi, c3 + H);
    emb.leftCols(c3) = pooled;
    emb.rightCols(H) = seq.middleRows(ix(T - 1) * Bi, Bi);
    return emb;
}

template <typename S>
void backward_embed(const Network<S>& net, const EmbedTape<S>& tape, const Mat<S>& d_emb, std::size_t B,
                    std::vector<S>& grad) {
    const ModelConfig& cfg = net.config();
    const Layout& L = net.layout();
    const auto& p = net.params();
    const std::size_t T = cfg.seq_len;
    const Index H = ix(cfg.recurrent_hidden);
    const Index c3 = ix(cfg.conv_channels[2]);
    const Index Bi = ix(B);

    // Convolutional branch.
    Mat<S> dx(ix(B * T), c3);
    for (std::size_t b = 0; b < B; ++b)
        dx.middleRows(ix(b * T), ix(T)) = (d_emb.row(ix(b)).leftCols(c3) / S(T)).replicate(ix(T), 1);
    const S n = static_cast<S>(B * T);
    for (std::size_t li = 3; li-- > 0;) {
        const Mat<S>& z = tape.out[li];
        const Mat<S>& xhat = tape.xhat[li];
        Mat<S> dz = (z.array() > S(0)).select(dx, Mat<S>::Zero(dx.rows(), dx.cols()));
        view(grad, L.bn_gamma[li]) = dz.cwiseProduct(xhat).colwise().sum().transpose();
        view(grad, L.bn_beta[li]) = dz.colwise().sum().transpose();
        auto gamma = view(p, L.bn_gamma[li]);
        Mat<S> dxhat = dz * gamma.col(0).asDiagonal();
        RowVec<S> sum1 = dxhat.colwise().sum();
        RowVec<S> sum2 = dxhat.cwiseProduct(xhat).colwise().sum();
        Mat<S> dy = ((dxhat * n).rowwise() - sum1 - (xhat * sum2.asDiagonal())) *
                    (tape.invstd[li] / n).asDiagonal();
        view(grad, L.conv_w[li]).noalias() = tape.cols[li].transpose() * dy;
        if (li > 0) {
            Mat<S> dcols = dy * view(p, L.conv_w[li]).transpose();
            dx = col2im<S>(dcols, B, T, cfg.conv_kernel, ix(L.conv_w[li].rows / cfg.conv_kernel));
        }
    }

    // Recurrent branch: gradient enters only at the final step of the top layer.
    Mat<S> d_seq = Mat<S>::Zero(ix(T * B), H);
    d_seq.middleRows(ix(T - 1) * Bi, Bi) = d_emb.rightCols(H);
    for (std::size_t li = 2; li-- > 0;) {
        const Mat<S>& act = tape.act[li];
        const Mat<S>& cell = tape.c[li];
        const Mat<S>& tcell = tape.tc[li];
        auto wh = view(p, L.lstm_wh[li]);
        Mat<S> d_act(ix(T * B), 4 * H);
        Mat<S> dh_next = Mat<S>::Zero(Bi, H);
        Mat<S> dc_next = Mat<S>::Zero(Bi, H);
        const Mat<S> zero = Mat<S>::Zero(Bi, H);
        for (std::size_t t = T; t-- > 0;) {
            const Index r = ix(t) * Bi;
            auto ab = act.middleRows(r, Bi);
            auto i = ab.leftCols(H).array();
            auto f = ab.middleCols(H, H).array();
            auto g = ab.middleCols(2 * H, H).array();
            auto o = ab.rightCols(H).array();
            auto tc = tcell.middleRows(r, Bi).array();
            Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic> dh = d_seq.middleRows(r, Bi).array() + dh_next.array();
            Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic> dc =
                dh * o * (S(1) - tc.square()) + dc_next.array();
            const auto c_prev = (t > 0 ? cell.middleRows(r - Bi, Bi) : zero.middleRows(0, Bi)).array();
            auto db = d_act.middleRows(r, Bi);
            db.leftCols(H) = (dc * g * i * (S(1) - i)).matrix();
            db.middleCols(H, H) = (dc * c_prev * f * (S(1) - f)).matrix();
            db.middleCols(2 * H, H) = (dc * i * (S(1) - g.square())).matrix();
            db.rightCols(H) = (dh * tc * o * (S(1) - o)).matrix();
            dc_next = (dc * f).matrix();
            dh_next.noalias() = db * wh.transpose();
        }
        // h_{t-1} stacked time-major, zero for t = 0.
        Mat<S> h_shift = Mat<S>::Zero(ix(T * B), H);
        h_shift.bottomRows(ix((T - 1) * B)) = tape.h[li].topRows(ix((T - 1) * B));
        view(grad, L.lstm_wh[li]).noalias() = h_shift.transpose() * d_act;
        view(grad, L.lstm_wx[li]).noalias() = tape.x[li].transpose() * d_act;
        view(grad, L.lstm_b[li]) = d_act.colwise().sum().transpose();
        if (li > 0) d_seq = d_act * view(p, L.lstm_wx[li]).transpose();
    }
}

template <typename S>
Mat<S> gather_pairs(const Mat<S>& emb, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    const Index e = emb.cols();
    Mat<S> z(ix(a.size()), 2 * e);
    for (std::size_t k = 0; k < a.size(); ++k) {
        z.row(ix(k)).leftCols(e) = emb.row(ix(a[k]));
        z.row(ix(k)).rightCols(e) = emb.row(ix(b[k]));
    }
    return z;
}

template <typename S>
void init_uniform(std::vector<S>& data, const TensorSlot& s, double limit, Rng& rng) {
    for (std::size_t k = 0; k < s.size(); ++k) data[s.offset + k] = static_cast<S>(rng.uniform(-limit, limit));
}

}  // namespace

Layout Layout::build(const ModelConfig& cfg) {
    Layout L;
    std::size_t off = 0;
    auto slot = [&off](std::string name, std::size_t rows, std::size_t cols) {
        TensorSlot s{std::move(name), off, rows, cols};
        off += rows * cols;
        return s;
    };
    std::size_t cin = cfg.input_features;
    for (std::size_t l = 0; l < 3; ++l) {
        const std::size_t cout = cfg.conv_channels[l];
        const std::string tag = std::to_string(l);
        L.conv_w[l] = slot("conv" + tag + ".weight", cfg.conv_kernel * cin, cout);
        L.bn_gamma[l] = slot("bn" + tag + ".gamma", cout, 1);
        L.bn_beta[l] = slot("bn" + tag + ".beta", cout, 1);
        cin = cout;
    }
    const std::size_t H = cfg.recurrent_hidden;
    std::size_t in = cfg.input_features;
    for (std::size_t l = 0; l < 2; ++l) {
        const std::string tag = std::to_string(l);
        L.lstm_wx[l] = slot("lstm" + tag + ".w_input", in, 4 * H);
        L.lstm_wh[l] = slot("lstm" + tag + ".w_hidden", H, 4 * H);
        L.lstm_b[l] = slot("lstm" + tag + ".bias", 4 * H, 1);
        in = H;
    }
    L.embedding_dim = cfg.conv_channels[2] + H;
    const std::array<std::size_t, 4> widths{2 * L.embedding_dim, cfg.head_widths[0], cfg.head_widths[1], 1};
    for (std::size_t l = 0; l < 3; ++l) {
        const std::string tag = std::to_string(l);
        L.head_w[l] = slot("head" + tag + ".weight", widths[l], widths[l + 1]);
        L.head_b[l] = slot("head" + tag + ".bias", widths[l + 1], 1);
    }
    L.n_params = off;

    off = 0;
    for (std::size_t l = 0; l < 3; ++l) {
        const std::string tag = std::to_string(l);
        L.bn_mean[l] = slot("bn" + tag + ".running_mean", cfg.conv_channels[l], 1);
        L.bn_var[l] = slot("bn" + tag + ".running_var", cfg.conv_channels[l], 1);
    }
    L.n_buffers = off;
    return L;
}

std::vector<TensorSlot> Layout::param_slots() const {
    std::vector<TensorSlot> out;
    for (std::size_t l = 0; l < 3; ++l) {
        out.push_back(conv_w[l]);
        out.push_back(bn_gamma[l]);
        out.push_back(bn_beta[l]);
    }
    for (std::size_t l = 0; l < 2; ++l) {
        out.push_back(lstm_wx[l]);
        out.push_back(lstm_wh[l]);
        out.push_back(lstm_b[l]);
    }
    for (std::size_t l = 0; l < 3; ++l) {
        out.push_back(head_w[l]);
        out.push_back(head_b[l]);
    }
    return out;
}

template <typename S>
Network<S>::Network(const ModelConfig& cfg) : cfg_(cfg), layout_(Layout::build(cfg)) {
    cfg_.validate();
    params_.assign(layout_.n_params, S(0));
    buffers_.assign(layout_.n_buffers, S(0));
    for (std::size_t l = 0; l < 3; ++l) view(buffers_, layout_.bn_var[l]).setOnes();
}

template <typename S>
void Network<S>::init(std::uint64_t seed) {
    Rng rng(seed);
    const Layout& L = layout_;
    for (std::size_t l = 0; l < 3; ++l) {
        init_uniform(params_, L.conv_w[l], 1.0 / std::sqrt(static_cast<double>(L.conv_w[l].rows)), rng);
        view(params_, L.bn_gamma[l]).setOnes();
        view(params_, L.bn_beta[l]).setZero();
        view(buffers_, L.bn_mean[l]).setZero();
        view(buffers_, L.bn_var[l]).setOnes();
    }
    const std::size_t H = cfg_.recurrent_hidden;
    for (std::size_t l = 0; l < 2; ++l) {
        const auto& wx = L.lstm_wx[l];
        const auto& wh = L.lstm_wh[l];
        init_uniform(params_, wx, std::sqrt(6.0 / static_cast<double>(wx.rows + wx.cols)), rng);
        init_uniform(params_, wh, std::sqrt(6.0 / static_cast<double>(wh.rows + wh.cols)), rng);
        auto b = view(params_, L.lstm_b[l]);
        b.setZero();
        b.block(ix(H), 0, ix(H), 1).setOnes();  // forget gate starts open
    }
    for (std::size_t l = 0; l < 3; ++l) {
        const auto& w = L.head_w[l];
        init_uniform(params_, w, std::sqrt(6.0 / static_cast<double>(w.rows + w.cols)), rng);
        view(params_, L.head_b[l]).setZero();
    }
}

template <typename S>
typename Network<S>::Mat Network<S>::embed(std::span<const float* const> inputs) const {
    return forward_embed<S>(*this, inputs, false, nullptr);
}

template <typename S>
typename Network<S>::Vec Network<S>::head_logits(const Mat& ea, const Mat& eb) const {
    const Layout& L = layout_;
    Mat z(ea.rows(), ea.cols() + eb.cols());
    z << ea, eb;
    Mat h1 = z * view(params_, L.head_w[0]);
    h1.rowwise() += view(params_, L.head_b[0]).col(0).transpose();
    h1 = h1.cwiseMax(S(0));
    Mat h2 = h1 * view(params_, L.head_w[1]);
    h2.rowwise() += view(params_, L.head_b[1]).col(0).transpose();
    h2 = h2.cwiseMax(S(0));
    Vec logits = h2 * view(params_, L.head_w[2]);
    logits.array() += params_[L.head_b[2].offset];
    return logits;
}

template <typename S>
S Network<S>::train_loss(const PairBatch& batch, std::uint64_t dropout_seed, std::vector<S>* grad,
                         bool update_running_stats) {
    const Layout& L = layout_;
    const std::size_t B = batch.inputs.size();
    const std::size_t P = batch.a.size();
    if (P == 0 || batch.b.size() != P || batch.labels.size() != P)
        throw Error(ErrorCode::EmptyDataset, "malformed training batch");

    EmbedTape<S> tape;
    Mat emb = forward_embed<S>(*this, batch.inputs, true, &tape);

    if (update_running_stats) {
        const S m = static_cast<S>(kBnMomentum);
        const S n = static_cast<S>(B * cfg_.seq_len);
        const S unbias = n > S(1) ? n / (n - S(1)) : S(1);
        for (std::size_t l = 0; l < 3; ++l) {
            auto rm = view(buffers_, L.bn_mean[l]);
            auto rv = view(buffers_, L.bn_var[l]);
            rm = (S(1) - m) * rm + m * tape.mean[l].transpose();
            rv = (S(1) - m) * rv + (m * unbias) * tape.var[l].transpose();
        }
    }

    // Head with inverted dropout after each hidden layer.
    const S keep = static_cast<S>(1.0 - cfg_.dropout);
    Rng rng(dropout_seed);
    auto make_mask = [&](Index rows, Index cols) {
        Mat mask(rows, cols);
        for (Index c = 0; c < cols; ++c)
            for (Index r = 0; r < rows; ++r) mask(r, c) = rng.uniform() < cfg_.dropout ? S(0) : S(1) / keep;
        return mask;
    };
    Mat z0 = gather_pairs<S>(emb, batch.a, batch.b);
    Mat pre1 = z0 * view(params_, L.head_w[0]);
    pre1.rowwise() += view(params_, L.head_b[0]).col(0).transpose();
    Mat mask1 = make_mask(pre1.rows(), pre1.cols());
    Mat d1 = pre1.cwiseMax(S(0)).cwiseProduct(mask1);
    Mat pre2 = d1 * view(params_, L.head_w[1]);
    pre2.rowwise() += view(params_, L.head_b[1]).col(0).transpose();
    Mat mask2 = make_mask(pre2.rows(), pre2.cols());
    Mat d2 = pre2.cwiseMax(S(0)).cwiseProduct(mask2);
    Vec logits = d2 * view(params_, L.head_w[2]);
    logits.array() += params_[L.head_b[2].offset];

    Vec y(ix(P));
    for (std::size_t k = 0; k < P; ++k) y(ix(k)) = static_cast<S>(batch.labels[k]);
    const auto z = logits.array();
    const S loss = (z.cwiseMax(S(0)) - y.array() * z + (-z.abs()).exp().log1p()).mean();
    if (!grad) return loss;

    grad->assign(params_.size(), S(0));
    Vec dz = ((sigmoid(z) - y.array()) / static_cast<S>(P)).matrix();
    view(*grad, L.head_w[2]).noalias() = d2.transpose() * dz;
    (*grad)[L.head_b[2].offset] = dz.sum();
    Mat dpre2 = (dz * view(params_, L.head_w[2]).transpose()).cwiseProduct(mask2);
    dpre2 = (pre2.array() > S(0)).select(dpre2, Mat::Zero(dpre2.rows(), dpre2.cols()));
    view(*grad, L.head_w[1]).noalias() = d1.transpose() * dpre2;
    view(*grad, L.head_b[1]) = dpre2.colwise().sum().transpose();
    Mat dpre1 = (dpre2 * view(params_, L.head_w[1]).transpose()).cwiseProduct(mask1);
    dpre1 = (pre1.array() > S(0)).select(dpre1, Mat::Zero(dpre1.rows(), dpre1.cols()));
    view(*grad, L.head_w[0]).noalias() = z0.transpose() * dpre1;
    view(*grad, L.head_b[0]) = dpre1.colwise().sum().transpose();
    Mat dz0 = dpre1 * view(params_, L.head_w[0]).transpose();

    const Index e = emb.cols();
    Mat d_emb = Mat::Zero(emb.rows(), e);
    for (std::size_t k = 0; k < P; ++k) {
        d_emb.row(ix(batch.a[k])) += dz0.row(ix(k)).leftCols(e);
        d_emb.row(ix(batch.b[k])) += dz0.row(ix(k)).rightCols(e);
    }
    backward_embed<S>(*this, tape, d_emb, B, *grad);
    return loss;
}

template class Network<float>;
template class Network<double>;

}  // namespace mousesim::model::detail
