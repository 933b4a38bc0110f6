#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>
#include <cstdint>
#include <vector>

#include "semcode/error.hpp"
#include "semcode/rng.hpp"
#include "semcode/tokenizer.hpp"

namespace semcode {

namespace detail {

inline Eigen::MatrixXd seeded_gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.next_gaussian();
    return m;
}

// Orthogonal init: QR of a seeded Gaussian, sign-fixed by R's diagonal so the
// factorization is unique. Rectangular shapes get orthonormal rows or columns,
// whichever fits.
inline Eigen::MatrixXd seeded_orthogonal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    const bool tall = rows >= cols;
    const Eigen::Index big = tall ? rows : cols;
    const Eigen::Index small = tall ? cols : rows;
    Eigen::MatrixXd g = seeded_gaussian(rng, big, small);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < small; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return tall ? q : Eigen::MatrixXd(q.transpose());
}

inline Eigen::MatrixXd layer_norm_rows(const Eigen::MatrixXd& x) {
    constexpr double eps = 1e-5;
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mean = x.row(i).mean();
        const double var = (x.row(i).array() - mean).square().mean();
        out.row(i) = (x.row(i).array() - mean) / std::sqrt(var + eps);
    }
    return out;
}

inline double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v * 0.70710678118654752440)); }

}  // namespace detail

/// Toy pre-norm transformer stack with seeded orthogonal projections. No
/// trained weights: it exists to provide a key space for similarity matching
/// and a realistic per-token compute cost for throughput measurements.
struct AttentionStage {
    struct Layer {
        Eigen::MatrixXd wq, wk, wv, wo;  // d x d
        Eigen::MatrixXd w1, w2;          // d x ff, ff x d
    };

    std::uint32_t n_layers = 0;
    std::uint32_t n_heads = 0;
    std::uint32_t head_dim = 0;
    std::uint64_t rng_seed = 0;
    std::vector<Layer> layers;

    std::uint32_t dim() const { return n_heads * head_dim; }
};

inline AttentionStage make_attention_stage(std::uint32_t n_layers, std::uint32_t n_heads,
                                           std::uint32_t head_dim, std::uint64_t seed,
                                           std::uint32_t ff_mult = 4) {
    if (n_layers == 0 || n_heads == 0 || head_dim == 0)
        throw Error(ErrorCode::InvalidDimensions, "attention stage dimensions must be positive");
    AttentionStage st;
    st.n_layers = n_layers;
    st.n_heads = n_heads;
    st.head_dim = head_dim;
    st.rng_seed = seed;
    const Eigen::Index d = st.dim();
    const Eigen::Index ff = static_cast<Eigen::Index>(ff_mult) * d;
    Rng rng(seed);
    st.layers.resize(n_layers);
    for (auto& l : st.layers) {
        l.wq = detail::seeded_orthogonal(rng, d, d);
        l.wk = detail::seeded_orthogonal(rng, d, d);
        l.wv = detail::seeded_orthogonal(rng, d, d);
        l.wo = detail::seeded_orthogonal(rng, d, d);
        l.w1 = detail::seeded_orthogonal(rng, d, ff);
        l.w2 = detail::seeded_orthogonal(rng, ff, d);
    }
    return st;
}

struct AttnSublayerResult {
    Eigen::MatrixXd tokens;        // N x d, residual-updated
    Eigen::MatrixXd keys;          // N x d, pre-softmax key projections
    double max_row_sum_err = 0.0;  // worst |row sum - 1| over all softmax rows
};

/// Self-attention half of one block: x + Wo(softmax(QK^T/sqrt(hd)) V).
inline AttnSublayerResult attention_sublayer(const Eigen::MatrixXd& x, const AttentionStage& stage,
                                             std::uint32_t layer_index) {
    const Eigen::Index d = stage.dim();
    if (x.cols() != d) throw Error(ErrorCode::DimensionMismatch, "token dim does not match attention stage");
    if (stage.layers.empty()) throw Error(ErrorCode::InvalidDimensions, "attention stage has no layers");
    const auto& l = stage.layers[layer_index % stage.n_layers];
    const Eigen::Index n = x.rows();
    const Eigen::Index hd = stage.head_dim;

    const Eigen::MatrixXd h = detail::layer_norm_rows(x);
    const Eigen::MatrixXd q = h * l.wq;
    const Eigen::MatrixXd k = h * l.wk;
    const Eigen::MatrixXd v = h * l.wv;

    Eigen::MatrixXd concat(n, d);
    double max_err = 0.0;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    for (std::uint32_t head = 0; head < stage.n_heads; ++head) {
        const Eigen::Index off = static_cast<Eigen::Index>(head) * hd;
        Eigen::MatrixXd scores = q.middleCols(off, hd) * k.middleCols(off, hd).transpose() * inv_sqrt;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = scores.row(i).maxCoeff();
            Eigen::ArrayXd e = (scores.row(i).array() - m).exp();
            const double sum = e.sum();
            scores.row(i) = (e / sum).matrix();
            max_err = std::max(max_err, std::abs(scores.row(i).sum() - 1.0));
        }
        concat.middleCols(off, hd) = scores * v.middleCols(off, hd);
    }

    AttnSublayerResult res;
    res.tokens = x + concat * l.wo;
    res.keys = k;
    res.max_row_sum_err = max_err;
    return res;
}

/// Feed-forward half: x + W2(gelu(W1 ln(x))).
inline Eigen::MatrixXd ffn_sublayer(const Eigen::MatrixXd& x, const AttentionStage& stage,
                                    std::uint32_t layer_index) {
    if (x.cols() != static_cast<Eigen::Index>(stage.dim()))
        throw Error(ErrorCode::DimensionMismatch, "token dim does not match attention stage");
    const auto& l = stage.layers[layer_index % stage.n_layers];
    Eigen::MatrixXd u = detail::layer_norm_rows(x) * l.w1;
    u = u.unaryExpr([](double v) { return detail::gelu(v); });
    return x + u * l.w2;
}

/// Averages the per-head key blocks; the similarity space used for matching.
inline Eigen::MatrixXd mean_over_heads(const Eigen::MatrixXd& keys, std::uint32_t n_heads) {
    if (n_heads == 0 || keys.cols() % n_heads != 0)
        throw Error(ErrorCode::DimensionMismatch, "key width not divisible by head count");
    const Eigen::Index hd = keys.cols() / n_heads;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(keys.rows(), hd);
    for (std::uint32_t h = 0; h < n_heads; ++h) out += keys.middleCols(static_cast<Eigen::Index>(h) * hd, hd);
    return out / static_cast<double>(n_heads);
}

/// Runs the full stack over a token sequence. Token count, sizes and origin
/// pass through untouched; returns the last layer's key matrix.
inline std::pair<TokenSequence, Eigen::MatrixXd> attention_forward(const TokenSequence& ts,
                                                                   const AttentionStage& stage) {
    TokenSequence out = ts;
    Eigen::MatrixXd keys;
    for (std::uint32_t l = 0; l < stage.n_layers; ++l) {
        AttnSublayerResult a = attention_sublayer(out.tokens, stage, l);
        keys = std::move(a.keys);
        out.tokens = ffn_sublayer(a.tokens, stage, l);
    }
    return {std::move(out), std::move(keys)};
}

}  // namespace semcode
