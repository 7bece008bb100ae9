#pragma once

// Dense kernels with hand-written derivatives. Activations are row vectors:
// a batch X is (rows x in), weights are (in x out), biases (1 x out).

#include <cmath>

#include <Eigen/Core>

namespace nrc::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

template <typename S>
Mat<S> linear(const Mat<S>& x, const Mat<S>& w, const Mat<S>& b) {
    return (x * w).rowwise() + b.row(0);
}

/// Accumulates dW, db; returns dX.
template <typename S>
Mat<S> linear_backward(const Mat<S>& x, const Mat<S>& w, const Mat<S>& dy, Mat<S>& dw, Mat<S>& db) {
    dw.noalias() += x.transpose() * dy;
    db.row(0) += dy.colwise().sum();
    return dy * w.transpose();
}

// GELU, tanh approximation.
template <typename S>
S gelu(S x) {
    const S c = S(0.7978845608028654);  // sqrt(2/pi)
    const S u = c * (x + S(0.044715) * x * x * x);
    return S(0.5) * x * (S(1) + std::tanh(u));
}

template <typename S>
S gelu_grad(S x) {
    const S c = S(0.7978845608028654);
    const S u = c * (x + S(0.044715) * x * x * x);
    const S th = std::tanh(u);
    const S du = c * (S(1) + S(3) * S(0.044715) * x * x);
    return S(0.5) * (S(1) + th) + S(0.5) * x * (S(1) - th * th) * du;
}

template <typename S>
Mat<S> gelu(const Mat<S>& x) {
    return x.unaryExpr([](S v) { return gelu(v); });
}

template <typename S>
Mat<S> gelu_backward(const Mat<S>& x, const Mat<S>& dy) {
    return dy.cwiseProduct(x.unaryExpr([](S v) { return gelu_grad(v); }));
}

template <typename S>
S sigmoid(S x) {
    return S(1) / (S(1) + std::exp(-x));
}

/// Row-wise softmax with max subtraction; each row sums to 1.
template <typename S>
Mat<S> softmax_rows(const Mat<S>& x) {
    Mat<S> out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const S m = x.row(r).maxCoeff();
        out.row(r) = (x.row(r).array() - m).exp().matrix();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

/// log(sum(exp(row))) computed stably.
template <typename S>
S logsumexp(const RowVec<S>& x) {
    const S m = x.maxCoeff();
    return m + std::log((x.array() - m).exp().sum());
}

/// Given P = softmax(S) row-wise and dP, returns dS.
template <typename S>
Mat<S> softmax_rows_backward(const Mat<S>& p, const Mat<S>& dp) {
    const Eigen::Matrix<S, Eigen::Dynamic, 1> dot = p.cwiseProduct(dp).rowwise().sum();
    return p.cwiseProduct(dp.colwise() - dot);
}

template <typename S>
struct LayerNormCache {
    Mat<S> xhat;
    Eigen::Matrix<S, Eigen::Dynamic, 1> rstd;
};

inline constexpr double kLayerNormEps = 1e-5;

template <typename S>
Mat<S> layer_norm(const Mat<S>& x, const Mat<S>& gain, const Mat<S>& bias, LayerNormCache<S>& cache) {
    const auto n = static_cast<S>(x.cols());
    cache.xhat.resize(x.rows(), x.cols());
    cache.rstd.resize(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const S mu = x.row(r).sum() / n;
        const RowVec<S> centered = x.row(r).array() - mu;
        const S var = centered.squaredNorm() / n;
        cache.rstd[r] = S(1) / std::sqrt(var + S(kLayerNormEps));
        cache.xhat.row(r) = centered * cache.rstd[r];
    }
    return (cache.xhat.array().rowwise() * gain.row(0).array()).matrix().rowwise() + bias.row(0);
}

template <typename S>
Mat<S> layer_norm_backward(const LayerNormCache<S>& cache, const Mat<S>& gain, const Mat<S>& dy,
                           Mat<S>& dgain, Mat<S>& dbias) {
    dgain.row(0) += dy.cwiseProduct(cache.xhat).colwise().sum();
    dbias.row(0) += dy.colwise().sum();
    const Mat<S> dxhat = (dy.array().rowwise() * gain.row(0).array()).matrix();
    const auto n = static_cast<S>(dy.cols());
    Mat<S> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const S s1 = dxhat.row(r).sum();
        const S s2 = dxhat.row(r).dot(cache.xhat.row(r));
        dx.row(r) = (cache.rstd[r] / n) *
                    (n * dxhat.row(r).array() - s1 - cache.xhat.row(r).array() * s2).matrix();
    }
    return dx;
}

}  // namespace nrc::nn
