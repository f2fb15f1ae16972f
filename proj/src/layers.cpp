#include "layers.hpp"

#include <cmath>
#include <limits>

#include "mmtm/error.hpp"

namespace mmtm::detail {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache& cache) {
  const Eigen::Index n = x.cols();
  cache.xhat.resize(x.rows(), n);
  cache.inv_std.resize(x.rows());
  Matrix y(x.rows(), n);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mean = x.row(r).mean();
    auto centered = x.row(r).array() - mean;
    double var = centered.square().sum() / static_cast<double>(n);
    double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(r) = inv_std;
    cache.xhat.row(r) = centered * inv_std;
    y.row(r) = cache.xhat.row(r).cwiseProduct(gain.row(0)) + bias.row(0);
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& gain, Matrix& dgain,
                           Matrix& dbias) {
  const double n = static_cast<double>(dy.cols());
  dgain.row(0) += (dy.cwiseProduct(cache.xhat)).colwise().sum();
  dbias.row(0) += dy.colwise().sum();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gain.row(0));
    double mean_dxhat = dxhat.mean();
    double mean_dxhat_xhat = dxhat.cwiseProduct(cache.xhat.row(r)).sum() / n;
    dx.row(r) = cache.inv_std(r) *
                (dxhat.array() - mean_dxhat - cache.xhat.row(r).array() * mean_dxhat_xhat).matrix();
  }
  return dx;
}

Matrix attention(const Matrix& q_in, const Matrix& kv_in, const AttentionParams& p, int n_heads,
                 const AttentionMask& mask, AttentionCache& cache) {
  const Eigen::Index d = p.wq.cols();
  const Eigen::Index dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Eigen::Index nq = q_in.rows();
  const Eigen::Index nk = kv_in.rows();

  cache.q_in = q_in;
  cache.kv_in = kv_in;
  cache.q = q_in * p.wq;
  cache.k = kv_in * p.wk;
  cache.v = kv_in * p.wv;
  cache.concat.resize(nq, d);
  cache.probs.assign(static_cast<std::size_t>(n_heads), Matrix());

  for (int h = 0; h < n_heads; ++h) {
    const Eigen::Index off = h * dh;
    Matrix scores = (cache.q.middleCols(off, dh) * cache.k.middleCols(off, dh).transpose()) * scale;
    Matrix& probs = cache.probs[static_cast<std::size_t>(h)];
    probs.setZero(nq, nk);
    for (Eigen::Index i = 0; i < nq; ++i) {
      double max_score = -std::numeric_limits<double>::infinity();
      auto allowed = [&](Eigen::Index j) {
        if (mask.causal && j > i) return false;
        return mask.key_valid == nullptr || (*mask.key_valid)[static_cast<std::size_t>(j)] != 0;
      };
      for (Eigen::Index j = 0; j < nk; ++j) {
        if (allowed(j)) max_score = std::max(max_score, scores(i, j));
      }
      if (!std::isfinite(max_score)) throw Error(ErrorKind::EmptySource, "attention row has no visible keys");
      double sum = 0.0;
      for (Eigen::Index j = 0; j < nk; ++j) {
        if (!allowed(j)) continue;
        double e = std::exp(scores(i, j) - max_score);
        probs(i, j) = e;
        sum += e;
      }
      probs.row(i) /= sum;
    }
    cache.concat.middleCols(off, dh) = probs * cache.v.middleCols(off, dh);
  }
  return cache.concat * p.wo;
}

void attention_backward(const Matrix& dy, const AttentionCache& cache, const AttentionParams& p, int n_heads,
                        AttentionGrads& g, Matrix& dq_in, Matrix& dkv_in) {
  const Eigen::Index d = p.wq.cols();
  const Eigen::Index dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  g.wo += cache.concat.transpose() * dy;
  Matrix dconcat = dy * p.wo.transpose();
  Matrix dq = Matrix::Zero(cache.q.rows(), d);
  Matrix dk = Matrix::Zero(cache.k.rows(), d);
  Matrix dv = Matrix::Zero(cache.v.rows(), d);

  for (int h = 0; h < n_heads; ++h) {
    const Eigen::Index off = h * dh;
    const Matrix& probs = cache.probs[static_cast<std::size_t>(h)];
    Matrix dout = dconcat.middleCols(off, dh);
    Matrix dprobs = dout * cache.v.middleCols(off, dh).transpose();
    dv.middleCols(off, dh) += probs.transpose() * dout;
    // softmax Jacobian, row by row
    Eigen::VectorXd row_dot = dprobs.cwiseProduct(probs).rowwise().sum();
    Matrix dscores = probs.cwiseProduct(dprobs - row_dot.replicate(1, dprobs.cols())) * scale;
    dq.middleCols(off, dh) += dscores * cache.k.middleCols(off, dh);
    dk.middleCols(off, dh) += dscores.transpose() * cache.q.middleCols(off, dh);
  }

  g.wq += cache.q_in.transpose() * dq;
  g.wk += cache.kv_in.transpose() * dk;
  g.wv += cache.kv_in.transpose() * dv;
  dq_in = dq * p.wq.transpose();
  dkv_in = dk * p.wk.transpose() + dv * p.wv.transpose();
}

Matrix feed_forward(const Matrix& x, const Matrix& w1, const Matrix& b1, const Matrix& w2, const Matrix& b2,
                    FfnCache& cache) {
  cache.in = x;
  cache.pre = x * w1;
  cache.pre.rowwise() += b1.row(0);
  cache.act = cache.pre.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  });
  Matrix y = cache.act * w2;
  y.rowwise() += b2.row(0);
  return y;
}

Matrix feed_forward_backward(const Matrix& dy, const FfnCache& cache, const Matrix& w1, const Matrix& w2,
                             Matrix& dw1, Matrix& db1, Matrix& dw2, Matrix& db2) {
  dw2 += cache.act.transpose() * dy;
  db2.row(0) += dy.colwise().sum();
  Matrix dact = dy * w2.transpose();
  Matrix gelu_grad = cache.pre.unaryExpr([](double v) {
    double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
  });
  Matrix dpre = dact.cwiseProduct(gelu_grad);
  dw1 += cache.in.transpose() * dpre;
  db1.row(0) += dpre.colwise().sum();
  return dpre * w1.transpose();
}

Matrix dropout(const Matrix& x, double p, Rng* rng, Matrix& mask) {
  if (p <= 0.0 || rng == nullptr) {
    mask.resize(0, 0);
    return x;
  }
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  mask.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? scale : 0.0;
  return x.cwiseProduct(mask);
}

Matrix dropout_backward(const Matrix& dy, const Matrix& mask) {
  if (mask.size() == 0) return dy;
  return dy.cwiseProduct(mask);
}

Matrix positional_encoding(int len, int d_model) {
  Matrix pe(len, d_model);
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < d_model; ++i) {
      double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / d_model);
      pe(pos, i) = (i % 2 == 0) ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  }
  return pe;
}

}  // namespace mmtm::detail
