#pragma once

// Forward/backward kernels for the transformer blocks. Sequences are stored
// one position per row.

#include <vector>

#include "mmtm/tensor.hpp"

namespace mmtm::detail {

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache& cache);
Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& gain, Matrix& dgain,
                           Matrix& dbias);

struct AttentionParams {
  const Matrix& wq;
  const Matrix& wk;
  const Matrix& wv;
  const Matrix& wo;
};

struct AttentionGrads {
  Matrix& wq;
  Matrix& wk;
  Matrix& wv;
  Matrix& wo;
};

struct AttentionMask {
  /// Nonzero for keys that may be attended. Empty means all keys.
  const std::vector<char>* key_valid = nullptr;
  /// Query i sees keys 0..i only.
  bool causal = false;
};

struct AttentionCache {
  Matrix q_in;
  Matrix kv_in;
  Matrix q;
  Matrix k;
  Matrix v;
  Matrix concat;
  /// One (queries x keys) row-stochastic matrix per head.
  std::vector<Matrix> probs;
};

Matrix attention(const Matrix& q_in, const Matrix& kv_in, const AttentionParams& p, int n_heads,
                 const AttentionMask& mask, AttentionCache& cache);
/// Adds parameter gradients into g; writes input gradients.
void attention_backward(const Matrix& dy, const AttentionCache& cache, const AttentionParams& p, int n_heads,
                        AttentionGrads& g, Matrix& dq_in, Matrix& dkv_in);

struct FfnCache {
  Matrix in;
  Matrix pre;
  Matrix act;
};

Matrix feed_forward(const Matrix& x, const Matrix& w1, const Matrix& b1, const Matrix& w2, const Matrix& b2,
                    FfnCache& cache);
Matrix feed_forward_backward(const Matrix& dy, const FfnCache& cache, const Matrix& w1, const Matrix& w2,
                             Matrix& dw1, Matrix& db1, Matrix& dw2, Matrix& db2);

/// Inverted dropout. Leaves mask empty (identity) when p == 0 or rng is null.
Matrix dropout(const Matrix& x, double p, Rng* rng, Matrix& mask);
Matrix dropout_backward(const Matrix& dy, const Matrix& mask);

/// Sinusoidal position table, rows 0..len-1.
Matrix positional_encoding(int len, int d_model);

}  // namespace mmtm::detail
