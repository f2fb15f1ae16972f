#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmtm/dataset.hpp"
#include "mmtm/expr.hpp"
#include "mmtm/tensor.hpp"

namespace mmtm {

struct ModelConfig {
  int d_model = 64;
  int n_enc_layers = 1;
  int n_dec_layers = 1;
  int n_heads = 4;
  /// 0 means 4 * d_model.
  int d_ffn = 0;
  int max_src_len = 256;
  int max_tgt_len = 64;
  int src_vocab_size = 0;
  int tgt_vocab_size = 0;
  double dropout = 0.1;
  std::uint64_t seed = 0;

  int ffn_dim() const { return d_ffn > 0 ? d_ffn : 4 * d_model; }
  /// Throws BadConfig.
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(std::string_view text);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Shared encoder plus one decoder stack per traversal task.
///
/// Parameter names:
///   encoder.embedding, encoder.layer{i}.{ln1,ln2}.{gain,bias},
///   encoder.layer{i}.attn.{wq,wk,wv,wo}, encoder.layer{i}.ffn.{w1,b1,w2,b2},
///   encoder.final_ln.{gain,bias},
///   decoder.{pre,in,post}.embedding, decoder.<t>.layer{i}.{ln1,ln2,ln3}.*,
///   decoder.<t>.layer{i}.{self,cross}.{wq,wk,wv,wo}, decoder.<t>.layer{i}.ffn.*,
///   decoder.<t>.final_ln.*, decoder.<t>.out.{w,b}
struct Model {
  ModelConfig config;
  ParamStore params;

  bool has_decoder(Traversal task) const;
  std::vector<Traversal> decoders() const;
};

std::string decoder_prefix(Traversal task);
inline constexpr std::string_view kEncoderPrefix = "encoder.";

/// Xavier-uniform weights, unit layernorm gains, zero biases, N(0,1)
/// embeddings, all drawn from config.seed. When embedding_init is given it
/// must be src_vocab_size x d_model and is copied into encoder.embedding.
Model init_model(const ModelConfig& config, const std::optional<Matrix>& embedding_init = std::nullopt,
                 std::span<const Traversal> tasks = kAllTraversals);

/// Closed-form number of scalars for a model with n_decoders decoders.
std::size_t parameter_count(const ModelConfig& config, std::size_t n_decoders = 3);

/// Per layer, per head attention matrices (queries x keys).
struct AttentionTrace {
  std::vector<std::vector<Matrix>> encoder_self;
  std::vector<std::vector<Matrix>> decoder_self;
  std::vector<std::vector<Matrix>> decoder_cross;
};

struct Encoded {
  Matrix states;
  std::vector<char> key_valid;
  std::optional<AttentionTrace> trace;
};

struct DecodeOutput {
  /// prefix_len x tgt_vocab_size
  Matrix logits;
  std::optional<AttentionTrace> trace;
};

/// Throws EmptySource (empty or all-PAD input), SequenceTooLong, IdOutOfRange.
Encoded encode(const Model& model, std::span<const int> source_ids, bool capture_attention = false);

/// Runs the decoder of `task` on the full prefix. Row t of the logits scores
/// the token following prefix[t]. Throws UnknownTask, SequenceTooLong,
/// IdOutOfRange, EmptyTarget.
DecodeOutput decode_step(const Model& model, Traversal task, const Encoded& encoded, std::span<const int> prefix,
                         bool capture_attention = false);

/// Mean negative log-likelihood of gold[t + 1] under logits row t, skipping
/// PAD golds. Throws EmptyTarget when nothing is scored.
double loss(const Matrix& logits, std::span<const int> gold);

/// Forward and backward on one example; adds scale * dLoss/dParam into grads
/// and returns the loss. Dropout is active only when dropout_rng is set.
double accumulate_gradients(const Model& model, const TaskExample& example, ParamStore& grads, double scale = 1.0,
                            Rng* dropout_rng = nullptr);

/// Gradient of the example loss with dropout disabled.
ParamStore backward(const Model& model, const TaskExample& example);

/// Example loss with dropout disabled.
double example_loss(const Model& model, const TaskExample& example);

/// Argmax decoding from BOS. Lowest id wins ties; stops on EOS (not
/// returned) or after max_len tokens.
std::vector<int> greedy_decode(const Model& model, Traversal task, std::span<const int> source_ids,
                               std::size_t max_len);

}  // namespace mmtm
