#include "mmtm/model.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "layers.hpp"
#include "mmtm/error.hpp"

namespace mmtm {
namespace {

using detail::AttentionCache;
using detail::FfnCache;
using detail::LayerNormCache;

std::string enc_layer(int i) { return "encoder.layer" + std::to_string(i) + "."; }
std::string dec_layer(Traversal t, int i) { return decoder_prefix(t) + "layer" + std::to_string(i) + "."; }

detail::AttentionParams attn_params(const ParamStore& p, const std::string& prefix) {
  return {p.at(prefix + "wq"), p.at(prefix + "wk"), p.at(prefix + "wv"), p.at(prefix + "wo")};
}

detail::AttentionGrads attn_grads(ParamStore& g, const std::string& prefix) {
  return {g.at(prefix + "wq"), g.at(prefix + "wk"), g.at(prefix + "wv"), g.at(prefix + "wo")};
}

Matrix apply_ln(const ParamStore& p, const std::string& prefix, const Matrix& x, LayerNormCache& cache) {
  return detail::layer_norm(x, p.at(prefix + "gain"), p.at(prefix + "bias"), cache);
}

Matrix apply_ln_backward(const ParamStore& p, ParamStore& g, const std::string& prefix, const Matrix& dy,
                         const LayerNormCache& cache) {
  return detail::layer_norm_backward(dy, cache, p.at(prefix + "gain"), g.at(prefix + "gain"), g.at(prefix + "bias"));
}

Matrix apply_ffn(const ParamStore& p, const std::string& prefix, const Matrix& x, FfnCache& cache) {
  return detail::feed_forward(x, p.at(prefix + "w1"), p.at(prefix + "b1"), p.at(prefix + "w2"), p.at(prefix + "b2"),
                              cache);
}

Matrix apply_ffn_backward(const ParamStore& p, ParamStore& g, const std::string& prefix, const Matrix& dy,
                          const FfnCache& cache) {
  return detail::feed_forward_backward(dy, cache, p.at(prefix + "w1"), p.at(prefix + "w2"), g.at(prefix + "w1"),
                                       g.at(prefix + "b1"), g.at(prefix + "w2"), g.at(prefix + "b2"));
}

struct EncoderLayerCache {
  LayerNormCache ln1;
  AttentionCache attn;
  Matrix drop1;
  LayerNormCache ln2;
  FfnCache ffn;
  Matrix drop2;
};

struct EncoderCache {
  std::vector<int> ids;
  std::vector<char> key_valid;
  std::vector<EncoderLayerCache> layers;
  LayerNormCache final_ln;
};

struct DecoderLayerCache {
  LayerNormCache ln1;
  AttentionCache self;
  Matrix drop1;
  LayerNormCache ln2;
  AttentionCache cross;
  Matrix drop2;
  LayerNormCache ln3;
  FfnCache ffn;
  Matrix drop3;
};

struct DecoderCache {
  Traversal task = Traversal::PreOrder;
  std::vector<int> ids;
  std::vector<DecoderLayerCache> layers;
  LayerNormCache final_ln;
  Matrix normed;
};

Matrix embed(const Matrix& table, std::span<const int> ids) {
  Matrix x(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  return x + detail::positional_encoding(static_cast<int>(ids.size()), static_cast<int>(table.cols()));
}

void check_source(const ModelConfig& cfg, std::span<const int> ids) {
  if (ids.empty()) throw Error(ErrorKind::EmptySource, "empty source sequence");
  if (static_cast<int>(ids.size()) > cfg.max_src_len) {
    throw Error(ErrorKind::SequenceTooLong,
                "source length " + std::to_string(ids.size()) + " > " + std::to_string(cfg.max_src_len));
  }
  bool any = false;
  for (int id : ids) {
    if (id < 0 || id >= cfg.src_vocab_size) throw Error(ErrorKind::IdOutOfRange, "source id " + std::to_string(id));
    any |= id != TokenTable::kPad;
  }
  if (!any) throw Error(ErrorKind::EmptySource, "source is all PAD");
}

void check_prefix(const Model& m, Traversal task, std::span<const int> prefix) {
  if (!m.has_decoder(task)) {
    throw Error(ErrorKind::UnknownTask, "model has no " + std::string(traversal_tag(task)) + " decoder");
  }
  if (prefix.empty()) throw Error(ErrorKind::EmptyTarget, "empty decoder prefix");
  if (static_cast<int>(prefix.size()) > m.config.max_tgt_len) {
    throw Error(ErrorKind::SequenceTooLong,
                "target prefix length " + std::to_string(prefix.size()) + " > " + std::to_string(m.config.max_tgt_len));
  }
  for (int id : prefix) {
    if (id < 0 || id >= m.config.tgt_vocab_size) {
      throw Error(ErrorKind::IdOutOfRange, "target id " + std::to_string(id));
    }
  }
}

Matrix encoder_forward(const Model& m, std::span<const int> ids, Rng* rng, EncoderCache& c) {
  const auto& cfg = m.config;
  const auto& p = m.params;
  c.ids.assign(ids.begin(), ids.end());
  c.key_valid.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) c.key_valid[i] = ids[i] != TokenTable::kPad;
  c.layers.resize(static_cast<std::size_t>(cfg.n_enc_layers));

  Matrix x = embed(p.at("encoder.embedding"), ids);
  for (int l = 0; l < cfg.n_enc_layers; ++l) {
    auto& lc = c.layers[static_cast<std::size_t>(l)];
    const std::string pre = enc_layer(l);
    Matrix h = apply_ln(p, pre + "ln1.", x, lc.ln1);
    h = detail::attention(h, h, attn_params(p, pre + "attn."), cfg.n_heads, {&c.key_valid, false}, lc.attn);
    x += detail::dropout(h, cfg.dropout, rng, lc.drop1);
    h = apply_ln(p, pre + "ln2.", x, lc.ln2);
    h = apply_ffn(p, pre + "ffn.", h, lc.ffn);
    x += detail::dropout(h, cfg.dropout, rng, lc.drop2);
  }
  return apply_ln(p, "encoder.final_ln.", x, c.final_ln);
}

void encoder_backward(const Model& m, const EncoderCache& c, const Matrix& dout, ParamStore& g) {
  const auto& cfg = m.config;
  const auto& p = m.params;
  Matrix dx = apply_ln_backward(p, g, "encoder.final_ln.", dout, c.final_ln);
  for (int l = cfg.n_enc_layers - 1; l >= 0; --l) {
    const auto& lc = c.layers[static_cast<std::size_t>(l)];
    const std::string pre = enc_layer(l);
    Matrix dh = detail::dropout_backward(dx, lc.drop2);
    dh = apply_ffn_backward(p, g, pre + "ffn.", dh, lc.ffn);
    dx += apply_ln_backward(p, g, pre + "ln2.", dh, lc.ln2);

    dh = detail::dropout_backward(dx, lc.drop1);
    Matrix dq;
    Matrix dkv;
    auto grads = attn_grads(g, pre + "attn.");
    detail::attention_backward(dh, lc.attn, attn_params(p, pre + "attn."), cfg.n_heads, grads, dq, dkv);
    dx += apply_ln_backward(p, g, pre + "ln1.", dq + dkv, lc.ln1);
  }
  Matrix& demb = g.at("encoder.embedding");
  for (std::size_t i = 0; i < c.ids.size(); ++i) demb.row(c.ids[i]) += dx.row(static_cast<Eigen::Index>(i));
}

Matrix decoder_forward(const Model& m, Traversal task, const Matrix& enc_states, const std::vector<char>& key_valid,
                       std::span<const int> prefix, Rng* rng, DecoderCache& c) {
  const auto& cfg = m.config;
  const auto& p = m.params;
  const std::string dp = decoder_prefix(task);
  c.task = task;
  c.ids.assign(prefix.begin(), prefix.end());
  c.layers.resize(static_cast<std::size_t>(cfg.n_dec_layers));

  Matrix x = embed(p.at(dp + "embedding"), prefix);
  for (int l = 0; l < cfg.n_dec_layers; ++l) {
    auto& lc = c.layers[static_cast<std::size_t>(l)];
    const std::string pre = dec_layer(task, l);
    Matrix h = apply_ln(p, pre + "ln1.", x, lc.ln1);
    h = detail::attention(h, h, attn_params(p, pre + "self."), cfg.n_heads, {nullptr, true}, lc.self);
    x += detail::dropout(h, cfg.dropout, rng, lc.drop1);
    h = apply_ln(p, pre + "ln2.", x, lc.ln2);
    h = detail::attention(h, enc_states, attn_params(p, pre + "cross."), cfg.n_heads, {&key_valid, false}, lc.cross);
    x += detail::dropout(h, cfg.dropout, rng, lc.drop2);
    h = apply_ln(p, pre + "ln3.", x, lc.ln3);
    h = apply_ffn(p, pre + "ffn.", h, lc.ffn);
    x += detail::dropout(h, cfg.dropout, rng, lc.drop3);
  }
  c.normed = apply_ln(p, dp + "final_ln.", x, c.final_ln);
  Matrix logits = c.normed * p.at(dp + "out.w");
  logits.rowwise() += p.at(dp + "out.b").row(0);
  return logits;
}

// Returns the gradient with respect to the encoder states.
Matrix decoder_backward(const Model& m, const DecoderCache& c, const Matrix& dlogits, Eigen::Index n_source,
                        ParamStore& g) {
  const auto& cfg = m.config;
  const auto& p = m.params;
  const std::string dp = decoder_prefix(c.task);

  g.at(dp + "out.w") += c.normed.transpose() * dlogits;
  g.at(dp + "out.b").row(0) += dlogits.colwise().sum();
  Matrix dx = apply_ln_backward(p, g, dp + "final_ln.", dlogits * p.at(dp + "out.w").transpose(), c.final_ln);
  Matrix denc = Matrix::Zero(n_source, cfg.d_model);

  for (int l = cfg.n_dec_layers - 1; l >= 0; --l) {
    const auto& lc = c.layers[static_cast<std::size_t>(l)];
    const std::string pre = dec_layer(c.task, l);
    Matrix dh = detail::dropout_backward(dx, lc.drop3);
    dh = apply_ffn_backward(p, g, pre + "ffn.", dh, lc.ffn);
    dx += apply_ln_backward(p, g, pre + "ln3.", dh, lc.ln3);

    Matrix dq;
    Matrix dkv;
    dh = detail::dropout_backward(dx, lc.drop2);
    auto cross = attn_grads(g, pre + "cross.");
    detail::attention_backward(dh, lc.cross, attn_params(p, pre + "cross."), cfg.n_heads, cross, dq, dkv);
    dx += apply_ln_backward(p, g, pre + "ln2.", dq, lc.ln2);
    denc += dkv;

    dh = detail::dropout_backward(dx, lc.drop1);
    auto self = attn_grads(g, pre + "self.");
    detail::attention_backward(dh, lc.self, attn_params(p, pre + "self."), cfg.n_heads, self, dq, dkv);
    dx += apply_ln_backward(p, g, pre + "ln1.", dq + dkv, lc.ln1);
  }
  Matrix& demb = g.at(dp + "embedding");
  for (std::size_t i = 0; i < c.ids.size(); ++i) demb.row(c.ids[i]) += dx.row(static_cast<Eigen::Index>(i));
  return denc;
}

struct ScoredRows {
  double loss = 0.0;
  Matrix dlogits;
};

ScoredRows cross_entropy(const Matrix& logits, std::span<const int> gold, bool want_grad) {
  if (gold.size() < 2) throw Error(ErrorKind::EmptyTarget, "target has no token after BOS");
  const auto rows = static_cast<Eigen::Index>(gold.size() - 1);
  if (logits.rows() < rows) {
    throw Error(ErrorKind::ShapeMismatch, "logits have " + std::to_string(logits.rows()) + " rows for " +
                                              std::to_string(rows) + " scored positions");
  }
  std::size_t count = 0;
  for (std::size_t t = 1; t < gold.size(); ++t) count += gold[t] != TokenTable::kPad;
  if (count == 0) throw Error(ErrorKind::EmptyTarget, "target is all PAD");

  ScoredRows out;
  if (want_grad) out.dlogits = Matrix::Zero(logits.rows(), logits.cols());
  const double inv = 1.0 / static_cast<double>(count);
  for (Eigen::Index t = 0; t < rows; ++t) {
    int y = gold[static_cast<std::size_t>(t) + 1];
    if (y == TokenTable::kPad) continue;
    if (y < 0 || y >= logits.cols()) throw Error(ErrorKind::IdOutOfRange, "gold id " + std::to_string(y));
    double mx = logits.row(t).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(t).array() - mx).exp().matrix();
    double z = e.sum();
    out.loss += (std::log(z) + mx - logits(t, y)) * inv;
    if (want_grad) {
      out.dlogits.row(t) = e * (inv / z);
      out.dlogits(t, y) -= inv;
    }
  }
  return out;
}

std::vector<Matrix> copy_probs(const AttentionCache& c) { return c.probs; }

void xavier(Matrix& m, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::BadConfig, msg); };
  if (d_model < 1 || n_enc_layers < 1 || n_dec_layers < 1 || n_heads < 1 || d_ffn < 0 || max_src_len < 1 ||
      max_tgt_len < 1 || src_vocab_size < 1 || tgt_vocab_size < 1) {
    fail("all sizes must be >= 1");
  }
  if (d_model % n_heads != 0) {
    fail("d_model " + std::to_string(d_model) + " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
}

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["d_model"] = d_model;
  j["n_enc_layers"] = n_enc_layers;
  j["n_dec_layers"] = n_dec_layers;
  j["n_heads"] = n_heads;
  j["d_ffn"] = d_ffn;
  j["max_src_len"] = max_src_len;
  j["max_tgt_len"] = max_tgt_len;
  j["src_vocab_size"] = src_vocab_size;
  j["tgt_vocab_size"] = tgt_vocab_size;
  j["dropout"] = dropout;
  j["seed"] = seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    ModelConfig c;
    c.d_model = j.value("d_model", c.d_model);
    c.n_enc_layers = j.value("n_enc_layers", c.n_enc_layers);
    c.n_dec_layers = j.value("n_dec_layers", c.n_dec_layers);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.d_ffn = j.value("d_ffn", c.d_ffn);
    c.max_src_len = j.value("max_src_len", c.max_src_len);
    c.max_tgt_len = j.value("max_tgt_len", c.max_tgt_len);
    c.src_vocab_size = j.value("src_vocab_size", c.src_vocab_size);
    c.tgt_vocab_size = j.value("tgt_vocab_size", c.tgt_vocab_size);
    c.dropout = j.value("dropout", c.dropout);
    c.seed = j.value("seed", c.seed);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadConfig, e.what());
  }
}

std::string decoder_prefix(Traversal task) { return "decoder." + std::string(traversal_tag(task)) + "."; }

bool Model::has_decoder(Traversal task) const { return params.contains(decoder_prefix(task) + "embedding"); }

std::vector<Traversal> Model::decoders() const {
  std::vector<Traversal> out;
  for (Traversal t : kAllTraversals) {
    if (has_decoder(t)) out.push_back(t);
  }
  return out;
}

Model init_model(const ModelConfig& config, const std::optional<Matrix>& embedding_init,
                 std::span<const Traversal> tasks) {
  config.validate();
  const Eigen::Index d = config.d_model;
  const Eigen::Index f = config.ffn_dim();
  Model model{config, {}};
  ParamStore& p = model.params;

  auto add_weight = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    xavier(p.add(name, Matrix(rows, cols)), rng);
  };
  auto add_ln = [&](const std::string& prefix) {
    p.add(prefix + "gain", Matrix::Ones(1, d));
    p.add(prefix + "bias", Matrix::Zero(1, d));
  };
  auto add_attn = [&](const std::string& prefix, Rng& rng) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) add_weight(prefix + w, d, d, rng);
  };
  auto add_ffn = [&](const std::string& prefix, Rng& rng) {
    add_weight(prefix + "w1", d, f, rng);
    p.add(prefix + "b1", Matrix::Zero(1, f));
    add_weight(prefix + "w2", f, d, rng);
    p.add(prefix + "b2", Matrix::Zero(1, d));
  };

  std::seed_seq encoder_seed{config.seed, std::uint64_t{0}};
  Rng rng(encoder_seed);
  Matrix embedding = gaussian(config.src_vocab_size, d, rng);
  if (embedding_init) {
    if (embedding_init->rows() != config.src_vocab_size || embedding_init->cols() != d) {
      throw Error(ErrorKind::ShapeMismatch, "embedding init is " + std::to_string(embedding_init->rows()) + "x" +
                                                std::to_string(embedding_init->cols()) + ", expected " +
                                                std::to_string(config.src_vocab_size) + "x" + std::to_string(d));
    }
    embedding = *embedding_init;
  }
  p.add("encoder.embedding", std::move(embedding));
  for (int l = 0; l < config.n_enc_layers; ++l) {
    const std::string pre = enc_layer(l);
    add_ln(pre + "ln1.");
    add_attn(pre + "attn.", rng);
    add_ln(pre + "ln2.");
    add_ffn(pre + "ffn.", rng);
  }
  add_ln("encoder.final_ln.");

  for (Traversal t : kAllTraversals) {
    if (std::find(tasks.begin(), tasks.end(), t) == tasks.end()) continue;
    std::seed_seq task_seed{config.seed, static_cast<std::uint64_t>(t) + 1};
    Rng task_rng(task_seed);
    const std::string dp = decoder_prefix(t);
    p.add(dp + "embedding", gaussian(config.tgt_vocab_size, d, task_rng));
    for (int l = 0; l < config.n_dec_layers; ++l) {
      const std::string pre = dec_layer(t, l);
      add_ln(pre + "ln1.");
      add_attn(pre + "self.", task_rng);
      add_ln(pre + "ln2.");
      add_attn(pre + "cross.", task_rng);
      add_ln(pre + "ln3.");
      add_ffn(pre + "ffn.", task_rng);
    }
    add_ln(dp + "final_ln.");
    add_weight(dp + "out.w", d, config.tgt_vocab_size, task_rng);
    p.add(dp + "out.b", Matrix::Zero(1, config.tgt_vocab_size));
  }
  return model;
}

std::size_t parameter_count(const ModelConfig& c, std::size_t n_decoders) {
  const std::size_t d = static_cast<std::size_t>(c.d_model);
  const std::size_t f = static_cast<std::size_t>(c.ffn_dim());
  const std::size_t ln = 2 * d;
  const std::size_t attn = 4 * d * d;
  const std::size_t ffn = d * f + f + f * d + d;
  const std::size_t vs = static_cast<std::size_t>(c.src_vocab_size);
  const std::size_t vt = static_cast<std::size_t>(c.tgt_vocab_size);
  const std::size_t encoder = vs * d + static_cast<std::size_t>(c.n_enc_layers) * (2 * ln + attn + ffn) + ln;
  const std::size_t decoder =
      vt * d + static_cast<std::size_t>(c.n_dec_layers) * (3 * ln + 2 * attn + ffn) + ln + d * vt + vt;
  return encoder + n_decoders * decoder;
}

Encoded encode(const Model& model, std::span<const int> source_ids, bool capture_attention) {
  check_source(model.config, source_ids);
  EncoderCache cache;
  Encoded out;
  out.states = encoder_forward(model, source_ids, nullptr, cache);
  out.key_valid = cache.key_valid;
  if (capture_attention) {
    AttentionTrace trace;
    for (const auto& lc : cache.layers) trace.encoder_self.push_back(copy_probs(lc.attn));
    out.trace = std::move(trace);
  }
  return out;
}

DecodeOutput decode_step(const Model& model, Traversal task, const Encoded& encoded, std::span<const int> prefix,
                         bool capture_attention) {
  check_prefix(model, task, prefix);
  DecoderCache cache;
  DecodeOutput out;
  out.logits = decoder_forward(model, task, encoded.states, encoded.key_valid, prefix, nullptr, cache);
  if (capture_attention) {
    AttentionTrace trace;
    if (encoded.trace) trace.encoder_self = encoded.trace->encoder_self;
    for (const auto& lc : cache.layers) {
      trace.decoder_self.push_back(copy_probs(lc.self));
      trace.decoder_cross.push_back(copy_probs(lc.cross));
    }
    out.trace = std::move(trace);
  }
  return out;
}

double loss(const Matrix& logits, std::span<const int> gold) { return cross_entropy(logits, gold, false).loss; }

double accumulate_gradients(const Model& model, const TaskExample& example, ParamStore& grads, double scale,
                            Rng* dropout_rng) {
  check_source(model.config, example.source_ids);
  const auto& target = example.target_ids;
  if (target.size() < 2) throw Error(ErrorKind::EmptyTarget, "target has no token after BOS");
  std::span<const int> prefix(target.data(), target.size() - 1);
  check_prefix(model, example.task, prefix);

  EncoderCache enc_cache;
  Matrix states = encoder_forward(model, example.source_ids, dropout_rng, enc_cache);
  DecoderCache dec_cache;
  Matrix logits = decoder_forward(model, example.task, states, enc_cache.key_valid, prefix, dropout_rng, dec_cache);
  ScoredRows scored = cross_entropy(logits, target, true);
  if (!std::isfinite(scored.loss)) {
    throw Error(ErrorKind::NonFiniteLoss, "loss is not finite for record '" + example.record_id + "'");
  }
  scored.dlogits *= scale;
  Matrix denc = decoder_backward(model, dec_cache, scored.dlogits, states.rows(), grads);
  encoder_backward(model, enc_cache, denc, grads);
  return scored.loss;
}

ParamStore backward(const Model& model, const TaskExample& example) {
  ParamStore grads = model.params.zeros_like();
  accumulate_gradients(model, example, grads, 1.0, nullptr);
  return grads;
}

double example_loss(const Model& model, const TaskExample& example) {
  Encoded enc = encode(model, example.source_ids);
  const auto& target = example.target_ids;
  if (target.size() < 2) throw Error(ErrorKind::EmptyTarget, "target has no token after BOS");
  DecodeOutput out = decode_step(model, example.task, enc, std::span<const int>(target.data(), target.size() - 1));
  return loss(out.logits, target);
}

std::vector<int> greedy_decode(const Model& model, Traversal task, std::span<const int> source_ids,
                               std::size_t max_len) {
  Encoded enc = encode(model, source_ids);
  max_len = std::min(max_len, static_cast<std::size_t>(model.config.max_tgt_len));
  std::vector<int> prefix{TokenTable::kBos};
  std::vector<int> out;
  while (out.size() < max_len) {
    DecodeOutput step = decode_step(model, task, enc, prefix);
    auto last = step.logits.row(step.logits.rows() - 1);
    int best = 0;
    for (Eigen::Index j = 1; j < last.size(); ++j) {
      if (last(j) > last(best)) best = static_cast<int>(j);
    }
    if (best == TokenTable::kEos) break;
    out.push_back(best);
    prefix.push_back(best);
  }
  return out;
}

}  // namespace mmtm
