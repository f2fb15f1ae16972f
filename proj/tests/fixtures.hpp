#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mmtm/dataset.hpp"
#include "mmtm/model.hpp"
#include "mmtm/synthetic.hpp"

namespace fixture {

// d_model 8, one layer each side, two heads, vocabularies of 12, length <= 5.
inline mmtm::ModelConfig tiny_config(std::uint64_t seed = 11) {
  mmtm::ModelConfig c;
  c.d_model = 8;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.n_heads = 2;
  c.d_ffn = 16;
  c.max_src_len = 5;
  c.max_tgt_len = 5;
  c.src_vocab_size = 12;
  c.tgt_vocab_size = 12;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

// Random example: source of `src_len` non-reserved ids (optionally one
// trailing PAD), target BOS x.. EOS of total length `tgt_len`.
inline mmtm::TaskExample random_example(std::mt19937_64& rng, mmtm::Traversal task, int src_len, int tgt_len,
                                        bool pad_source = false) {
  std::uniform_int_distribution<int> id(mmtm::TokenTable::kReserved, 11);
  mmtm::TaskExample ex;
  ex.task = task;
  ex.record_id = "probe";
  for (int i = 0; i < src_len; ++i) ex.source_ids.push_back(id(rng));
  if (pad_source) ex.source_ids.back() = mmtm::TokenTable::kPad;
  ex.target_ids.push_back(mmtm::TokenTable::kBos);
  for (int i = 0; i + 2 < tgt_len; ++i) ex.target_ids.push_back(id(rng));
  ex.target_ids.push_back(mmtm::TokenTable::kEos);
  return ex;
}

// Per tensor: ||analytic - numeric|| / max(||analytic||, ||numeric||), with 0
// when both norms vanish. Numeric gradients by central differences.
inline std::map<std::string, double> gradient_check(const mmtm::Model& model, const mmtm::TaskExample& ex,
                                                    double eps = 1e-5) {
  const mmtm::ParamStore analytic = mmtm::backward(model, ex);
  mmtm::Model probe = model;
  std::map<std::string, double> out;
  for (auto& [name, tensor] : probe.params) {
    const mmtm::Matrix& ga = analytic.at(name);
    mmtm::Matrix gn(tensor.rows(), tensor.cols());
    for (Eigen::Index i = 0; i < tensor.size(); ++i) {
      const double saved = tensor.data()[i];
      tensor.data()[i] = saved + eps;
      const double up = mmtm::example_loss(probe, ex);
      tensor.data()[i] = saved - eps;
      const double down = mmtm::example_loss(probe, ex);
      tensor.data()[i] = saved;
      gn.data()[i] = (up - down) / (2 * eps);
    }
    const double scale = std::max(ga.norm(), gn.norm());
    out[name] = scale < 1e-12 ? 0.0 : (ga - gn).norm() / scale;
  }
  return out;
}

inline std::vector<mmtm::MwpRecord> synthetic_records(std::size_t n, std::uint64_t seed) {
  std::vector<mmtm::MwpRecord> out;
  for (const auto& raw : mmtm::synthetic_corpus(n, seed)) out.push_back(mmtm::make_record(raw));
  return out;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mmtm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture
