#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include "mmtm/dataset.hpp"
#include "mmtm/eval.hpp"
#include "mmtm/model.hpp"
#include "mmtm/pca.hpp"
#include "mmtm/train.hpp"

namespace mmtm {

struct PipelineOptions {
  /// Vocabulary sizes are filled in from the corpus; sequence limits are
  /// raised when the corpus needs more.
  ModelConfig config;
  TrainPlan plan;
  bool pretrain = true;
  /// When set, source embeddings start from its principal components.
  const PretrainedEmbeddings* embeddings = nullptr;
  std::size_t min_count = 1;
};

struct PipelineResult {
  Model model;
  Vocab vocab;
  TrainLog log;
  bool pca_init = false;
  EmbeddingInitStats embedding_stats;
};

/// Called with "pretrain" and "finetune" after each stage completes.
using StageCallback = std::function<void(std::string_view stage, const Model&, const Vocab&, const TrainLog&)>;

/// Vocabulary, embedding init, optional multi-task pre-training over all
/// three traversals, then pre-order fine-tuning. Without pre-training only the
/// pre-order decoder is built.
PipelineResult run_pipeline(std::span<const MwpRecord> train, const PipelineOptions& options,
                            const StageCallback& on_stage = {}, const EpochCallback& on_epoch = {});

/// Resolved model config for a corpus, as run_pipeline would build it.
ModelConfig resolve_config(const ModelConfig& base, const Vocab& vocab, std::span<const MwpRecord> records);

enum class AblationArm { Full, NoPretrain, Dim768, ScratchEmbeddings };
std::string_view to_string(AblationArm arm);
std::optional<AblationArm> ablation_arm_from_string(std::string_view name);

struct AblationResult {
  AblationArm arm = AblationArm::Full;
  ModelConfig config;
  bool pretrained = true;
  bool pca_init = false;
  std::vector<Traversal> decoders;
  EvalReport report;

  std::string to_json() const;
};

/// Changes one factor relative to `full`: skip pre-training, d_model = 768, or
/// random source embeddings even when pretrained ones are supplied.
AblationResult run_ablation(AblationArm arm, std::span<const MwpRecord> train, std::span<const MwpRecord> test,
                            const PipelineOptions& full);

}  // namespace mmtm
