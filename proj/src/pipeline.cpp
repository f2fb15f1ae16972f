#include "mmtm/pipeline.hpp"

#include <nlohmann/json.hpp>

#include "mmtm/error.hpp"

namespace mmtm {

ModelConfig resolve_config(const ModelConfig& base, const Vocab& vocab, std::span<const MwpRecord> records) {
  ModelConfig config = base;
  config.src_vocab_size = static_cast<int>(vocab.source.size());
  config.tgt_vocab_size = static_cast<int>(vocab.target.size());
  for (const auto& r : records) {
    config.max_src_len = std::max(config.max_src_len, static_cast<int>(tokenize(r.masked_question).size()));
    // decoder input is BOS + labels
    config.max_tgt_len = std::max(config.max_tgt_len, static_cast<int>(gold_tree(r).node_count()) + 1);
  }
  return config;
}

PipelineResult run_pipeline(std::span<const MwpRecord> train, const PipelineOptions& options,
                            const StageCallback& on_stage, const EpochCallback& on_epoch) {
  if (train.empty()) throw Error(ErrorKind::EmptyTaskDataset, "training corpus has no accepted records");
  PipelineResult result;
  result.vocab = build_vocab(train, options.min_count);
  const ModelConfig config = resolve_config(options.config, result.vocab, train);
  config.validate();

  std::optional<Matrix> embedding_init;
  if (options.embeddings) {
    embedding_init = init_vocab_embeddings(result.vocab.source, *options.embeddings, config.d_model, config.seed,
                                           result.embedding_stats);
    result.pca_init = true;
  }
  const std::vector<Traversal> tasks = options.pretrain ? std::vector<Traversal>(kAllTraversals.begin(), kAllTraversals.end())
                                                        : std::vector<Traversal>{Traversal::PreOrder};
  result.model = init_model(config, embedding_init, tasks);

  TaskDatasets datasets = augment_corpus(train, result.vocab);
  if (options.pretrain) {
    result.log.append(pretrain_multitask(result.model, datasets, options.plan, on_epoch));
    if (on_stage) on_stage("pretrain", result.model, result.vocab, result.log);
  }
  result.log.append(finetune(result.model, dataset_for(datasets, Traversal::PreOrder), options.plan, on_epoch));
  if (on_stage) on_stage("finetune", result.model, result.vocab, result.log);
  return result;
}

std::string_view to_string(AblationArm arm) {
  switch (arm) {
    case AblationArm::Full: return "full";
    case AblationArm::NoPretrain: return "no_pretrain";
    case AblationArm::Dim768: return "dim768";
    case AblationArm::ScratchEmbeddings: return "scratch_embeddings";
  }
  return "?";
}

std::optional<AblationArm> ablation_arm_from_string(std::string_view name) {
  for (AblationArm a : {AblationArm::Full, AblationArm::NoPretrain, AblationArm::Dim768, AblationArm::ScratchEmbeddings}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

std::string AblationResult::to_json() const {
  nlohmann::ordered_json j;
  j["arm"] = std::string(to_string(arm));
  j["config"] = nlohmann::ordered_json::parse(config.to_json());
  j["pretrained"] = pretrained;
  j["pca_init"] = pca_init;
  auto decs = nlohmann::ordered_json::array();
  for (Traversal t : decoders) decs.push_back(std::string(traversal_tag(t)));
  j["decoders"] = std::move(decs);
  j["report"] = nlohmann::ordered_json::parse(report.to_json());
  return j.dump(1) + "\n";
}

AblationResult run_ablation(AblationArm arm, std::span<const MwpRecord> train, std::span<const MwpRecord> test,
                            const PipelineOptions& full) {
  PipelineOptions options = full;
  switch (arm) {
    case AblationArm::Full: break;
    case AblationArm::NoPretrain: options.pretrain = false; break;
    case AblationArm::Dim768: options.config.d_model = 768; break;
    case AblationArm::ScratchEmbeddings: options.embeddings = nullptr; break;
  }
  PipelineResult trained = run_pipeline(train, options);
  AblationResult out;
  out.arm = arm;
  out.config = trained.model.config;
  out.pretrained = options.pretrain;
  out.pca_init = trained.pca_init;
  out.decoders = trained.model.decoders();
  out.report = score(trained.model, trained.vocab, test);
  return out;
}

}  // namespace mmtm
