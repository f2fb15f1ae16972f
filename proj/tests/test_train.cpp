#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mmtm/error.hpp"
#include "mmtm/pipeline.hpp"
#include "mmtm/train.hpp"

using mmtm::Traversal;

namespace {

struct Setup {
  std::vector<mmtm::MwpRecord> records;
  mmtm::Vocab vocab;
  mmtm::TaskDatasets sets;
  mmtm::ModelConfig config;
};

Setup make_setup(std::size_t n, std::uint64_t seed = 1) {
  Setup s;
  s.records = fixture::synthetic_records(n, seed);
  s.vocab = mmtm::build_vocab(s.records);
  s.sets = mmtm::augment_corpus(s.records, s.vocab);
  mmtm::ModelConfig base;
  base.d_model = 16;
  base.n_heads = 2;
  base.seed = seed;
  s.config = mmtm::resolve_config(base, s.vocab, s.records);
  return s;
}

mmtm::ErrorKind error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const mmtm::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an mmtm::Error";
  return mmtm::ErrorKind::Io;
}

}  // namespace

TEST(TrainPlan, DefaultsAndValidation) {
  mmtm::TrainPlan p;
  EXPECT_EQ(p.pretrain_epochs, 1);
  EXPECT_EQ(p.finetune_epochs, 3);
  EXPECT_DOUBLE_EQ(p.pretrain_lr, 1e-5);
  EXPECT_DOUBLE_EQ(p.finetune_lr, 1e-4);
  EXPECT_LT(p.pretrain_lr, p.finetune_lr);
  EXPECT_EQ(p.batch_size, 16);
  EXPECT_NO_THROW(p.validate());
  p.finetune_lr = 0;
  EXPECT_EQ(error_of([&] { p.validate(); }), mmtm::ErrorKind::BadConfig);
  mmtm::TrainPlan q;
  q.batch_size = 0;
  EXPECT_EQ(error_of([&] { q.validate(); }), mmtm::ErrorKind::BadConfig);
  mmtm::TrainPlan r;
  r.seed = 99;
  r.finetune_epochs = 7;
  auto back = mmtm::TrainPlan::from_json(r.to_json());
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.finetune_epochs, 7);
}

TEST(Adam, PrefixFilterAndFirstStep) {
  mmtm::ParamStore params;
  params.add("encoder.w", mmtm::Matrix::Constant(1, 2, 1.0));
  params.add("decoder.in.w", mmtm::Matrix::Constant(1, 2, 1.0));
  auto grads = params.zeros_like();
  grads.at("encoder.w") << 0.5, -2.0;
  grads.at("decoder.in.w") << 1.0, 1.0;
  mmtm::TrainPlan plan;
  mmtm::Adam adam(params, 0.1, plan, {"encoder."});
  EXPECT_TRUE(adam.updates("encoder.w"));
  EXPECT_FALSE(adam.updates("decoder.in.w"));
  adam.step(params, grads);
  // first bias-corrected Adam step moves each weight by lr * g / (|g| + eps')
  EXPECT_NEAR(params.at("encoder.w")(0, 0), 1.0 - 0.1, 1e-6);
  EXPECT_NEAR(params.at("encoder.w")(0, 1), 1.0 + 0.1, 1e-6);
  EXPECT_EQ(params.at("decoder.in.w")(0, 0), 1.0);
  EXPECT_EQ(adam.steps_taken(), 1);
}

TEST(ClipGlobalNorm, ScalesDown) {
  mmtm::ParamStore g;
  g.add("a", mmtm::Matrix::Constant(1, 1, 3.0));
  g.add("b", mmtm::Matrix::Constant(1, 1, 4.0));
  EXPECT_DOUBLE_EQ(mmtm::clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g.at("a")(0, 0), 0.6, 1e-12);
  EXPECT_NEAR(g.at("b")(0, 0), 0.8, 1e-12);
  EXPECT_NEAR(mmtm::clip_global_norm(g, 10.0), 1.0, 1e-12);
  EXPECT_NEAR(g.at("a")(0, 0), 0.6, 1e-12);
}

TEST(Pretrain, RoundRobinStepCount) {
  auto s = make_setup(10);
  auto model = mmtm::init_model(s.config);
  mmtm::TrainPlan plan;
  plan.batch_size = 5;
  auto log = mmtm::pretrain_multitask(model, s.sets, plan);
  ASSERT_EQ(log.steps.size(), 6u);
  const Traversal order[] = {Traversal::PreOrder, Traversal::InOrder, Traversal::PostOrder};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(log.steps[i].task, order[i % 3]);
    EXPECT_EQ(log.steps[i].stage, "pretrain");
  }
  ASSERT_EQ(log.epochs.size(), 1u);
  EXPECT_EQ(log.epochs[0].steps, 6);
}

TEST(Pretrain, AllDecodersAndEncoderMove) {
  auto s = make_setup(30);
  auto model = mmtm::init_model(s.config);
  const auto before = model;
  mmtm::pretrain_multitask(model, s.sets, mmtm::TrainPlan{});
  EXPECT_NE(model.params.checksum("encoder."), before.params.checksum("encoder."));
  for (auto t : mmtm::kAllTraversals) {
    EXPECT_NE(model.params.checksum(mmtm::decoder_prefix(t)), before.params.checksum(mmtm::decoder_prefix(t)));
  }
}

TEST(Pretrain, EmptyTaskDataset) {
  auto s = make_setup(10);
  auto model = mmtm::init_model(s.config);
  s.sets[1].clear();
  EXPECT_EQ(error_of([&] { mmtm::pretrain_multitask(model, s.sets, mmtm::TrainPlan{}); }),
            mmtm::ErrorKind::EmptyTaskDataset);
}

TEST(Pretrain, MissingDecoderIsUnknownTask) {
  auto s = make_setup(10);
  auto model = mmtm::init_model(s.config, std::nullopt, std::vector<Traversal>{Traversal::PreOrder});
  EXPECT_EQ(error_of([&] { mmtm::pretrain_multitask(model, s.sets, mmtm::TrainPlan{}); }),
            mmtm::ErrorKind::UnknownTask);
}

TEST(Finetune, FreezesAuxiliaryDecodersAndMovesEncoder) {
  auto s = make_setup(30);
  auto model = mmtm::init_model(s.config);
  mmtm::pretrain_multitask(model, s.sets, mmtm::TrainPlan{});
  const auto in_sum = model.params.checksum("decoder.in.");
  const auto post_sum = model.params.checksum("decoder.post.");
  const auto enc_sum = model.params.checksum("encoder.");

  const auto& probe = s.sets[1][0];
  auto probe_logits = [&] {
    auto e = mmtm::encode(model, probe.source_ids);
    return mmtm::decode_step(model, Traversal::InOrder, e, probe.target_ids).logits;
  };
  const mmtm::Matrix before = probe_logits();

  auto log = mmtm::finetune(model, mmtm::dataset_for(s.sets, Traversal::PreOrder), mmtm::TrainPlan{});
  EXPECT_EQ(model.params.checksum("decoder.in."), in_sum);
  EXPECT_EQ(model.params.checksum("decoder.post."), post_sum);
  EXPECT_NE(model.params.checksum("encoder."), enc_sum);
  EXPECT_GT((probe_logits() - before).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(log.epochs.size(), 3u);
  for (const auto& step : log.steps) EXPECT_EQ(step.task, Traversal::PreOrder);
}

TEST(Finetune, LossDecreasesOnSmallCorpus) {
  auto s = make_setup(50, 4);
  auto model = mmtm::init_model(s.config);
  auto log = mmtm::finetune(model, mmtm::dataset_for(s.sets, Traversal::PreOrder), mmtm::TrainPlan{});
  ASSERT_EQ(log.epochs.size(), 3u);
  int decreases = 0;
  for (std::size_t i = 1; i < 3; ++i) decreases += log.epochs[i].mean_loss < log.epochs[i - 1].mean_loss;
  EXPECT_GE(decreases, 2);
  for (const auto& step : log.steps) EXPECT_TRUE(std::isfinite(step.loss));
}

TEST(Finetune, DivergenceIsNonFiniteLoss) {
  auto s = make_setup(10);
  auto model = mmtm::init_model(s.config);
  model.params.at("decoder.pre.out.b")(0, 4) = std::numeric_limits<double>::infinity();
  EXPECT_EQ(error_of([&] { mmtm::finetune(model, s.sets[0], mmtm::TrainPlan{}); }), mmtm::ErrorKind::NonFiniteLoss);
}

TEST(Training, Reproducible) {
  auto s = make_setup(20, 3);
  auto run = [&] {
    auto model = mmtm::init_model(s.config);
    auto log = mmtm::pretrain_multitask(model, s.sets, mmtm::TrainPlan{});
    log.append(mmtm::finetune(model, s.sets[0], mmtm::TrainPlan{}));
    return std::make_pair(model.params.checksum(), log.to_jsonl());
  };
  auto a = run();
  auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Pipeline, NoPretrainBuildsOnlyPreOrderDecoder) {
  auto records = fixture::synthetic_records(20, 2);
  mmtm::PipelineOptions options;
  options.config.d_model = 16;
  options.config.n_heads = 2;
  options.pretrain = false;
  std::vector<std::string> stages;
  auto result = mmtm::run_pipeline(records, options,
                                   [&](std::string_view stage, const mmtm::Model&, const mmtm::Vocab&,
                                       const mmtm::TrainLog&) { stages.emplace_back(stage); });
  EXPECT_EQ(result.model.decoders(), std::vector<Traversal>{Traversal::PreOrder});
  EXPECT_EQ(stages, std::vector<std::string>{"finetune"});
  for (const auto& step : result.log.steps) EXPECT_EQ(step.stage, "finetune");
}

TEST(Pipeline, PcaInitPathAndStages) {
  auto records = fixture::synthetic_records(20, 2);
  auto vocab = mmtm::build_vocab(records);
  std::vector<std::string> words(vocab.source.tokens().begin() + 4, vocab.source.tokens().end());
  auto table = mmtm::synthetic_embeddings(words, 48, 1);
  mmtm::PipelineOptions options;
  options.config.d_model = 16;
  options.config.n_heads = 2;
  options.embeddings = &table;
  std::vector<std::string> stages;
  auto result = mmtm::run_pipeline(records, options,
                                   [&](std::string_view stage, const mmtm::Model&, const mmtm::Vocab&,
                                       const mmtm::TrainLog&) { stages.emplace_back(stage); });
  EXPECT_TRUE(result.pca_init);
  EXPECT_GT(result.embedding_stats.matched, 0u);
  EXPECT_EQ(stages, (std::vector<std::string>{"pretrain", "finetune"}));
  EXPECT_EQ(result.model.decoders().size(), 3u);
}

TEST(Pipeline, ResolveConfigFitsCorpus) {
  auto records = fixture::synthetic_records(20, 2);
  auto vocab = mmtm::build_vocab(records);
  mmtm::ModelConfig base;
  base.max_src_len = 2;
  base.max_tgt_len = 2;
  auto c = mmtm::resolve_config(base, vocab, records);
  EXPECT_EQ(c.src_vocab_size, static_cast<int>(vocab.source.size()));
  EXPECT_EQ(c.tgt_vocab_size, static_cast<int>(vocab.target.size()));
  EXPECT_GT(c.max_src_len, 2);
  EXPECT_GE(c.max_tgt_len, 6);  // decoder input: BOS + 5 labels (two operators)
}
