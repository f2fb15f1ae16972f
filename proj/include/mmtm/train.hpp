#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmtm/dataset.hpp"
#include "mmtm/model.hpp"

namespace mmtm {

struct TrainPlan {
  int pretrain_epochs = 1;
  int finetune_epochs = 3;
  double pretrain_lr = 1e-5;
  double finetune_lr = 1e-4;
  int batch_size = 16;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; <= 0 disables.
  double clip_norm = 1.0;
  bool shuffle = true;
  std::uint64_t seed = 0;

  /// Throws BadConfig.
  void validate() const;
  std::string to_json() const;
  static TrainPlan from_json(std::string_view text);
};

struct StepRecord {
  std::string stage;
  int epoch = 0;
  int step = 0;
  Traversal task = Traversal::PreOrder;
  double loss = 0.0;
};

struct EpochRecord {
  std::string stage;
  int epoch = 0;
  int steps = 0;
  double mean_loss = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;

  void append(const TrainLog& other);
  /// One JSON object per line: steps and epoch summaries in order of
  /// occurrence. Wall-clock time is left out so identical runs produce
  /// identical bytes.
  std::string to_jsonl() const;
};

/// Adam with bias correction over the parameters whose names start with one
/// of `prefixes` (all parameters when empty).
class Adam {
 public:
  Adam(const ParamStore& params, double lr, const TrainPlan& plan, std::vector<std::string> prefixes = {});

  void step(ParamStore& params, const ParamStore& grads);
  bool updates(std::string_view name) const;
  long steps_taken() const { return t_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  std::vector<std::string> prefixes_;
  ParamStore m_;
  ParamStore v_;
};

/// Scales grads in place so their global L2 norm is at most max_norm; returns
/// the norm before clipping.
double clip_global_norm(ParamStore& grads, double max_norm);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Multi-task stage: homogeneous batches drawn round-robin over the tasks
/// (pre, in, post, pre, ...), each routed to its own decoder, all updating
/// the shared encoder. Throws EmptyTaskDataset, NonFiniteLoss.
TrainLog pretrain_multitask(Model& model, const TaskDatasets& datasets, const TrainPlan& plan,
                            const EpochCallback& on_epoch = {});

/// Pre-order stage: only the encoder and the pre-order decoder change.
TrainLog finetune(Model& model, const std::vector<TaskExample>& preorder, const TrainPlan& plan,
                  const EpochCallback& on_epoch = {});

}  // namespace mmtm
