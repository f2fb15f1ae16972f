#include "mmtm/train.hpp"

#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "mmtm/error.hpp"

namespace mmtm {
namespace {

// Fisher-Yates on mt19937_64 output so the order is the same on every
// standard library.
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, bool shuffle, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (shuffle) shuffle_indices(idx, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start), idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

struct Stage {
  Model& model;
  Adam optimizer;
  ParamStore grads;
  Rng dropout_rng;
  double clip_norm;

  double run_batch(const std::vector<TaskExample>& data, const std::vector<std::size_t>& batch) {
    grads.set_zero();
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (std::size_t i : batch) total += accumulate_gradients(model, data[i], grads, scale, &dropout_rng);
    double norm = clip_global_norm(grads, clip_norm);
    if (!std::isfinite(norm)) throw Error(ErrorKind::NonFiniteLoss, "gradient norm is not finite");
    optimizer.step(model.params, grads);
    return total * scale;
  }
};

Rng stage_rng(std::uint64_t seed, std::uint64_t stage, std::uint64_t stream) {
  std::seed_seq seq{seed, stage, stream};
  return Rng(seq);
}

}  // namespace

void TrainPlan::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::BadConfig, msg); };
  if (pretrain_epochs < 0 || finetune_epochs < 0) fail("epochs must be >= 0");
  if (!(pretrain_lr > 0) || !(finetune_lr > 0)) fail("learning rates must be positive");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(epsilon > 0)) fail("bad Adam hyperparameters");
}

std::string TrainPlan::to_json() const {
  nlohmann::ordered_json j;
  j["pretrain_epochs"] = pretrain_epochs;
  j["finetune_epochs"] = finetune_epochs;
  j["pretrain_lr"] = pretrain_lr;
  j["finetune_lr"] = finetune_lr;
  j["batch_size"] = batch_size;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["epsilon"] = epsilon;
  j["clip_norm"] = clip_norm;
  j["shuffle"] = shuffle;
  j["mixing"] = "round_robin";
  j["seed"] = seed;
  return j.dump();
}

TrainPlan TrainPlan::from_json(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    TrainPlan p;
    p.pretrain_epochs = j.value("pretrain_epochs", p.pretrain_epochs);
    p.finetune_epochs = j.value("finetune_epochs", p.finetune_epochs);
    p.pretrain_lr = j.value("pretrain_lr", p.pretrain_lr);
    p.finetune_lr = j.value("finetune_lr", p.finetune_lr);
    p.batch_size = j.value("batch_size", p.batch_size);
    p.beta1 = j.value("beta1", p.beta1);
    p.beta2 = j.value("beta2", p.beta2);
    p.epsilon = j.value("epsilon", p.epsilon);
    p.clip_norm = j.value("clip_norm", p.clip_norm);
    p.shuffle = j.value("shuffle", p.shuffle);
    p.seed = j.value("seed", p.seed);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadConfig, e.what());
  }
}

void TrainLog::append(const TrainLog& other) {
  steps.insert(steps.end(), other.steps.begin(), other.steps.end());
  epochs.insert(epochs.end(), other.epochs.begin(), other.epochs.end());
  wall_seconds += other.wall_seconds;
}

std::string TrainLog::to_jsonl() const {
  std::string out;
  std::size_t s = 0;
  for (const auto& e : epochs) {
    for (; s < steps.size() && steps[s].stage == e.stage && steps[s].epoch == e.epoch; ++s) {
      const auto& r = steps[s];
      nlohmann::ordered_json j;
      j["stage"] = r.stage;
      j["epoch"] = r.epoch;
      j["step"] = r.step;
      j["task"] = std::string(traversal_tag(r.task));
      j["loss"] = r.loss;
      out += j.dump() + "\n";
    }
    nlohmann::ordered_json j;
    j["stage"] = e.stage;
    j["epoch"] = e.epoch;
    j["steps"] = e.steps;
    j["mean_loss"] = e.mean_loss;
    out += j.dump() + "\n";
  }
  return out;
}

Adam::Adam(const ParamStore& params, double lr, const TrainPlan& plan, std::vector<std::string> prefixes)
    : lr_(lr),
      beta1_(plan.beta1),
      beta2_(plan.beta2),
      eps_(plan.epsilon),
      prefixes_(std::move(prefixes)),
      m_(params.zeros_like()),
      v_(params.zeros_like()) {}

bool Adam::updates(std::string_view name) const {
  if (prefixes_.empty()) return true;
  for (const auto& p : prefixes_) {
    if (name.substr(0, p.size()) == p) return true;
  }
  return false;
}

void Adam::step(ParamStore& params, const ParamStore& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, value] : params) {
    if (!updates(name)) continue;
    const Matrix& g = grads.at(name);
    Matrix& m = m_.at(name);
    Matrix& v = v_.at(name);
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    value.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

double clip_global_norm(ParamStore& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
    const double scale = max_norm / norm;
    for (auto& [name, g] : grads) g *= scale;
  }
  return norm;
}

TrainLog pretrain_multitask(Model& model, const TaskDatasets& datasets, const TrainPlan& plan,
                            const EpochCallback& on_epoch) {
  plan.validate();
  for (Traversal t : kAllTraversals) {
    if (dataset_for(datasets, t).empty()) {
      throw Error(ErrorKind::EmptyTaskDataset, std::string(traversal_tag(t)) + "-order dataset is empty");
    }
    if (!model.has_decoder(t)) {
      throw Error(ErrorKind::UnknownTask, "model has no " + std::string(traversal_tag(t)) + " decoder");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  TrainLog log;
  Stage stage{model, Adam(model.params, plan.pretrain_lr, plan), model.params.zeros_like(),
              stage_rng(plan.seed, 1, 1), plan.clip_norm};
  Rng order_rng = stage_rng(plan.seed, 1, 0);
  int step = 0;
  for (int epoch = 0; epoch < plan.pretrain_epochs; ++epoch) {
    std::array<std::vector<std::vector<std::size_t>>, 3> batches;
    std::size_t rounds = 0;
    for (Traversal t : kAllTraversals) {
      auto& b = batches[static_cast<int>(t)];
      b = make_batches(dataset_for(datasets, t).size(), plan.batch_size, plan.shuffle, order_rng);
      rounds = std::max(rounds, b.size());
    }
    EpochRecord summary{"pretrain", epoch, 0, 0.0};
    for (std::size_t r = 0; r < rounds; ++r) {
      for (Traversal t : kAllTraversals) {
        const auto& b = batches[static_cast<int>(t)];
        if (r >= b.size()) continue;
        double batch_loss = stage.run_batch(dataset_for(datasets, t), b[r]);
        log.steps.push_back({"pretrain", epoch, step++, t, batch_loss});
        summary.mean_loss += batch_loss;
        ++summary.steps;
      }
    }
    if (summary.steps > 0) summary.mean_loss /= summary.steps;
    log.epochs.push_back(summary);
    if (on_epoch) on_epoch(summary);
  }
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return log;
}

TrainLog finetune(Model& model, const std::vector<TaskExample>& preorder, const TrainPlan& plan,
                  const EpochCallback& on_epoch) {
  plan.validate();
  if (preorder.empty()) throw Error(ErrorKind::EmptyTaskDataset, "pre-order dataset is empty");
  for (const auto& ex : preorder) {
    if (ex.task != Traversal::PreOrder) {
      throw Error(ErrorKind::UnknownTask, "fine-tuning takes pre-order examples only");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  TrainLog log;
  Stage stage{model,
              Adam(model.params, plan.finetune_lr, plan,
                   {std::string(kEncoderPrefix), decoder_prefix(Traversal::PreOrder)}),
              model.params.zeros_like(), stage_rng(plan.seed, 2, 1), plan.clip_norm};
  Rng order_rng = stage_rng(plan.seed, 2, 0);
  int step = 0;
  for (int epoch = 0; epoch < plan.finetune_epochs; ++epoch) {
    EpochRecord summary{"finetune", epoch, 0, 0.0};
    for (const auto& batch : make_batches(preorder.size(), plan.batch_size, plan.shuffle, order_rng)) {
      double batch_loss = stage.run_batch(preorder, batch);
      log.steps.push_back({"finetune", epoch, step++, Traversal::PreOrder, batch_loss});
      summary.mean_loss += batch_loss;
      ++summary.steps;
    }
    summary.mean_loss /= summary.steps;
    log.epochs.push_back(summary);
    if (on_epoch) on_epoch(summary);
  }
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return log;
}

}  // namespace mmtm
