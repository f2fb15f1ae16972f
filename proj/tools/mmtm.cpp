// mmtm: augment corpora, train, evaluate, sweep and ablate the multi-decoder
// expression-tree model.
//
// Exit codes: 0 success, 2 input error, 3 checkpoint/config mismatch,
// 4 numeric failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "mmtm/checkpoint.hpp"
#include "mmtm/dataset.hpp"
#include "mmtm/error.hpp"
#include "mmtm/eval.hpp"
#include "mmtm/pca.hpp"
#include "mmtm/pipeline.hpp"
#include "mmtm/synthetic.hpp"
#include "mmtm/train.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { kOk = 0, kInputError = 2, kMismatch = 3, kNumeric = 4 };

int exit_code_for(mmtm::ErrorKind kind) {
  using mmtm::ErrorKind;
  switch (kind) {
    case ErrorKind::CheckpointMismatch:
    case ErrorKind::BadCheckpoint:
      return kMismatch;
    case ErrorKind::NonFiniteLoss:
      return kNumeric;
    default:
      return kInputError;
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mmtm::Error(mmtm::ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw mmtm::Error(mmtm::ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

std::string file_hash(const fs::path& path) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : read_text(path)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mmtm::hash_hex(h);
}

mmtm::CorpusLoad load_or_fail(const fs::path& path) {
  if (!fs::exists(path)) throw mmtm::Error(mmtm::ErrorKind::Io, "corpus not found: " + path.string());
  auto load = mmtm::load_corpus(path);
  if (!load.quarantine.empty()) {
    std::cerr << "warning: " << load.quarantine.size() << " record(s) of " << path.string() << " quarantined\n";
  }
  return load;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw mmtm::Error(mmtm::ErrorKind::BadConfig, "not an integer list: " + text);
    }
  }
  return out;
}

// Largest head count <= wanted that divides d.
int heads_for(int d, int wanted) {
  for (int h = std::min(wanted, d); h > 1; --h) {
    if (d % h == 0) return h;
  }
  return 1;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("MMTM_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw mmtm::Error(mmtm::ErrorKind::BadConfig, "MMTM_SEED is not an integer");
    }
  }
  return 0;
}

// Options shared by train, sweep and ablate. A JSON config file supplies
// {"model": {...}, "plan": {...}}; explicit flags override it.
struct TrainingFlags {
  std::string config_path;
  std::optional<int> dim;
  std::optional<int> layers;
  std::optional<int> heads;
  std::optional<std::uint64_t> seed;
  std::optional<int> pretrain_epochs;
  std::optional<int> finetune_epochs;
  std::optional<double> pretrain_lr;
  std::optional<double> finetune_lr;
  std::optional<int> batch_size;
  std::optional<double> dropout;
  std::size_t min_count = 1;

  void attach(CLI::App& app, bool shape = true) {
    app.add_option("--config", config_path, "JSON file with \"model\" and \"plan\" objects");
    if (shape) {
      app.add_option("--dim", dim, "Model dimension");
      app.add_option("--layers", layers, "Encoder and decoder layers");
    }
    app.add_option("--heads", heads, "Attention heads");
    app.add_option("--seed", seed, "Seed (default: config file, then $MMTM_SEED, then 0)");
    app.add_option("--pretrain-epochs", pretrain_epochs);
    app.add_option("--finetune-epochs", finetune_epochs);
    app.add_option("--pretrain-lr", pretrain_lr);
    app.add_option("--finetune-lr", finetune_lr);
    app.add_option("--batch-size", batch_size);
    app.add_option("--dropout", dropout);
    app.add_option("--min-count", min_count, "Source words rarer than this map to UNK");
  }

  std::pair<mmtm::ModelConfig, mmtm::TrainPlan> resolve() const {
    mmtm::ModelConfig config;
    mmtm::TrainPlan plan;
    bool seed_from_file = false;
    if (!config_path.empty()) {
      auto j = nlohmann::json::parse(read_text(config_path), nullptr, false);
      if (j.is_discarded()) throw mmtm::Error(mmtm::ErrorKind::BadConfig, "config is not JSON: " + config_path);
      if (j.contains("model")) config = mmtm::ModelConfig::from_json(j["model"].dump());
      if (j.contains("plan")) plan = mmtm::TrainPlan::from_json(j["plan"].dump());
      seed_from_file = (j.contains("model") && j["model"].contains("seed")) ||
                       (j.contains("plan") && j["plan"].contains("seed"));
    }
    if (!seed_from_file) config.seed = plan.seed = default_seed();
    if (seed) config.seed = plan.seed = *seed;
    if (dim) config.d_model = *dim;
    if (layers) config.n_enc_layers = config.n_dec_layers = *layers;
    if (heads) config.n_heads = *heads;
    if (pretrain_epochs) plan.pretrain_epochs = *pretrain_epochs;
    if (finetune_epochs) plan.finetune_epochs = *finetune_epochs;
    if (pretrain_lr) plan.pretrain_lr = *pretrain_lr;
    if (finetune_lr) plan.finetune_lr = *finetune_lr;
    if (batch_size) plan.batch_size = *batch_size;
    if (dropout) config.dropout = *dropout;
    plan.validate();
    return {config, plan};
  }
};

void print_epoch(const mmtm::EpochRecord& e) {
  std::fprintf(stderr, "%-8s epoch %3d  steps %4d  loss %.6f\n", e.stage.c_str(), e.epoch + 1, e.steps, e.mean_loss);
}

// ---------------------------------------------------------------------------

struct AugmentArgs {
  std::string corpus;
  std::string out;
};

int cmd_augment(const AugmentArgs& args) {
  auto load = load_or_fail(args.corpus);
  fs::create_directories(args.out);
  mmtm::write_task_datasets(args.out, mmtm::augment_labels(load.records));
  mmtm::write_quarantine(fs::path(args.out) / "quarantine.jsonl", load.quarantine);
  std::cout << "accepted " << load.records.size() << " records, quarantined " << load.quarantine.size() << "; wrote "
            << 3 * load.records.size() << " task examples to " << args.out << "\n";
  return kOk;
}

struct TrainArgs {
  std::string corpus;
  std::string embeddings;
  std::string out;
  bool no_pretrain = false;
  TrainingFlags flags;
};

int cmd_train(const TrainArgs& args) {
  auto [config, plan] = args.flags.resolve();
  auto load = load_or_fail(args.corpus);
  if (load.records.empty()) throw mmtm::Error(mmtm::ErrorKind::MalformedRecord, "no accepted records in corpus");
  std::optional<mmtm::PretrainedEmbeddings> embeddings;
  if (!args.embeddings.empty()) embeddings = mmtm::load_embeddings_tsv(args.embeddings);

  const fs::path out(args.out);
  fs::create_directories(out);
  mmtm::write_quarantine(out / "quarantine.jsonl", load.quarantine);

  mmtm::PipelineOptions options;
  options.config = config;
  options.plan = plan;
  options.pretrain = !args.no_pretrain;
  options.embeddings = embeddings ? &*embeddings : nullptr;
  options.min_count = args.flags.min_count;

  // The manifest is written before any training starts.
  const mmtm::Vocab vocab = mmtm::build_vocab(load.records, options.min_count);
  const mmtm::ModelConfig resolved = mmtm::resolve_config(config, vocab, load.records);
  resolved.validate();
  ordered_json manifest;
  manifest["tool"] = "mmtm";
  manifest["version"] = kToolVersion;
  manifest["command"] = "train";
  manifest["config"] = ordered_json::parse(resolved.to_json());
  manifest["plan"] = ordered_json::parse(plan.to_json());
  manifest["pretrain"] = options.pretrain;
  manifest["seed"] = plan.seed;
  manifest["min_count"] = options.min_count;
  manifest["inputs"]["corpus"] = {{"path", args.corpus}, {"fnv1a64", file_hash(args.corpus)}};
  if (embeddings) {
    manifest["inputs"]["embeddings"] = {{"path", args.embeddings}, {"fnv1a64", file_hash(args.embeddings)}};
  }
  manifest["vocab_hash"] = mmtm::hash_hex(vocab.hash());
  ordered_json artifacts = {{"vocab", "vocab.json"}, {"train_log", "trainlog.jsonl"},
                            {"quarantine", "quarantine.jsonl"}};
  if (options.pretrain) artifacts["pretrain_checkpoint"] = "pretrain.ckpt";
  artifacts["finetune_checkpoint"] = "finetune.ckpt";
  manifest["artifacts"] = artifacts;
  write_text(out / "manifest.json", manifest.dump(1) + "\n");
  vocab.save(out / "vocab.json");

  auto on_stage = [&](std::string_view stage, const mmtm::Model& model, const mmtm::Vocab& v,
                      const mmtm::TrainLog& log) {
    mmtm::save_checkpoint(out / (std::string(stage) + ".ckpt"), model, v.hash());
    write_text(out / "trainlog.jsonl", log.to_jsonl());
  };
  auto result = mmtm::run_pipeline(load.records, options, on_stage, print_epoch);
  std::cerr << "trained on " << load.records.size() << " records (" << result.model.params.scalar_count()
            << " parameters, " << (result.pca_init ? "PCA" : "random") << " embeddings) in " << result.log.wall_seconds
            << " s\n";
  std::cout << "wrote " << (out / "finetune.ckpt").string() << "\n";
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string test;
  std::string vocab;
  std::string attention_out;
  std::string report;
};

std::string safe_file_name(const std::string& id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out.empty() ? "record" : out;
}

int cmd_eval(const EvalArgs& args) {
  const fs::path ckpt_path(args.checkpoint);
  auto ckpt = mmtm::load_checkpoint(ckpt_path);
  const fs::path vocab_path = args.vocab.empty() ? ckpt_path.parent_path() / "vocab.json" : fs::path(args.vocab);
  auto vocab = mmtm::Vocab::load(vocab_path);
  if (vocab.hash() != ckpt.vocab_hash) {
    throw mmtm::Error(mmtm::ErrorKind::CheckpointMismatch, "vocab " + vocab_path.string() + " (hash " +
                                                               mmtm::hash_hex(vocab.hash()) + ") does not match checkpoint (" +
                                                               mmtm::hash_hex(ckpt.vocab_hash) + ")");
  }
  if (static_cast<std::size_t>(ckpt.model.config.src_vocab_size) != vocab.source.size() ||
      static_cast<std::size_t>(ckpt.model.config.tgt_vocab_size) != vocab.target.size()) {
    throw mmtm::Error(mmtm::ErrorKind::CheckpointMismatch, "vocab sizes do not match the checkpoint config");
  }
  auto load = load_or_fail(args.test);
  auto report = mmtm::score(ckpt.model, vocab, load.records);
  const fs::path report_path =
      args.report.empty() ? ckpt_path.parent_path() / "eval_report.json" : fs::path(args.report);
  write_text(report_path, report.to_json());
  std::cout << report.render_table();
  std::cout << "report: " << report_path.string() << "\n";

  if (!args.attention_out.empty()) {
    fs::create_directories(args.attention_out);
    for (const auto& r : load.records) {
      auto att = mmtm::export_attention(ckpt.model, vocab, r, mmtm::Traversal::PreOrder);
      mmtm::write_attention_report(fs::path(args.attention_out) / (safe_file_name(r.id) + ".json"), att);
    }
    std::cout << "attention: " << load.records.size() << " file(s) in " << args.attention_out << "\n";
  }
  return kOk;
}

struct CompareArgs {
  std::string first;
  std::string second;
  std::string out;
};

int cmd_compare(const CompareArgs& args) {
  auto a = mmtm::EvalReport::from_json(read_text(args.first));
  auto b = mmtm::EvalReport::from_json(read_text(args.second));
  auto cmp = mmtm::compare_models(a, b);
  for (auto c : {mmtm::ComparisonClass::RR, mmtm::ComparisonClass::WR, mmtm::ComparisonClass::RW,
                 mmtm::ComparisonClass::WW}) {
    std::cout << mmtm::to_string(c) << " " << cmp.count(c) << "\n";
  }
  if (!args.out.empty()) write_text(args.out, cmp.to_json());
  return kOk;
}

struct SweepArgs {
  std::string corpus;
  std::string test;
  std::string embeddings;
  std::string dims = "32,64,128,256,768";
  std::string layers = "1,2";
  std::string inits;
  std::string out;
  bool restart = false;
  TrainingFlags flags;
};

int cmd_sweep(const SweepArgs& args) {
  auto [config, plan] = args.flags.resolve();
  auto train = load_or_fail(args.corpus);
  if (train.records.empty()) throw mmtm::Error(mmtm::ErrorKind::MalformedRecord, "no accepted records in corpus");
  auto test = args.test.empty() ? train : load_or_fail(args.test);
  std::optional<mmtm::PretrainedEmbeddings> embeddings;
  if (!args.embeddings.empty()) embeddings = mmtm::load_embeddings_tsv(args.embeddings);

  std::vector<std::string> inits;
  {
    std::string spec = args.inits.empty() ? (embeddings ? "scratch,pca" : "scratch") : args.inits;
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ',');) {
      if (item != "scratch" && item != "pca") throw mmtm::Error(mmtm::ErrorKind::BadConfig, "unknown init " + item);
      if (item == "pca" && !embeddings) throw mmtm::Error(mmtm::ErrorKind::BadConfig, "pca init needs --embeddings");
      inits.push_back(item);
    }
  }
  const auto dims = parse_int_list(args.dims);
  const auto layer_counts = parse_int_list(args.layers);

  const fs::path out(args.out);
  fs::create_directories(out);
  const fs::path csv_path = out / "sweep.csv";
  const fs::path manifest_path = out / "sweep_manifest.json";

  ordered_json settings;
  settings["corpus"] = file_hash(args.corpus);
  settings["test"] = args.test.empty() ? "corpus" : file_hash(args.test);
  settings["embeddings"] = embeddings ? file_hash(args.embeddings) : "none";
  settings["dims"] = dims;
  settings["layers"] = layer_counts;
  settings["inits"] = inits;
  settings["config"] = ordered_json::parse(config.to_json());
  settings["plan"] = ordered_json::parse(plan.to_json());
  settings["min_count"] = args.flags.min_count;

  ordered_json manifest;
  std::set<std::string> done;
  if (!args.restart && fs::exists(manifest_path)) {
    manifest = ordered_json::parse(read_text(manifest_path));
    // Key order is irrelevant when deciding whether settings match.
    if (nlohmann::json::parse(manifest.value("settings", ordered_json()).dump()) !=
        nlohmann::json::parse(settings.dump())) {
      throw mmtm::Error(mmtm::ErrorKind::CheckpointMismatch,
                        "existing sweep in " + out.string() + " used different settings (pass --restart)");
    }
    for (const auto& key : manifest["completed"]) done.insert(key.get<std::string>());
  } else {
    manifest = ordered_json{{"tool", "mmtm"}, {"version", kToolVersion}, {"settings", settings},
                            {"completed", ordered_json::array()}};
    write_text(csv_path, "dim,layers,init,accuracy\n");
    write_text(manifest_path, manifest.dump(1) + "\n");
  }

  for (int dim : dims) {
    for (int nl : layer_counts) {
      for (const auto& init : inits) {
        const std::string key = std::to_string(dim) + "," + std::to_string(nl) + "," + init;
        if (done.contains(key)) {
          std::cerr << "skip " << key << " (done)\n";
          continue;
        }
        mmtm::PipelineOptions options;
        options.config = config;
        options.config.d_model = dim;
        options.config.n_heads = heads_for(dim, config.n_heads);
        options.config.n_enc_layers = options.config.n_dec_layers = nl;
        options.plan = plan;
        options.embeddings = init == "pca" ? &*embeddings : nullptr;
        options.min_count = args.flags.min_count;
        auto result = mmtm::run_pipeline(train.records, options);
        auto report = mmtm::score(result.model, result.vocab, test.records);
        char acc[32];
        std::snprintf(acc, sizeof(acc), "%.6f", report.accuracy_exact().to_double());
        {
          std::ofstream csv(csv_path, std::ios::app);
          csv << key << "," << acc << "\n";
        }
        manifest["completed"].push_back(key);
        write_text(manifest_path, manifest.dump(1) + "\n");
        std::cerr << key << " accuracy " << acc << "\n";
      }
    }
  }
  std::cout << "wrote " << csv_path.string() << "\n";
  return kOk;
}

struct AblateArgs {
  std::string corpus;
  std::string test;
  std::string embeddings;
  std::string arm = "all";
  std::string out;
  TrainingFlags flags;
};

int cmd_ablate(const AblateArgs& args) {
  auto [config, plan] = args.flags.resolve();
  auto train = load_or_fail(args.corpus);
  if (train.records.empty()) throw mmtm::Error(mmtm::ErrorKind::MalformedRecord, "no accepted records in corpus");
  auto test = args.test.empty() ? train : load_or_fail(args.test);
  std::optional<mmtm::PretrainedEmbeddings> embeddings;
  if (!args.embeddings.empty()) embeddings = mmtm::load_embeddings_tsv(args.embeddings);

  std::vector<mmtm::AblationArm> arms;
  if (args.arm == "all") {
    arms = {mmtm::AblationArm::Full, mmtm::AblationArm::NoPretrain, mmtm::AblationArm::Dim768,
            mmtm::AblationArm::ScratchEmbeddings};
  } else if (auto arm = mmtm::ablation_arm_from_string(args.arm)) {
    arms = {*arm};
  } else {
    throw mmtm::Error(mmtm::ErrorKind::BadConfig, "unknown arm " + args.arm);
  }

  mmtm::PipelineOptions full;
  full.config = config;
  full.plan = plan;
  full.embeddings = embeddings ? &*embeddings : nullptr;
  full.min_count = args.flags.min_count;
  if (!args.out.empty()) fs::create_directories(args.out);
  std::printf("%-20s %6s %9s %9s\n", "arm", "dim", "pretrain", "accuracy");
  for (auto arm : arms) {
    auto result = mmtm::run_ablation(arm, train.records, test.records, full);
    std::printf("%-20s %6d %9s %9.2f\n", std::string(mmtm::to_string(arm)).c_str(), result.config.d_model,
                result.pretrained ? "yes" : "no", result.report.accuracy_exact().to_double() * 100.0);
    if (!args.out.empty()) {
      write_text(fs::path(args.out) / ("ablation_" + std::string(mmtm::to_string(arm)) + ".json"), result.to_json());
    }
  }
  return kOk;
}

struct SynthArgs {
  std::size_t n = 50;
  std::uint64_t seed = 0;
  std::string out;
  std::string embeddings_out;
  int width = 768;
};

int cmd_synth(const SynthArgs& args) {
  auto raw = mmtm::synthetic_corpus(args.n, args.seed);
  mmtm::write_corpus(args.out, raw);
  std::cout << "wrote " << raw.size() << " records to " << args.out << "\n";
  if (!args.embeddings_out.empty()) {
    std::vector<mmtm::MwpRecord> records;
    for (const auto& r : raw) records.push_back(mmtm::make_record(r));
    auto vocab = mmtm::build_vocab(records);
    std::vector<std::string> words;
    for (const auto& t : vocab.source.tokens()) {
      if (!mmtm::TokenTable::is_reserved(t) && !mmtm::placeholder_index(t)) words.push_back(t);
    }
    mmtm::write_embeddings_tsv(args.embeddings_out, mmtm::synthetic_embeddings(words, args.width, args.seed));
    std::cout << "wrote " << words.size() << " embedding rows to " << args.embeddings_out << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-decoder transformer for math word problems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  int rc = kOk;

  AugmentArgs augment;
  auto* sub_augment = app.add_subcommand("augment", "Write pre/in/post-order task datasets for a corpus");
  sub_augment->add_option("--corpus", augment.corpus, "JSONL corpus")->required();
  sub_augment->add_option("--out", augment.out, "Output directory")->required();

  TrainArgs train;
  auto* sub_train = app.add_subcommand("train", "Multi-task pre-training then pre-order fine-tuning");
  sub_train->add_option("--corpus", train.corpus, "JSONL training corpus")->required();
  sub_train->add_option("--embeddings", train.embeddings, "Pretrained embedding TSV for PCA init");
  sub_train->add_flag("--no-pretrain", train.no_pretrain, "Skip the multi-task stage");
  sub_train->add_option("--out", train.out, "Output directory")->required();
  train.flags.attach(*sub_train);

  EvalArgs eval;
  auto* sub_eval = app.add_subcommand("eval", "Score a checkpoint on a test corpus");
  sub_eval->add_option("--checkpoint", eval.checkpoint)->required();
  sub_eval->add_option("--test", eval.test, "JSONL test corpus")->required();
  sub_eval->add_option("--vocab", eval.vocab, "Vocab JSON (default: vocab.json next to the checkpoint)");
  sub_eval->add_option("--attention-out", eval.attention_out, "Directory for per-record attention JSON");
  sub_eval->add_option("--report", eval.report, "Report path (default: eval_report.json next to the checkpoint)");

  CompareArgs compare;
  auto* sub_compare = app.add_subcommand("compare", "RR/WR/RW/WW classes for two eval reports (first, second)");
  sub_compare->add_option("--first", compare.first, "Report of the first (baseline) model")->required();
  sub_compare->add_option("--second", compare.second, "Report of the second model")->required();
  sub_compare->add_option("--out", compare.out, "Per-record classes as JSON");

  SweepArgs sweep;
  auto* sub_sweep = app.add_subcommand("sweep", "Accuracy over model dimensions, layer counts and inits");
  sub_sweep->add_option("--corpus", sweep.corpus)->required();
  sub_sweep->add_option("--test", sweep.test, "Test corpus (default: the training corpus)");
  sub_sweep->add_option("--embeddings", sweep.embeddings);
  sub_sweep->add_option("--dims", sweep.dims, "Comma-separated dimensions")->capture_default_str();
  sub_sweep->add_option("--layers", sweep.layers, "Comma-separated layer counts")->capture_default_str();
  sub_sweep->add_option("--inits", sweep.inits, "scratch,pca (default: pca only with --embeddings)");
  sub_sweep->add_option("--out", sweep.out)->required();
  sub_sweep->add_flag("--restart", sweep.restart, "Discard completed rows");
  sweep.flags.attach(*sub_sweep, false);

  AblateArgs ablate;
  auto* sub_ablate = app.add_subcommand("ablate", "Run ablation arms: full, no_pretrain, dim768, scratch_embeddings");
  sub_ablate->add_option("--corpus", ablate.corpus)->required();
  sub_ablate->add_option("--test", ablate.test, "Test corpus (default: the training corpus)");
  sub_ablate->add_option("--embeddings", ablate.embeddings);
  sub_ablate->add_option("--arm", ablate.arm, "Arm name or 'all'")->capture_default_str();
  sub_ablate->add_option("--out", ablate.out, "Directory for per-arm JSON reports");
  ablate.flags.attach(*sub_ablate);

  SynthArgs synth;
  auto* sub_synth = app.add_subcommand("synth", "Write a templated synthetic corpus");
  sub_synth->add_option("--n", synth.n)->capture_default_str();
  sub_synth->add_option("--seed", synth.seed)->capture_default_str();
  sub_synth->add_option("--out", synth.out)->required();
  sub_synth->add_option("--embeddings-out", synth.embeddings_out, "Also write random embeddings for its words");
  sub_synth->add_option("--width", synth.width, "Embedding width")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (sub_augment->parsed()) rc = cmd_augment(augment);
    if (sub_train->parsed()) rc = cmd_train(train);
    if (sub_eval->parsed()) rc = cmd_eval(eval);
    if (sub_compare->parsed()) rc = cmd_compare(compare);
    if (sub_sweep->parsed()) rc = cmd_sweep(sweep);
    if (sub_ablate->parsed()) rc = cmd_ablate(ablate);
    if (sub_synth->parsed()) rc = cmd_synth(synth);
  } catch (const mmtm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return rc;
}
