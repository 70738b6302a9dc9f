#include "stsreg_cli/runner.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stsreg/checkpoint.hpp"
#include "stsreg/error.hpp"
#include "stsreg/eval.hpp"

namespace stsreg::cli {

namespace {

using Json = nlohmann::ordered_json;

std::vector<std::string> texts_of(const Dataset& ds) {
  std::vector<std::string> out;
  out.reserve(ds.size() * 2);
  for (const auto& p : ds.pairs()) {
    out.push_back(p.s1);
    out.push_back(p.s2);
  }
  return out;
}

std::string history_csv(const std::vector<StageOutcome>& stages) {
  std::string out = "stage,step,epoch,train_loss,dev_spearman\n";
  for (const auto& s : stages) {
    const std::string csv = format_history_csv(s.result.history);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
      out += std::string(to_string(s.stage)) + "," + line + "\n";
    }
  }
  return out;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Dataset load_config_dataset(const std::filesystem::path& path, const RunConfig& config) {
  return load_tsv_auto(path, config.score_range, config.labels, path.stem().string());
}

RunOutcome run_training(const RunConfig& config) {
  validate(config);
  const Dataset dev = load_config_dataset(config.dev_data, config);

  std::vector<Dataset> stage_data;
  std::vector<std::string> texts;
  for (const auto& s : config.stages) {
    stage_data.push_back(load_config_dataset(s.data ? *s.data : config.train_data, config));
    auto t = texts_of(stage_data.back());
    texts.insert(texts.end(), t.begin(), t.end());
  }

  const bool classification = (config.stages.front().loss ? *config.stages.front().loss : config.loss).kind() ==
                              LossKind::CrossEntropy;
  Model model;
  model.vocab = Vocabulary::build(texts);
  model.max_tokens = config.stages.front().train.max_tokens;
  model.mapping = config.labels;
  InitOptions init;
  init.dim = config.dim;
  init.mode = config.mode;
  init.head = classification ? HeadKind::Classification : HeadKind::Regression;
  init.classes = classification ? config.labels->size() : 1;
  init.embedding_scale = config.embedding_scale;
  init.seed = config.seed;

  RunOutcome out;
  Model current = model;
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const StagePlan& plan = config.stages[i];
    const LossSpec& loss = plan.loss ? *plan.loss : config.loss;
    current.max_tokens = plan.train.max_tokens;
    const TrainData data =
        loss.kind() == LossKind::InfoNCE
            ? make_contrastive_data(stage_data[i], current.vocab, plan.train.max_tokens, config.positive_threshold)
            : make_train_data(stage_data[i], current.vocab, plan.train.max_tokens, config.labels);
    if (data.examples.empty()) {
      throw InvalidInput("stage " + std::to_string(i) + " has no training examples");
    }
    if (i == 0) {
      // Centering the initial predictions keeps early clamping from freezing the head.
      auto [low, high] = data.target_range;
      if (loss.kind() == LossKind::InfoNCE) {  // contrastive targets say nothing about the head
        low = config.labels ? config.labels->lowest() : config.score_range ? config.score_range->low : 0.0;
        high = config.labels ? config.labels->highest() : config.score_range ? config.score_range->high : 0.0;
      }
      if (!classification) {
        init.bias = config.bias.value_or((low + high) / 2.0);
      }
      current.params = init_params(current.vocab.size(), init);
    }
    StageOutcome stage{plan.stage, train(current, data, dev, plan.train, loss, plan.stage)};
    current = stage.result.best;
    out.stages.push_back(std::move(stage));
  }

  out.model = current;
  out.dev_spearman = out.stages.back().result.best_dev_spearman;
  out.checkpoint = serialize_model(out.model);
  out.history = history_csv(out.stages);

  Json manifest;
  manifest["tool"] = "stsreg";
  manifest["config"] = Json::parse(config.to_json());
  Json stages = Json::array();
  for (const auto& s : out.stages) {
    stages.push_back({{"stage", std::string(to_string(s.stage))},
                      {"steps", s.result.history.empty() ? 0 : s.result.history.back().step},
                      {"best_step", s.result.best_step},
                      {"best_dev_spearman", optional_number(s.result.best_dev_spearman)}});
  }
  manifest["stages"] = stages;
  manifest["dev_spearman"] = optional_number(out.dev_spearman);
  manifest["vocab_size"] = out.model.vocab.size();
  manifest["checkpoint_fnv1a"] = hex_digest(out.checkpoint);
  manifest["history_fnv1a"] = hex_digest(out.history);
  out.manifest = manifest.dump(2) + "\n";
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) {
      throw IoError("cannot write '" + tmp.string() + "'");
    }
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) {
      throw IoError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

void write_run(const RunOutcome& outcome, const RunConfig& config, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  }
  write_file_atomic(dir / "checkpoint.json", outcome.checkpoint);
  write_file_atomic(dir / "history.csv", outcome.history);
  write_file_atomic(dir / "manifest.json", outcome.manifest);
  if (config.labels) {
    write_file_atomic(dir / "mapping.json", config.labels->to_json() + "\n");
  }
}

}  // namespace stsreg::cli
