#include "stsreg_cli/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stsreg/error.hpp"

namespace stsreg::cli {

namespace {

using Json = nlohmann::ordered_json;

void require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) {
    throw InvalidInput("config: '" + where + "' must be an object");
  }
}

void reject_unknown(const Json& j, const std::vector<std::string_view>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) {
      known = known || key == a;
    }
    if (!known) {
      throw InvalidInput("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
T get(const Json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw InvalidInput("config: '" + where + "." + key + "' has the wrong type");
  }
}

double get_number(const Json& j, const std::string& key, const std::string& where) {
  if (!j.at(key).is_number()) {
    throw InvalidInput("config: '" + where + "." + key + "' must be a number");
  }
  return j.at(key).get<double>();
}

std::size_t get_count(const Json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw InvalidInput("config: '" + where + "." + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

LossSpec parse_loss(const Json& j, double default_d, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, {"kind", "k", "x0", "d", "tau"}, where);
  if (!j.contains("kind")) {
    throw InvalidInput("config: '" + where + ".kind' is required");
  }
  const LossKind kind = parse_loss_kind(get<std::string>(j, "kind", where));
  const double k = j.contains("k") ? get_number(j, "k", where) : 1.0;
  const double x0 = j.contains("x0") ? get_number(j, "x0", where) : 0.0;
  const double d = j.contains("d") ? get_number(j, "d", where) : default_d;
  const double tau = j.contains("tau") ? get_number(j, "tau", where) : LossSpec::kDefaultTau;
  const bool shaped = kind == LossKind::TranslatedReLU || kind == LossKind::SmoothK2;
  if (!shaped && (j.contains("k") || j.contains("x0"))) {
    throw InvalidInput("config: '" + where + "': k and x0 apply only to translated_relu and smooth_k2");
  }
  if (kind != LossKind::InfoNCE && j.contains("tau")) {
    throw InvalidInput("config: '" + where + ".tau' applies only to info_nce");
  }
  try {
    return LossSpec(kind, k, x0, d, tau);
  } catch (const InvalidInput& e) {
    throw InvalidInput("config: '" + where + "': " + e.what());
  }
}

void apply_train_fields(const Json& j, TrainConfig& c, const std::string& where) {
  if (j.contains("batch_size")) c.batch_size = get_count(j, "batch_size", where);
  if (j.contains("epochs")) c.epochs = get_count(j, "epochs", where);
  if (j.contains("learning_rate")) c.learning_rate = get_number(j, "learning_rate", where);
  if (j.contains("eval_every")) c.eval_every = get_count(j, "eval_every", where);
  if (j.contains("max_tokens")) c.max_tokens = get_count(j, "max_tokens", where);
  if (j.contains("clamp_predictions")) c.clamp_predictions = get<bool>(j, "clamp_predictions", where);
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(get<std::string>(j, "optimizer", where));
}

const std::vector<std::string_view> kTrainKeys = {
    "batch_size", "epochs", "learning_rate", "eval_every", "max_tokens", "clamp_predictions", "optimizer"};

Json loss_json(const LossSpec& loss) {
  Json j;
  j["kind"] = std::string(to_string(loss.kind()));
  if (loss.kind() == LossKind::TranslatedReLU || loss.kind() == LossKind::SmoothK2) {
    j["k"] = loss.k();
    j["x0"] = loss.x0();
  }
  j["d"] = loss.d();
  if (loss.kind() == LossKind::InfoNCE) {
    j["tau"] = loss.tau();
  }
  return j;
}

Json train_json(const TrainConfig& c) {
  Json j;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["eval_every"] = c.eval_every;
  j["max_tokens"] = c.max_tokens;
  j["clamp_predictions"] = c.clamp_predictions;
  j["optimizer"] = std::string(to_string(c.optimizer));
  return j;
}

}  // namespace

std::string RunConfig::to_json() const {
  Json j;
  j["name"] = name;
  Json data;
  data["train"] = train_data.generic_string();
  data["dev"] = dev_data.generic_string();
  data["labels"] = labels ? Json::parse(labels->to_json()) : Json(nullptr);
  data["score_range"] = score_range ? Json::array({score_range->low, score_range->high}) : Json(nullptr);
  data["positive_threshold"] = positive_threshold;
  j["data"] = data;
  j["loss"] = loss_json(loss);
  j["model"] = {{"dim", dim},
                {"mode", std::string(stsreg::to_string(mode))},
                {"embedding_scale", embedding_scale},
                {"bias", bias ? Json(*bias) : Json(nullptr)}};
  Json plan = Json::array();
  for (const auto& s : stages) {
    Json e;
    e["stage"] = std::string(stsreg::to_string(s.stage));
    e["data"] = s.data ? Json(s.data->generic_string()) : Json(nullptr);
    e["loss"] = s.loss ? loss_json(*s.loss) : Json(nullptr);
    const Json fields = train_json(s.train);
    for (const auto& [k, v] : fields.items()) {
      e[k] = v;
    }
    plan.push_back(e);
  }
  j["stages"] = plan;
  j["seed"] = seed;
  return j.dump(2);
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  require_object(root, "<root>");
  reject_unknown(root, {"name", "data", "loss", "model", "train", "stages", "seed", "output_dir"}, "");

  RunConfig c;
  if (root.contains("name")) c.name = get<std::string>(root, "name", "<root>");
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) {
      throw InvalidInput("config: 'seed' must be a non-negative integer");
    }
    c.seed = root["seed"].get<std::uint64_t>();
  }
  if (root.contains("output_dir")) c.output_dir = get<std::string>(root, "output_dir", "<root>");

  if (!root.contains("data")) {
    throw InvalidInput("config: 'data' is required");
  }
  const Json& data = root["data"];
  require_object(data, "data");
  reject_unknown(data, {"train", "dev", "labels", "score_range", "positive_threshold"}, "data");
  for (const char* key : {"train", "dev"}) {
    if (!data.contains(key)) {
      throw InvalidInput(std::string("config: 'data.") + key + "' is required");
    }
  }
  c.train_data = resolve(base_dir, get<std::string>(data, "train", "data"));
  c.dev_data = resolve(base_dir, get<std::string>(data, "dev", "data"));
  if (data.contains("labels") && !data["labels"].is_null()) {
    try {
      c.labels = LabelMapping::from_json(data["labels"].dump());
    } catch (const InvalidInput& e) {
      throw InvalidInput(std::string("config: 'data.labels': ") + e.what());
    }
  }
  if (data.contains("score_range") && !data["score_range"].is_null()) {
    const auto& r = data["score_range"];
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number() ||
        !(r[0].get<double>() < r[1].get<double>())) {
      throw InvalidInput("config: 'data.score_range' must be [low, high] with low < high");
    }
    c.score_range = ScoreRange{r[0].get<double>(), r[1].get<double>()};
  }
  if (data.contains("positive_threshold")) {
    c.positive_threshold = get_number(data, "positive_threshold", "data");
  }

  const double default_d = c.labels ? c.labels->interval() : 1.0;
  if (root.contains("loss")) {
    c.loss = parse_loss(root["loss"], default_d, "loss");
  } else {
    c.loss = LossSpec::smooth_k2(2.0, 0.25, default_d);
  }

  if (root.contains("model")) {
    const Json& m = root["model"];
    require_object(m, "model");
    reject_unknown(m, {"dim", "mode", "embedding_scale", "bias"}, "model");
    if (m.contains("dim")) c.dim = get_count(m, "dim", "model");
    if (m.contains("mode")) c.mode = parse_feature_mode(get<std::string>(m, "mode", "model"));
    if (m.contains("embedding_scale")) c.embedding_scale = get_number(m, "embedding_scale", "model");
    if (m.contains("bias") && !m["bias"].is_null()) c.bias = get_number(m, "bias", "model");
  }

  TrainConfig base;
  if (root.contains("train")) {
    require_object(root["train"], "train");
    reject_unknown(root["train"], kTrainKeys, "train");
    apply_train_fields(root["train"], base, "train");
  }
  base.seed = c.seed;

  if (root.contains("stages")) {
    const Json& stages = root["stages"];
    if (!stages.is_array() || stages.empty()) {
      throw InvalidInput("config: 'stages' must be a non-empty array");
    }
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const std::string where = "stages[" + std::to_string(i) + "]";
      const Json& s = stages[i];
      require_object(s, where);
      for (const auto& [key, value] : s.items()) {
        const bool known = key == "stage" || key == "data" || key == "loss" ||
                           std::find(kTrainKeys.begin(), kTrainKeys.end(), key) != kTrainKeys.end();
        if (!known) {
          throw InvalidInput("config: unknown key '" + where + "." + key + "'");
        }
      }
      if (!s.contains("stage")) {
        throw InvalidInput("config: '" + where + ".stage' is required");
      }
      StagePlan plan;
      plan.stage = parse_stage(get<std::string>(s, "stage", where));
      if (s.contains("data") && !s["data"].is_null()) {
        plan.data = resolve(base_dir, get<std::string>(s, "data", where));
      }
      if (s.contains("loss") && !s["loss"].is_null()) {
        plan.loss = parse_loss(s["loss"], default_d, where + ".loss");
      }
      plan.train = base;
      apply_train_fields(s, plan.train, where);
      c.stages.push_back(std::move(plan));
    }
  } else {
    c.stages.push_back(StagePlan{Stage::Joint, std::nullopt, std::nullopt, base});
  }

  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  if (c.dim == 0) {
    throw InvalidInput("config: 'model.dim' must be positive");
  }
  if (!(c.embedding_scale > 0.0) || !std::isfinite(c.embedding_scale)) {
    throw InvalidInput("config: 'model.embedding_scale' must be positive");
  }
  if ((c.bias && !std::isfinite(*c.bias)) || !std::isfinite(c.positive_threshold)) {
    throw InvalidInput("config: 'model.bias' and 'data.positive_threshold' must be finite");
  }
  if (c.output_dir.empty()) {
    throw InvalidInput("config: 'output_dir' must not be empty");
  }
  std::vector<std::filesystem::path> files{c.train_data, c.dev_data};
  for (std::size_t i = 0; i < c.stages.size(); ++i) {
    const auto& s = c.stages[i];
    const std::string where = "stages[" + std::to_string(i) + "]";
    try {
      s.train.validate();
    } catch (const InvalidInput& e) {
      throw InvalidInput("config: '" + where + "': " + e.what());
    }
    const LossSpec& loss = s.loss ? *s.loss : c.loss;
    if (loss.kind() == LossKind::InfoNCE && s.stage == Stage::HeadOnly) {
      throw InvalidInput("config: '" + where + "': info_nce never reaches the head, so it needs the joint stage");
    }
    if (loss.kind() == LossKind::CrossEntropy && !c.labels) {
      throw InvalidInput("config: '" + where + "': cross_entropy needs 'data.labels'");
    }
    if (i > 0 && (loss.kind() == LossKind::CrossEntropy) != ((c.stages[0].loss ? *c.stages[0].loss : c.loss).kind() ==
                                                              LossKind::CrossEntropy)) {
      throw InvalidInput("config: '" + where + "': all stages must share one head kind (cross_entropy or not)");
    }
    if (s.data) {
      files.push_back(*s.data);
    }
  }
  for (const auto& f : files) {
    if (!std::filesystem::is_regular_file(f)) {
      throw InvalidInput("config: data file '" + f.string() + "' does not exist");
    }
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open config '" + path.string() + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

}  // namespace stsreg::cli
