#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stsreg/data.hpp"
#include "stsreg/encoder.hpp"
#include "stsreg/label_map.hpp"
#include "stsreg/losses.hpp"
#include "stsreg/training.hpp"

namespace stsreg::cli {

/// One entry of the stage plan. Unset fields fall back to the run-level values.
struct StagePlan {
  Stage stage = Stage::Joint;
  std::optional<std::filesystem::path> data;
  std::optional<LossSpec> loss;
  TrainConfig train;
};

/// A declarative training run, read from JSON.
///
///   {
///     "name": "bert-smooth-k2",
///     "data": {"train": "train.tsv", "dev": "dev.tsv",
///              "labels": {"categories": [...], "start": 0, "interval": 1},
///              "score_range": [0, 5], "positive_threshold": 4.0},
///     "loss": {"kind": "smooth_k2", "k": 2.0, "x0": 0.25, "d": 1.0},
///     "model": {"dim": 32, "mode": "uv_absdiff", "embedding_scale": 0.05, "bias": 2.5},
///     "train": {"batch_size": 16, "epochs": 1, "learning_rate": 0.1, ...},
///     "stages": [{"stage": "head_only", "data": "nli.tsv", "epochs": 2}, {"stage": "joint"}],
///     "seed": 0,
///     "output_dir": "runs/example"
///   }
///
/// Unknown keys anywhere are rejected. Relative data paths resolve against the
/// directory holding the config file.
struct RunConfig {
  std::string name = "run";
  std::filesystem::path train_data;
  std::filesystem::path dev_data;
  std::optional<LabelMapping> labels;
  std::optional<ScoreRange> score_range;
  double positive_threshold = 4.0;
  LossSpec loss = LossSpec::smooth_k2(2.0, 0.25, 1.0);
  std::size_t dim = 32;
  FeatureMode mode = FeatureMode::UVAbsDiff;
  double embedding_scale = 0.05;
  std::optional<double> bias;  ///< regression head; absent means the midpoint of the first stage's targets
  std::vector<StagePlan> stages;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";

  /// Normalized JSON echo (every default made explicit), used in run manifests.
  std::string to_json() const;
};

/// Parses and fully validates a config. Throws InvalidInput naming the offending key.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Checks the cross-field constraints and that every referenced file exists.
void validate(const RunConfig& config);

}  // namespace stsreg::cli
