#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stsreg/encoder.hpp"
#include "stsreg/training.hpp"
#include "stsreg_cli/run_config.hpp"

namespace stsreg::cli {

struct StageOutcome {
  Stage stage = Stage::Joint;
  TrainResult result;
};

/// Everything a training run produces, already rendered to the bytes written to disk.
struct RunOutcome {
  Model model;
  std::vector<StageOutcome> stages;
  std::optional<double> dev_spearman;
  std::string checkpoint;  ///< serialized best model
  std::string history;     ///< CSV with a leading stage column
  std::string manifest;    ///< JSON: config echo, per-stage summary, checkpoint digest
};

/// Loads the data, builds the vocabulary from the training files, initializes the
/// model from config.seed and runs every stage in order, each starting from the
/// previous stage's best checkpoint.
RunOutcome run_training(const RunConfig& config);

/// Writes checkpoint.json, history.csv, manifest.json (and mapping.json when the
/// config has labels) into `dir`, creating it as needed.
void write_run(const RunOutcome& outcome, const RunConfig& config, const std::filesystem::path& dir);

/// Dataset from a config path: continuous with config.score_range (observed range
/// when unset) or categorical with config.labels.
Dataset load_config_dataset(const std::filesystem::path& path, const RunConfig& config);

/// Writes `contents` to a sibling temporary and renames it into place, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace stsreg::cli
