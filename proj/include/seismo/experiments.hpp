#pragma once

#include <memory>
#include <string>
#include <vector>

#include "seismo/augment.hpp"
#include "seismo/config.hpp"
#include "seismo/data.hpp"
#include "seismo/eval.hpp"
#include "seismo/model.hpp"
#include "seismo/train.hpp"

namespace seismo::experiments {

// Full experiment description; sections mirror the config file schema.
struct ExperimentConfig {
  // [experiment]
  std::string task = "distance";  // model tasks plus "location" (eval only)
  model::Variant variant = model::Variant::full;
  int n_layers = 3;
  uint64_t seed = 42;
  std::string checkpoint;  // pretrained GPT-2 weights (safetensors)
  std::string out_dir = "runs/exp";
  std::string device = "cpu";
  // [data]
  std::string manifest;
  int64_t pad_multiple = 64;
  int64_t pad_to = 0;  // explicit padded length; 0 = next multiple
  // [split]
  data::SplitSpec split;
  std::string split_setting = "standard";
  // [scaling]
  data::ScalingRanges scaling;
  // [train]
  train::TrainConfig train;
  // [augment]
  augment::AugmentationSpec aug;
  // [eval]
  eval::EvalConfig eval;
  std::string azimuth_checkpoint;   // task=location inputs
  std::string distance_checkpoint;
  // [synth]
  data::SynthDatasetConfig synth;
  // [matrix]
  std::vector<std::string> matrix_variants;
  std::vector<uint64_t> matrix_seeds;
  int matrix_epochs = 1;

  static ExperimentConfig from_ini(const config::Ini& ini);
  static ExperimentConfig from_file(
      const std::string& path, const std::vector<std::string>& overrides = {});
  config::Ini to_ini() const;

  model::Task model_task() const;       // throws for "location"
  model::ModelConfig model_config() const;
};

// The config-file schema: every legal (section, key) pair. Used both for
// unknown-key detection and for resolving bare overrides.
const std::vector<std::pair<std::string, std::string>>& config_schema();

// Builds the model for an experiment; the checkpoint may be null for the
// variants that never read it (asserted in tests via a counting stub).
std::unique_ptr<model::SeisMoLLM> build_variant(
    const ExperimentConfig& cfg, const model::CheckpointSource* checkpoint);

// Few-shot split: small train/val fractions, remainder to eval.
data::SplitResult few_shot_split(const data::DatasetManifest& manifest,
                                 double train_fraction, double val_fraction,
                                 uint64_t seed);

// Locates the pretrained weight file: explicit config value, then
// $SEISMOLLM_CACHE/gpt2.safetensors. Empty when neither resolves.
std::string resolve_pretrained_checkpoint(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Orchestration used by the CLI verbs
// ---------------------------------------------------------------------------

struct RunResult {
  std::string out_dir;
  std::string checkpoint_path;  // trained model archive
  std::string report_dir;
  train::TrainHistory history;
};

std::string run_synth(const ExperimentConfig& cfg);  // returns manifest path
RunResult run_train(const ExperimentConfig& cfg);
RunResult run_eval(const ExperimentConfig& cfg);
std::vector<RunResult> run_matrix(const ExperimentConfig& base);

// Writes the fully resolved config next to a run's outputs.
void write_resolved_config(const ExperimentConfig& cfg,
                           const std::string& out_dir);

}  // namespace seismo::experiments
