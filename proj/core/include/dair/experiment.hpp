#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dair/trainer.hpp"

namespace dair {

// Which learner an experiment runs: the attention architecture with the
// overlap penalty (dair), the same architecture without it (attention), or a
// fixed-width concatenation MLP (mlp).
enum class Method { dair, attention, mlp };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

// One experiment: environment, learner, schedule and bookkeeping. Budgets in
// `stages` and `max_env_steps` are full-scale numbers; `desk_scale` multiplies
// them when the trainer is built so the same file describes both scales.
struct ExperimentConfig {
  Method method = Method::dair;
  EnvConfig env;
  int embed_dim = 16;
  DairConfig dair;
  SacConfig sac;
  std::vector<StageConfig> stages;  // unscaled budgets; empty: single stage
  double desk_scale = 0.02;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::string out_dir = "runs/experiment";

  long max_env_steps = 5'000'000;  // unscaled, like the stage budgets
  int eval_every_episodes = 50;
  int eval_episodes = 20;
  double early_stop_success = -1.0;
  int checkpoint_every_episodes = 0;
  bool keep_alpha_trace = false;

  // Scaled, validated trainer inputs. The method decides the architecture.
  TrainerConfig trainer_config() const;
  TrainSettings train_settings(const std::string& run_dir) const;
};

ExperimentConfig experiment_defaults();

// Parses a config with defaults for every absent key. `overrides` are dotted
// "key.path=value" pairs applied after the file (command line wins). Throws
// std::invalid_argument naming the offending key for unknown keys, type
// mismatches, a missing "task", or a violated method invariant.
ExperimentConfig parse_experiment(const std::string& json_text,
                                  const std::vector<std::string>& overrides = {});
ExperimentConfig parse_experiment_file(const std::string& path,
                                       const std::vector<std::string>& overrides = {});

// Full materialization: every value in effect, defaults included. Parsing the
// result yields an identical experiment.
std::string resolved_json(const ExperimentConfig& cfg);

// Toolchain + version stamp for reproducibility manifests; no timestamps.
std::string build_id();

// FNV-1a over the resolved config text, hex encoded.
std::string config_hash(const std::string& resolved);

}  // namespace dair
