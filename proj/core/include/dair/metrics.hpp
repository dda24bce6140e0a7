#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dair/planar_env.hpp"

namespace dair {

// Balance and safety criteria for one episode. Domination is the larger
// agent's share of all manipulating steps (50 = balanced); episodes where
// nobody manipulated anything report the neutral 50 and are flagged.
struct EpisodeMetrics {
  std::vector<int> manipulating_steps;
  bool zero_manipulation = false;
  double domination_rate = 50.0;
  double conflict_rate = 0.0;
  int finish_steps = 0;
  bool success = false;
  double mean_attention_overlap = 0.0;
  std::vector<std::vector<std::vector<double>>> alpha_trace;  // [step][agent][entity], optional
};

double domination_rate_from_counts(std::span<const int> counts);
double domination_rate(const std::vector<std::vector<bool>>& per_agent_flags);

// Percent of steps whose gripper distance is strictly below the threshold.
double conflict_rate(std::span<const double> gripper_distances, double threshold);

// Steps until success; the horizon when the episode failed.
int finish_steps(std::optional<int> success_step, int horizon);

struct EpisodeInputs {
  std::vector<StepInfo> infos;
  std::vector<std::vector<std::vector<double>>> alphas;  // [step][agent][entity], may be empty
  std::optional<int> success_step;
  int horizon = 0;
  double conflict_threshold = 0.06;
  bool keep_alpha_trace = false;
};

EpisodeMetrics build_episode_metrics(const EpisodeInputs& in);

struct SummaryRow {
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
};

// Mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

// Per-run summary: success_rate (%), domination_rate, conflict_rate,
// finish_steps and mean_overlap, each mean +- population std over episodes.
std::vector<SummaryRow> aggregate(std::span<const EpisodeMetrics> episodes);

// Across-seed summary: each seed contributes its per-metric mean; rows hold
// the mean +- population std of those per-seed means.
std::vector<SummaryRow> aggregate_seeds(const std::vector<std::vector<EpisodeMetrics>>& per_seed);

std::string summary_to_csv(std::span<const SummaryRow> rows);
std::string summary_to_plot_csv(const std::string& method, std::span<const SummaryRow> rows);

}  // namespace dair
