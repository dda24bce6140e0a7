#include "dair/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dair/dair_loss.hpp"

namespace dair {

double domination_rate_from_counts(std::span<const int> counts) {
  if (counts.empty()) throw std::invalid_argument("domination_rate: no agents");
  long total = 0;
  int best = 0;
  for (int c : counts) {
    if (c < 0) throw std::invalid_argument("domination_rate: negative count");
    total += c;
    best = std::max(best, c);
  }
  if (total == 0) return 50.0;
  return 100.0 * static_cast<double>(best) / static_cast<double>(total);
}

double domination_rate(const std::vector<std::vector<bool>>& per_agent_flags) {
  if (per_agent_flags.empty()) throw std::invalid_argument("domination_rate: no agents");
  const std::size_t steps = per_agent_flags.front().size();
  std::vector<int> counts;
  for (const auto& flags : per_agent_flags) {
    if (flags.size() != steps)
      throw std::invalid_argument("domination_rate: agents disagree on step count (" +
                                  std::to_string(flags.size()) + " vs " + std::to_string(steps) + ")");
    int c = 0;
    for (bool f : flags) c += f ? 1 : 0;
    counts.push_back(c);
  }
  return domination_rate_from_counts(counts);
}

double conflict_rate(std::span<const double> gripper_distances, double threshold) {
  if (gripper_distances.empty()) return 0.0;
  std::size_t below = 0;
  for (double d : gripper_distances)
    if (d < threshold) ++below;
  return 100.0 * static_cast<double>(below) / static_cast<double>(gripper_distances.size());
}

int finish_steps(std::optional<int> success_step, int horizon) {
  if (!success_step) return horizon;
  if (*success_step < 0 || *success_step > horizon)
    throw std::invalid_argument("finish_steps: success step " + std::to_string(*success_step) +
                                " outside [0, " + std::to_string(horizon) + "]");
  return *success_step;
}

EpisodeMetrics build_episode_metrics(const EpisodeInputs& in) {
  EpisodeMetrics out;
  if (in.infos.empty() && !in.success_step) {
    throw std::invalid_argument("episode metrics: no steps and no success marker");
  }
  const std::size_t n_agents = in.infos.empty() ? 1 : in.infos.front().region_of_agent.size();

  out.manipulating_steps.assign(n_agents, 0);
  std::vector<double> distances;
  distances.reserve(in.infos.size());
  for (const StepInfo& info : in.infos) {
    if (info.region_of_agent.size() != n_agents)
      throw std::invalid_argument("episode metrics: step with inconsistent agent count");
    for (std::size_t i = 0; i < n_agents; ++i)
      if (info.region_of_agent[i] >= 0) ++out.manipulating_steps[i];
    distances.push_back(info.gripper_distance);
  }

  long total = 0;
  for (int c : out.manipulating_steps) total += c;
  out.zero_manipulation = total == 0;
  out.domination_rate = domination_rate_from_counts(out.manipulating_steps);
  out.conflict_rate = conflict_rate(distances, in.conflict_threshold);
  out.success = in.success_step.has_value();
  out.finish_steps = finish_steps(in.success_step, in.horizon);

  if (!in.alphas.empty()) {
    double sum = 0.0;
    for (const auto& step_alphas : in.alphas) sum += mean_pairwise_overlap(step_alphas);
    out.mean_attention_overlap = sum / static_cast<double>(in.alphas.size());
    if (in.keep_alpha_trace) out.alpha_trace = in.alphas;
  }
  return out;
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_std: empty input");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

namespace {

std::vector<double> metric_values(std::span<const EpisodeMetrics> eps, int which) {
  std::vector<double> v;
  v.reserve(eps.size());
  for (const EpisodeMetrics& e : eps) {
    switch (which) {
      case 0: v.push_back(e.success ? 100.0 : 0.0); break;
      case 1: v.push_back(e.domination_rate); break;
      case 2: v.push_back(e.conflict_rate); break;
      case 3: v.push_back(static_cast<double>(e.finish_steps)); break;
      default: v.push_back(e.mean_attention_overlap); break;
    }
  }
  return v;
}

constexpr const char* kMetricNames[] = {"success_rate", "domination_rate", "conflict_rate",
                                        "finish_steps", "mean_overlap"};

}  // namespace

std::vector<SummaryRow> aggregate(std::span<const EpisodeMetrics> episodes) {
  if (episodes.empty()) throw std::invalid_argument("aggregate: no episodes");
  std::vector<SummaryRow> rows;
  for (int m = 0; m < 5; ++m) {
    const auto [mean, sd] = mean_std(metric_values(episodes, m));
    rows.push_back({kMetricNames[m], mean, sd});
  }
  return rows;
}

std::vector<SummaryRow> aggregate_seeds(const std::vector<std::vector<EpisodeMetrics>>& per_seed) {
  if (per_seed.empty()) throw std::invalid_argument("aggregate_seeds: no seeds");
  std::vector<SummaryRow> rows;
  for (int m = 0; m < 5; ++m) {
    std::vector<double> seed_means;
    for (const auto& eps : per_seed) {
      if (eps.empty()) throw std::invalid_argument("aggregate_seeds: a seed has no episodes");
      seed_means.push_back(mean_std(metric_values(eps, m)).first);
    }
    const auto [mean, sd] = mean_std(seed_means);
    rows.push_back({kMetricNames[m], mean, sd});
  }
  return rows;
}

namespace {

std::string format_num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string summary_to_csv(std::span<const SummaryRow> rows) {
  std::string out = "metric,mean,std\n";
  for (const SummaryRow& r : rows)
    out += r.metric + "," + format_num(r.mean) + "," + format_num(r.stddev) + "\n";
  return out;
}

std::string summary_to_plot_csv(const std::string& method, std::span<const SummaryRow> rows) {
  std::string out = "metric,method,mean,std\n";
  for (const SummaryRow& r : rows)
    out += r.metric + "," + method + "," + format_num(r.mean) + "," + format_num(r.stddev) + "\n";
  return out;
}

}  // namespace dair
