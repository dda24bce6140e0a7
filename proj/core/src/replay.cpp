#include "dair/replay.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace dair {

std::vector<Transition> her_relabel(const EnvConfig& env_cfg,
                                    const std::vector<Transition>& episode, int k, Rng& rng) {
  if (k < 0) throw std::invalid_argument("her_relabel: k must be non-negative, got " + std::to_string(k));
  std::vector<Transition> out = episode;
  const std::size_t n = episode.size();
  if (n == 0 || k == 0) return out;
  out.reserve(n * (static_cast<std::size_t>(k) + 1));
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const std::size_t futures = n - 1 - t;
    for (int c = 0; c < k; ++c) {
      const std::size_t u = t + 1 + rng.uniform_int(futures);
      Transition relabeled = episode[t];
      relabeled.desired_goals = episode[u].achieved_goals;
      // The observations carry the goal (region target dims), so the
      // substituted goal must be written into them or the networks are
      // rewarded against a goal they cannot see.
      PlanarEnv::write_desired_goal(env_cfg, relabeled.desired_goals, relabeled.entity_states);
      PlanarEnv::write_desired_goal(env_cfg, relabeled.desired_goals,
                                    relabeled.next_entity_states);
      relabeled.reward =
          PlanarEnv::compute_reward(env_cfg, relabeled.achieved_goals, relabeled.desired_goals,
                                    relabeled.door_open01, relabeled.agents_collided);
      // Episodes terminate on success, so a transition that reaches the
      // substituted goal is terminal under that goal. Leaving done=false here
      // lets the bootstrap chain r=1 forever and the critics diverge.
      relabeled.done =
          PlanarEnv::compute_success(env_cfg, relabeled.achieved_goals, relabeled.desired_goals);
      out.push_back(std::move(relabeled));
    }
  }
  return out;
}

ReplayBuffer::ReplayBuffer(ReplayConfig cfg, EnvConfig env_cfg)
    : cfg_(cfg), env_cfg_(std::move(env_cfg)) {
  if (cfg_.capacity == 0) throw std::invalid_argument("replay buffer: capacity must be positive");
  env_cfg_.validate();
}

void ReplayBuffer::insert_episode(const std::vector<Transition>& episode, Rng& rng) {
  if (episode.empty()) throw std::invalid_argument("replay buffer: cannot insert an empty episode");
  std::vector<Transition> augmented = her_relabel(env_cfg_, episode, cfg_.her_k, rng);
  if (augmented.size() > cfg_.capacity)
    throw std::invalid_argument("replay buffer: one augmented episode (" +
                                std::to_string(augmented.size()) +
                                " transitions) exceeds capacity " + std::to_string(cfg_.capacity));
  total_ += augmented.size();
  episodes_.push_back(std::move(augmented));
  while (total_ > cfg_.capacity && episodes_.size() > 1) {
    total_ -= episodes_.front().size();
    episodes_.pop_front();
  }
  rebuild_cumulative();
}

const Transition& ReplayBuffer::sample(Rng& rng) const {
  if (total_ == 0) throw std::logic_error("replay buffer: sample from an empty buffer");
  const std::size_t idx = rng.uniform_int(total_);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), idx);
  const std::size_t ep = static_cast<std::size_t>(it - cumulative_.begin());
  const std::size_t before = ep == 0 ? 0 : cumulative_[ep - 1];
  return episodes_[ep][idx - before];
}

std::vector<const Transition*> ReplayBuffer::sample_batch(int n, Rng& rng) const {
  if (n <= 0) throw std::invalid_argument("replay buffer: batch size must be positive");
  std::vector<const Transition*> batch;
  batch.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) batch.push_back(&sample(rng));
  return batch;
}

void ReplayBuffer::clear() {
  episodes_.clear();
  cumulative_.clear();
  total_ = 0;
}

void ReplayBuffer::rebuild_cumulative() {
  cumulative_.clear();
  cumulative_.reserve(episodes_.size());
  std::size_t running = 0;
  for (const auto& ep : episodes_) {
    running += ep.size();
    cumulative_.push_back(running);
  }
}

}  // namespace dair
