#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <vector>

#include "dair/planar_env.hpp"
#include "dair/rng.hpp"

namespace dair {

// One shared-reward multi-agent step. Entity features are stored for the
// observation before and after the step; achieved/desired goals and the
// door/collision facts refer to the post-step state, which is what the reward
// function consumes (and what hindsight relabeling must re-consume).
struct Transition {
  std::vector<std::vector<double>> entity_states;
  std::vector<std::array<double, 2>> actions;
  double reward = 0.0;
  std::vector<std::vector<double>> next_entity_states;
  std::vector<double> achieved_goals;
  std::vector<double> desired_goals;
  double door_open01 = 0.0;
  bool agents_collided = false;
  bool done = false;
};

// Hindsight relabeling, future-replace strategy: the returned list holds the
// original transitions followed by, for every non-final step t, k copies whose
// desired goals are the achieved goals of a step sampled uniformly from
// (t, end). The substituted goal is written into both observations (goals are
// part of the region features) and the reward and done flags are recomputed
// with the environment's reward and success functions (episodes end on
// success, so reaching the substituted goal is terminal). The final step has
// no future and adds no copies.
std::vector<Transition> her_relabel(const EnvConfig& env_cfg,
                                    const std::vector<Transition>& episode, int k, Rng& rng);

struct ReplayConfig {
  std::size_t capacity = 1'000'000;  // transitions, counting relabeled copies
  int her_k = 4;
};

// Ring of whole episodes. Relabeling happens at insert time, so sampling is a
// flat uniform draw over every stored transition.
class ReplayBuffer {
 public:
  ReplayBuffer(ReplayConfig cfg, EnvConfig env_cfg);

  // Augments the episode via her_relabel and stores it; evicts oldest whole
  // episodes while over capacity.
  void insert_episode(const std::vector<Transition>& episode, Rng& rng);

  const Transition& sample(Rng& rng) const;
  std::vector<const Transition*> sample_batch(int n, Rng& rng) const;

  std::size_t size() const { return total_; }
  std::size_t episode_count() const { return episodes_.size(); }
  void clear();

 private:
  ReplayConfig cfg_;
  EnvConfig env_cfg_;
  std::deque<std::vector<Transition>> episodes_;
  std::vector<std::size_t> cumulative_;  // running transition counts per episode
  std::size_t total_ = 0;

  void rebuild_cumulative();
};

}  // namespace dair
