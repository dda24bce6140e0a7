#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstddef>
#include <vector>

#include "dair/planar_env.hpp"
#include "dair/replay.hpp"
#include "dair/rng.hpp"

using dair::EnvConfig;
using dair::ReplayBuffer;
using dair::ReplayConfig;
using dair::Rng;
using dair::Transition;

namespace {

EnvConfig rearrange_cfg() {
  EnvConfig cfg;
  cfg.task = dair::Task::rearrange;
  cfg.objects = 1;
  return cfg;
}

// A synthetic episode whose step-t achieved goal is (0.11*t, 0) so relabeled
// desired goals identify the sampled future step, and whose agent-0 action
// carries a tag identifying the episode.
std::vector<Transition> make_episode(int len, double tag) {
  std::vector<Transition> ep(static_cast<std::size_t>(len));
  for (int t = 0; t < len; ++t) {
    Transition& tr = ep[static_cast<std::size_t>(t)];
    tr.entity_states = {{0.1 * t, 0.2}, {0.3, 0.4}, {0.5, 0.6, 0.0, 0.0, 0.7, 0.8}};
    tr.actions = {{tag, static_cast<double>(t)}, {0.0, 0.0}};
    tr.next_entity_states = tr.entity_states;
    tr.achieved_goals = {0.11 * t, 0.0};
    tr.desired_goals = {5.0, 5.0};  // never satisfied originally
    tr.reward = 0.0;
    tr.done = t == len - 1;
  }
  return ep;
}

}  // namespace

TEST_CASE("relabeling adds k copies per non-final step") {
  Rng rng(1);
  const auto ep = make_episode(10, 1.0);
  const auto aug = dair::her_relabel(rearrange_cfg(), ep, 4, rng);
  CHECK(aug.size() == 10 + 9 * 4);
  CHECK(aug.size() <= 5 * ep.size());
  // Originals come first, untouched.
  for (std::size_t t = 0; t < ep.size(); ++t) {
    CHECK(aug[t].desired_goals == ep[t].desired_goals);
    CHECK(aug[t].reward == ep[t].reward);
  }
}

TEST_CASE("relabeled copies rewrite the goal, the reward and the done flag") {
  Rng rng(2);
  auto ep = make_episode(10, 1.0);
  ep[3].done = true;  // must NOT survive: the substituted goals are never met
  ep[5].door_open01 = 1.0;
  ep[6].agents_collided = true;
  const EnvConfig cfg = rearrange_cfg();
  const auto aug = dair::her_relabel(cfg, ep, 4, rng);
  for (std::size_t t = 0; t + 1 < ep.size(); ++t) {
    for (int c = 0; c < 4; ++c) {
      const Transition& r = aug[ep.size() + 4 * t + static_cast<std::size_t>(c)];
      const Transition& o = ep[t];
      CHECK(r.actions == o.actions);
      CHECK(r.achieved_goals == o.achieved_goals);
      CHECK(r.door_open01 == o.door_open01);
      CHECK(r.agents_collided == o.agents_collided);
      // Desired must be the achieved goal of a strictly later step.
      const double idx = r.desired_goals[0] / 0.11;
      const auto u = static_cast<std::size_t>(std::lround(idx));
      CHECK(u > t);
      CHECK(u < ep.size());
      // Both observations must show the substituted goal in the region's
      // target dims (the goal is visible only through them); everything else
      // in the rows is untouched.
      auto expect_obs = [&](std::vector<std::vector<double>> rows) {
        rows[2][4] = r.desired_goals[0];
        rows[2][5] = r.desired_goals[1];
        return rows;
      };
      CHECK(r.entity_states == expect_obs(o.entity_states));
      CHECK(r.next_entity_states == expect_obs(o.next_entity_states));
      // Reward and done must match independent recomputations against the new
      // goal. Steps are 0.11 apart, so no relabeled goal is within the 0.05
      // success radius and every relabeled done is false, including step 3's.
      CHECK(r.reward == dair::PlanarEnv::compute_reward(cfg, r.achieved_goals, r.desired_goals,
                                                        r.door_open01, r.agents_collided));
      CHECK(r.done == dair::PlanarEnv::compute_success(cfg, r.achieved_goals, r.desired_goals));
      CHECK(r.done == false);
    }
  }
}

TEST_CASE("a stationary episode relabels every step into a terminal success") {
  Rng rng(3);
  auto ep = make_episode(6, 1.0);
  for (auto& tr : ep) tr.achieved_goals = {0.3, 0.3};
  const auto aug = dair::her_relabel(rearrange_cfg(), ep, 4, rng);
  for (std::size_t i = ep.size(); i < aug.size(); ++i) {
    CHECK(aug[i].reward == 1.0);
    // Reaching the substituted goal ends the episode under that goal; a
    // non-terminal reward of 1 per step would let the critics bootstrap
    // toward 1/(1-gamma) instead of 1.
    CHECK(aug[i].done == true);
  }
}

TEST_CASE("the final step contributes no relabels and k=0 is the identity") {
  Rng rng(4);
  const auto one = make_episode(1, 1.0);
  CHECK(dair::her_relabel(rearrange_cfg(), one, 4, rng).size() == 1);
  const auto ep = make_episode(7, 1.0);
  const auto aug = dair::her_relabel(rearrange_cfg(), ep, 0, rng);
  CHECK(aug.size() == ep.size());
  CHECK_THROWS_AS(dair::her_relabel(rearrange_cfg(), ep, -1, rng), std::invalid_argument);
}

TEST_CASE("future indices are sampled uniformly") {
  // For step 0 of a 10-step episode the future candidates are steps 1..9.
  // 10000 draws, chi-squared against uniform, df=8, 1% critical value 20.09.
  Rng rng(5);
  const auto ep = make_episode(10, 1.0);
  const EnvConfig cfg = rearrange_cfg();
  std::vector<int> counts(10, 0);
  int draws = 0;
  while (draws < 10000) {
    const auto aug = dair::her_relabel(cfg, ep, 4, rng);
    for (int c = 0; c < 4 && draws < 10000; ++c, ++draws) {
      const Transition& r = aug[ep.size() + static_cast<std::size_t>(c)];  // relabels of step 0
      const auto u = static_cast<std::size_t>(std::lround(r.desired_goals[0] / 0.11));
      REQUIRE(u >= 1);
      REQUIRE(u <= 9);
      ++counts[u];
    }
  }
  const double expected = 10000.0 / 9.0;
  double chi2 = 0.0;
  for (int u = 1; u <= 9; ++u) {
    const double d = counts[static_cast<std::size_t>(u)] - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < 20.09);
}

TEST_CASE("buffer evicts the oldest whole episodes once over capacity") {
  ReplayConfig rc;
  rc.capacity = 100;
  rc.her_k = 4;
  ReplayBuffer buf(rc, rearrange_cfg());
  Rng rng(6);
  buf.insert_episode(make_episode(10, 0.0), rng);  // 46 transitions augmented
  CHECK(buf.size() == 46);
  buf.insert_episode(make_episode(10, 1.0), rng);
  CHECK(buf.size() == 92);
  buf.insert_episode(make_episode(10, 2.0), rng);
  CHECK(buf.size() == 92);  // first episode evicted whole
  CHECK(buf.episode_count() == 2);
  for (int i = 0; i < 2000; ++i) CHECK(buf.sample(rng).actions[0][0] != 0.0);
}

TEST_CASE("sampling is uniform over stored transitions") {
  ReplayConfig rc;
  rc.capacity = 100000;
  rc.her_k = 0;  // keep episode sizes exact
  ReplayBuffer buf(rc, rearrange_cfg());
  Rng rng(7);
  buf.insert_episode(make_episode(20, 0.0), rng);
  buf.insert_episode(make_episode(20, 1.0), rng);
  buf.insert_episode(make_episode(20, 2.0), rng);
  std::vector<int> counts(3, 0);
  const int draws = 30000;
  for (int i = 0; i < draws; ++i) {
    const auto tag = static_cast<std::size_t>(std::lround(buf.sample(rng).actions[0][0]));
    ++counts[tag];
  }
  const double expected = draws / 3.0;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 9.21);  // df=2, 1% critical value
}

TEST_CASE("batches have the requested size and point into the buffer") {
  ReplayConfig rc;
  rc.her_k = 2;
  ReplayBuffer buf(rc, rearrange_cfg());
  Rng rng(8);
  buf.insert_episode(make_episode(10, 3.0), rng);
  const auto batch = buf.sample_batch(17, rng);
  CHECK(batch.size() == 17);
  for (const Transition* t : batch) CHECK(t->actions[0][0] == 3.0);
}

TEST_CASE("buffer misuse fails loudly") {
  ReplayConfig rc;
  ReplayBuffer buf(rc, rearrange_cfg());
  Rng rng(9);
  CHECK_THROWS_AS(buf.sample(rng), std::logic_error);
  CHECK_THROWS_AS(buf.sample_batch(0, rng), std::invalid_argument);
  CHECK_THROWS_AS(buf.insert_episode({}, rng), std::invalid_argument);

  ReplayConfig tiny;
  tiny.capacity = 10;
  tiny.her_k = 4;
  ReplayBuffer small(tiny, rearrange_cfg());
  CHECK_THROWS_AS(small.insert_episode(make_episode(10, 0.0), rng), std::invalid_argument);

  ReplayConfig zero;
  zero.capacity = 0;
  CHECK_THROWS_AS(ReplayBuffer(zero, rearrange_cfg()), std::invalid_argument);
}

TEST_CASE("clear empties the buffer") {
  ReplayConfig rc;
  ReplayBuffer buf(rc, rearrange_cfg());
  Rng rng(10);
  buf.insert_episode(make_episode(5, 0.0), rng);
  CHECK(buf.size() > 0);
  buf.clear();
  CHECK(buf.size() == 0);
  CHECK(buf.episode_count() == 0);
  CHECK_THROWS_AS(buf.sample(rng), std::logic_error);
}
