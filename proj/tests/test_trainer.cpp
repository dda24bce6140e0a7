#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "dair/trainer.hpp"
#include "support/grad_check.hpp"

using dair::EnvConfig;
using dair::EpisodeRollout;
using dair::Rng;
using dair::Task;
using dair::Trainer;
using dair::TrainerConfig;
using dair::Transition;
using dair::ad::Tape;
using dair::ad::Tensor;
using dair::ad::Val;

namespace {

TrainerConfig tiny_config() {
  TrainerConfig cfg;
  cfg.env.task = Task::rearrange;
  cfg.env.objects = 1;
  cfg.env.n_agents = 2;
  cfg.embed_dim = 8;
  cfg.sac.batch_size = 8;
  cfg.sac.lr = 1e-3;
  cfg.dair.lambda = 0.05;
  return cfg;
}

void fill_buffer(Trainer& t, int episodes) {
  for (int e = 0; e < episodes; ++e) t.insert_episode(t.collect_episode(true));
}

std::vector<Tensor> fixed_noise(int agents, std::size_t batch, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> eps;
  for (int i = 0; i < agents; ++i) {
    Tensor t(batch, 2);
    for (double& v : t.data()) v = rng.normal();
    eps.push_back(std::move(t));
  }
  return eps;
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

std::vector<double> all_param_bytes(Trainer& t) {
  std::vector<double> out;
  for (int i = 0; i < t.n_agents(); ++i) {
    auto& a = t.agent(i);
    for (dair::NetworkParams* net : {&a.policy, &a.q1, &a.q2, &a.tq1, &a.tq2})
      for (Tensor* p : net->parameters()) out.insert(out.end(), p->data().begin(), p->data().end());
    out.push_back(a.log_tau.data()[0]);
  }
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("terminal transitions bootstrap to the raw reward") {
  Trainer t(tiny_config(), 11);
  fill_buffer(t, 2);
  Rng rng(1);
  auto batch = t.buffer().sample_batch(4, rng);
  std::vector<Transition> owned;
  for (const Transition* p : batch) {
    Transition tr = *p;
    tr.done = true;
    tr.reward = 1.0;
    owned.push_back(std::move(tr));
  }
  std::vector<const Transition*> ptrs;
  for (const Transition& tr : owned) ptrs.push_back(&tr);
  const auto eps = fixed_noise(2, 4, 5);
  const auto targets = t.compute_targets(ptrs, &eps);
  for (const auto& per_agent : targets)
    for (double y : per_agent) CHECK(y == 1.0);
}

TEST_CASE("soft targets match a step-by-step recomputation") {
  TrainerConfig cfg = tiny_config();
  Trainer t(cfg, 12);
  fill_buffer(t, 2);
  Rng rng(2);
  const auto batch = t.buffer().sample_batch(5, rng);
  const auto eps = fixed_noise(2, 5, 9);
  const auto targets = t.compute_targets(batch, &eps);

  const double half_log_2pi = 0.5 * std::log(2.0 * 3.14159265358979323846);
  for (int i = 0; i < 2; ++i) {
    auto& a = t.agent(i);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& next = batch[b]->next_entity_states;
      const auto fp = dair::fast_policy(a.policy, next, i);
      double logp = 0.0;
      double act[2];
      for (int d = 0; d < 2; ++d) {
        const double e = eps[static_cast<std::size_t>(i)].at(b, static_cast<std::size_t>(d));
        const double u = fp.mean[static_cast<std::size_t>(d)] +
                         std::exp(fp.log_std[static_cast<std::size_t>(d)]) * e;
        act[d] = std::tanh(u);
        logp += -(fp.log_std[static_cast<std::size_t>(d)] + 0.5 * e * e + half_log_2pi);
        logp -= 2.0 * (std::log(2.0) - u - stable_softplus(-2.0 * u));
      }
      const auto q_value = [&](dair::NetworkParams& net) {
        Tape tape;
        const auto eb = dair::make_entity_batch(next);
        const Val av = tape.constant(1, 2, std::vector<double>{act[0], act[1]});
        return tape.value(dair::forward_q(tape, net, eb, i, av).q);
      };
      const double minq = std::min(q_value(a.tq1), q_value(a.tq2));
      const double mask = batch[b]->done ? 0.0 : 1.0;
      const double expect =
          batch[b]->reward + cfg.sac.gamma * mask * (minq - a.tau() * logp);
      CHECK(targets[static_cast<std::size_t>(i)][b] ==
            doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("critic loss gradients match finite differences") {
  Trainer t(tiny_config(), 13);
  fill_buffer(t, 2);
  Rng rng(3);
  const auto batch = t.buffer().sample_batch(6, rng);
  const auto targets = t.compute_targets(batch, nullptr);

  std::vector<Tensor*> params;
  for (int i = 0; i < 2; ++i) {
    for (Tensor* p : t.agent(i).q1.parameters()) params.push_back(p);
    for (Tensor* p : t.agent(i).q2.parameters()) params.push_back(p);
  }
  Rng picker(99);
  const auto res = dair::test::check_gradients(
      params, [&](Tape& tape) { return t.build_critic_loss(tape, batch, targets); }, 1e-5, 3,
      &picker);
  INFO(res.worst);
  CHECK(res.ok(1e-5));

  // The critic pass must not touch policy parameters.
  for (int i = 0; i < 2; ++i)
    for (Tensor* p : t.agent(i).policy.parameters()) p->zero_grad();
  Tape tape;
  tape.backward(t.build_critic_loss(tape, batch, targets));
  for (int i = 0; i < 2; ++i)
    for (Tensor* p : t.agent(i).policy.parameters())
      for (double g : p->grad()) CHECK(g == 0.0);
}

TEST_CASE("actor loss gradients match finite differences") {
  Trainer t(tiny_config(), 14);
  fill_buffer(t, 2);
  Rng rng(4);
  const auto batch = t.buffer().sample_batch(6, rng);
  const auto eps = fixed_noise(2, 6, 21);

  std::vector<Tensor*> params;
  for (int i = 0; i < 2; ++i)
    for (Tensor* p : t.agent(i).policy.parameters()) params.push_back(p);
  Rng picker(100);
  const auto res = dair::test::check_gradients(
      params, [&](Tape& tape) { return t.build_actor_loss(tape, batch, eps).loss; }, 1e-5, 3,
      &picker);
  INFO(res.worst);
  CHECK(res.ok(1e-5));
}

TEST_CASE("a one-agent bandit recovers the analytic optimum") {
  TrainerConfig cfg;
  cfg.env.task = Task::reach;
  cfg.env.objects = 0;
  cfg.env.n_agents = 1;
  cfg.embed_dim = 8;
  cfg.sac.batch_size = 64;
  cfg.sac.lr = 3e-3;
  cfg.sac.her_k = 0;
  cfg.sac.init_log_tau = std::log(0.05);
  cfg.dair.lambda = 0.0;
  Trainer t(cfg, 15);

  // Constant observation; reward peaks at action (0.5, -0.3).
  const std::vector<std::vector<double>> obs{{0.45, 0.35, 0.0, 0.0},
                                             {0.55, 0.35, 0.0, 0.0, 0.6, 0.4}};
  Rng rng(5);
  for (int ep = 0; ep < 40; ++ep) {
    std::vector<Transition> episode;
    for (int s = 0; s < 25; ++s) {
      Transition tr;
      tr.entity_states = obs;
      tr.next_entity_states = obs;
      const double ax = rng.uniform(-0.999, 0.999), ay = rng.uniform(-0.999, 0.999);
      tr.actions = {{ax, ay}};
      tr.reward = -((ax - 0.5) * (ax - 0.5) + (ay + 0.3) * (ay + 0.3));
      tr.achieved_goals = {0.45, 0.35};
      tr.desired_goals = {0.9, 0.9};
      tr.done = true;
      episode.push_back(std::move(tr));
    }
    t.buffer().insert_episode(episode, rng);
  }

  for (int round = 0; round < 500; ++round) {
    const auto st = t.update_round();
    REQUIRE_FALSE(st.skipped);
    REQUIRE(st.tau[0] > 0.0);
  }

  const auto fp = dair::fast_policy(t.agent(0).policy, obs, 0);
  const double ax = std::tanh(fp.mean[0]), ay = std::tanh(fp.mean[1]);
  CHECK(std::abs(ax - 0.5) < 0.2);
  CHECK(std::abs(ay + 0.3) < 0.2);
}

TEST_CASE("zero lambda is bit-identical to the plain attention baseline") {
  TrainerConfig a = tiny_config();
  a.dair.lambda = 0.0;
  a.dair.apply_to_policy = true;
  a.dair.apply_to_q = true;
  TrainerConfig b = tiny_config();
  b.dair.lambda = 0.0;
  b.dair.apply_to_policy = false;
  b.dair.apply_to_q = false;

  Trainer ta(a, 77), tb(b, 77);
  fill_buffer(ta, 2);
  fill_buffer(tb, 2);
  for (int k = 0; k < 5; ++k) {
    ta.update_round();
    tb.update_round();
  }
  const auto pa = all_param_bytes(ta), pb = all_param_bytes(tb);
  REQUIRE(pa.size() == pb.size());
  CHECK(std::memcmp(pa.data(), pb.data(), pa.size() * sizeof(double)) == 0);

  // And a positive lambda must actually change the trajectory.
  TrainerConfig c = tiny_config();
  c.dair.lambda = 0.05;
  Trainer tc(c, 77);
  fill_buffer(tc, 2);
  for (int k = 0; k < 5; ++k) tc.update_round();
  const auto pc = all_param_bytes(tc);
  CHECK(std::memcmp(pa.data(), pc.data(), pa.size() * sizeof(double)) != 0);
}

TEST_CASE("identical seeds give identical trainers") {
  Trainer a(tiny_config(), 123), b(tiny_config(), 123);
  for (int round = 0; round < 3; ++round) {
    a.insert_episode(a.collect_episode(true));
    b.insert_episode(b.collect_episode(true));
    a.update_round();
    b.update_round();
  }
  const auto pa = all_param_bytes(a), pb = all_param_bytes(b);
  REQUIRE(pa.size() == pb.size());
  CHECK(std::memcmp(pa.data(), pb.data(), pa.size() * sizeof(double)) == 0);
}

TEST_CASE("polyak updates shrink the target gap geometrically") {
  Trainer t(tiny_config(), 16);
  for (Tensor* p : t.agent(0).q1.parameters())
    for (double& v : p->data()) v += 1.0;
  const auto gap = [&]() {
    double m = 0.0;
    const auto qs = t.agent(0).q1.parameters();
    const auto ts = t.agent(0).tq1.parameters();
    for (std::size_t k = 0; k < qs.size(); ++k)
      for (std::size_t j = 0; j < qs[k]->size(); ++j)
        m = std::max(m, std::abs(qs[k]->data()[j] - ts[k]->data()[j]));
    return m;
  };
  double prev = gap();
  CHECK(prev == doctest::Approx(1.0));
  for (int k = 0; k < 10; ++k) {
    t.polyak_update();
    const double g = gap();
    CHECK(g < prev);
    CHECK(g == doctest::Approx(prev * 0.995).epsilon(1e-12));
    prev = g;
  }
}

TEST_CASE("updates are skipped until one batch is buffered") {
  Trainer t(tiny_config(), 17);
  const auto st = t.update_round();
  CHECK(st.skipped);
  fill_buffer(t, 1);  // 50-step episode relabels to >= 8 transitions
  CHECK_FALSE(t.update_round().skipped);
}

TEST_CASE("hindsight relabeling multiplies stored transitions") {
  Trainer t(tiny_config(), 18);
  const EpisodeRollout roll = t.collect_episode(true);
  REQUIRE_FALSE(roll.transitions.empty());
  t.insert_episode(roll);
  const std::size_t L = roll.transitions.size();
  CHECK(t.buffer().size() == L + 4 * (L - 1));
}

TEST_CASE("horizon truncation keeps the bootstrap alive") {
  Trainer t(tiny_config(), 19);
  const EpisodeRollout roll = t.collect_episode(true);
  if (!roll.success_step) {
    REQUIRE(static_cast<int>(roll.transitions.size()) == roll.horizon);
    for (const Transition& tr : roll.transitions) CHECK_FALSE(tr.done);
  }
}

TEST_CASE("curriculum stages advance on step budgets and flush the buffer") {
  TrainerConfig cfg = tiny_config();
  cfg.stages = {{1, 60}, {2, 160}, {3, 100000}};
  Trainer t(cfg, 20);
  CHECK(t.config().env.objects == 1);
  const std::size_t n_params = t.agent(0).policy.parameter_count();

  while (t.env_steps() < 60) t.insert_episode(t.collect_episode(true));
  CHECK(t.maybe_advance_stage());
  CHECK(t.stage_index() == 1);
  CHECK(t.config().env.objects == 2);
  CHECK(t.buffer().size() == 0);
  CHECK(t.agent(0).policy.parameter_count() == n_params);
  CHECK(t.env().horizon() == 100);

  while (t.env_steps() < 160) t.insert_episode(t.collect_episode(true));
  CHECK(t.maybe_advance_stage());
  CHECK(t.stage_index() == 2);
  CHECK(t.config().env.objects == 3);

  // Past the final stage nothing happens.
  CHECK_FALSE(t.maybe_advance_stage());
  CHECK(t.stage_index() == 2);
}

TEST_CASE("the fixed-width mlp cannot change object counts mid-run") {
  TrainerConfig cfg = tiny_config();
  cfg.arch = dair::Arch::mlp_concat;
  cfg.stages = {{1, 40}, {2, 100000}};
  Trainer t(cfg, 21);
  while (t.env_steps() < 40) t.insert_episode(t.collect_episode(true));
  CHECK_THROWS_AS(t.maybe_advance_stage(), std::invalid_argument);
}

TEST_CASE("non-finite losses abort with a batch dump") {
  Trainer t(tiny_config(), 22);
  fill_buffer(t, 2);
  t.agent(0).q1.head.w2.data()[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    t.update_round();
    FAIL("expected NonFiniteLossError");
  } catch (const dair::NonFiniteLossError& e) {
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
    CHECK(e.batch_dump.find("reward") != std::string::npos);
  }
}

TEST_CASE("checkpoints round-trip every parameter") {
  const std::string path = "trainer_roundtrip.ckpt";
  Trainer a(tiny_config(), 23);
  fill_buffer(a, 2);
  for (int k = 0; k < 3; ++k) a.update_round();
  a.save(path, "{\"note\":42}");

  Trainer b(tiny_config(), 999);  // different seed: different params
  const auto before = all_param_bytes(b);
  const auto want = all_param_bytes(a);
  CHECK(std::memcmp(before.data(), want.data(), want.size() * sizeof(double)) != 0);
  b.load(path);
  const auto after = all_param_bytes(b);
  CHECK(std::memcmp(after.data(), want.data(), want.size() * sizeof(double)) == 0);
  std::filesystem::remove(path);
}

TEST_CASE("training loop writes deterministic CSV artifacts") {
  const auto run = [&](const std::string& dir) {
    std::filesystem::remove_all(dir);
    TrainerConfig cfg;
    cfg.env.task = Task::reach;
    cfg.env.objects = 0;
    cfg.env.n_agents = 1;
    cfg.embed_dim = 8;
    cfg.sac.batch_size = 32;
    cfg.sac.updates_per_collection = 10;
    cfg.dair.lambda = 0.0;
    Trainer t(cfg, 31);
    dair::TrainSettings s;
    s.max_env_steps = 400;
    s.eval_every_episodes = 0;
    s.eval_episodes = 3;
    s.checkpoint_every_episodes = 4;
    s.out_dir = dir;
    return dair::training_loop(t, s);
  };
  const auto r1 = run("loop_out_a");
  const auto r2 = run("loop_out_b");
  CHECK(r1.env_steps == r2.env_steps);
  CHECK(r1.train_episodes.size() == r2.train_episodes.size());
  REQUIRE(std::filesystem::exists("loop_out_a/metrics.csv"));
  CHECK(slurp("loop_out_a/metrics.csv") == slurp("loop_out_b/metrics.csv"));
  CHECK(slurp("loop_out_a/eval.csv") == slurp("loop_out_b/eval.csv"));
  CHECK(std::filesystem::exists("loop_out_a/checkpoint_final.ckpt"));
  CHECK(std::filesystem::exists("loop_out_a/checkpoint_ep4.ckpt"));

  // Header shape: one tau column for the single agent.
  std::ifstream f("loop_out_a/metrics.csv");
  std::string header;
  std::getline(f, header);
  CHECK(header ==
        "episode,env_steps,stage_objects,success,domination_rate,conflict_rate,finish_steps,"
        "mean_overlap,critic_loss,actor_loss,temp_loss,tau_0");
  std::filesystem::remove_all("loop_out_a");
  std::filesystem::remove_all("loop_out_b");
}

TEST_CASE("evaluation rollouts are deterministic given the trainer state") {
  Trainer t(tiny_config(), 24);
  const auto m1 = dair::evaluate(t, 3);
  CHECK(m1.size() == 3);
  for (const auto& m : m1) {
    CHECK(m.domination_rate >= 50.0);
    CHECK(m.conflict_rate >= 0.0);
    CHECK(m.finish_steps <= 50);
  }
  CHECK_THROWS_AS(dair::evaluate(t, 0), std::invalid_argument);
}
