#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dair/adam.hpp"
#include "dair/dair_loss.hpp"
#include "dair/metrics.hpp"
#include "dair/network.hpp"
#include "dair/planar_env.hpp"
#include "dair/replay.hpp"
#include "dair/rng.hpp"
#include "dair/tape.hpp"

namespace dair {

struct SacConfig {
  double gamma = 0.98;
  double polyak = 0.995;
  double lr = 1e-4;
  int batch_size = 128;
  std::size_t buffer_capacity = 1'000'000;
  int her_k = 4;
  int update_every_episodes = 2;
  // Gradient rounds per collection; 0 means "as many as steps collected".
  int updates_per_collection = 0;
  // 0 means the -action_dim default.
  double target_entropy = 0.0;
  double init_log_tau = 0.0;
  bool twin_critics = true;
  // Soft bootstrap target min Q' - tau log pi'; when off, the target drops the
  // entropy term and uses the sampled next action's value alone.
  bool entropy_bootstrap = true;
};

// One curriculum phase: train at `objects` until `env_steps` collected steps.
struct StageConfig {
  int objects = 1;
  long env_steps = std::numeric_limits<long>::max();
};

struct TrainerConfig {
  EnvConfig env;
  Arch arch = Arch::attention;
  int embed_dim = 16;
  DairConfig dair;
  SacConfig sac;
  std::vector<StageConfig> stages;  // empty: one unbounded stage at env.objects
};

// Everything owned per agent: policy, twin critics, their Polyak targets, the
// learned temperature (as log tau), and one optimizer per group.
struct AgentNets {
  NetworkParams policy;
  NetworkParams q1, q2;
  NetworkParams tq1, tq2;
  ad::Tensor log_tau;
  ad::Adam policy_opt;
  ad::Adam q_opt;
  ad::Adam tau_opt;

  double tau() const { return std::exp(log_tau.data()[0]); }
};

struct EpisodeRollout {
  std::vector<Transition> transitions;
  std::vector<StepInfo> infos;
  std::vector<std::vector<std::vector<double>>> alphas;  // [step][agent][entity]
  std::optional<int> success_step;
  int horizon = 0;
};

struct UpdateStats {
  bool skipped = false;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double temp_loss = 0.0;
  std::vector<double> tau;
};

// Raised when a loss turns non-finite; carries a dump of the offending batch
// for postmortems.
struct NonFiniteLossError : std::runtime_error {
  NonFiniteLossError(const std::string& what, std::string dump)
      : std::runtime_error(what), batch_dump(std::move(dump)) {}
  std::string batch_dump;
};

class Trainer {
 public:
  Trainer(TrainerConfig cfg, std::uint64_t seed);

  // Rolls out one episode with the current policies. Stochastic sampling for
  // collection, distribution means for evaluation. Training env-step counters
  // advance only on stochastic rollouts.
  EpisodeRollout collect_episode(bool stochastic);

  void insert_episode(const EpisodeRollout& rollout);

  // One gradient round over every agent: critics toward soft targets, actors,
  // temperatures, then a Polyak target update. Returns skipped=true while the
  // buffer holds less than one batch.
  UpdateStats update_round();

  // Soft Bellman targets for the given batch, one value per agent and batch
  // row. `eps` optionally pins the next-action noise (tests); one
  // [batch x action_dim] tensor per agent.
  std::vector<std::vector<double>> compute_targets(std::span<const Transition* const> batch,
                                                   const std::vector<ad::Tensor>* eps = nullptr);

  // Loss builders, exposed for gradient checking. The critic loss takes
  // precomputed targets; the actor loss takes pinned per-agent noise. Both
  // include the attention-overlap term when the config asks for it.
  ad::Val build_critic_loss(ad::Tape& tape, std::span<const Transition* const> batch,
                            const std::vector<std::vector<double>>& targets);
  struct ActorBuild {
    ad::Val loss;
    std::vector<double> mean_logp;  // per agent, for the temperature update
  };
  ActorBuild build_actor_loss(ad::Tape& tape, std::span<const Transition* const> batch,
                              const std::vector<ad::Tensor>& eps);

  void polyak_update();

  // Curriculum: advances while the collected-step counter passes stage
  // budgets. Objects change, parameters carry over, the buffer is flushed.
  bool maybe_advance_stage();
  int stage_index() const { return stage_; }

  void save(const std::string& path, const std::string& config_json) const;
  void load(const std::string& path);

  AgentNets& agent(int i) { return agents_[static_cast<std::size_t>(i)]; }
  int n_agents() const { return cfg_.env.n_agents; }
  PlanarEnv& env() { return env_; }
  ReplayBuffer& buffer() { return buffer_; }
  const TrainerConfig& config() const { return cfg_; }
  long env_steps() const { return env_steps_; }
  long episodes_collected() const { return episodes_collected_; }

  // Batch helpers shared by the loss builders.
  EntityBatch batch_obs(std::span<const Transition* const> batch, bool next) const;
  ad::Tensor batch_actions(std::span<const Transition* const> batch, int agent) const;

 private:
  struct SampledAction {
    ad::Val action;  // [batch x action_dim], squashed
    ad::Val logp;    // [batch x 1]
  };
  // Reparameterized tanh-Gaussian sample with its log density.
  SampledAction sample_action(ad::Tape& tape, ad::Val mean, ad::Val log_std,
                              const ad::Tensor& eps);

  void zero_all_grads();
  void check_finite(double v, const char* which, std::span<const Transition* const> batch);
  std::string dump_batch(std::span<const Transition* const> batch) const;
  NetConfig net_config(HeadKind head) const;

  TrainerConfig cfg_;
  PlanarEnv env_;
  ReplayBuffer buffer_;
  std::vector<AgentNets> agents_;
  Rng act_rng_, update_rng_, env_rng_;
  ad::Tape tape_;
  long env_steps_ = 0;
  long episodes_collected_ = 0;
  int stage_ = 0;
};

struct TrainSettings {
  long max_env_steps = 100000;
  int eval_every_episodes = 50;
  int eval_episodes = 20;
  // Stop once an evaluation reaches this success fraction; negative disables.
  double early_stop_success = -1.0;
  int checkpoint_every_episodes = 0;  // 0: only the final checkpoint
  std::string out_dir;                // empty: no files written
  std::string config_json = "{}";    // embedded into checkpoints
  bool keep_alpha_trace = false;
};

struct EvalPoint {
  long episode = 0;
  long env_steps = 0;
  double success_rate = 0.0;  // percent
  std::vector<EpisodeMetrics> episodes;
};

struct TrainResult {
  std::vector<EpisodeMetrics> train_episodes;
  std::vector<EvalPoint> evals;
  long env_steps = 0;
  bool early_stopped = false;
};

// Collection/update loop: `update_every_episodes` rollouts, then G gradient
// rounds, repeating until the step budget or an early stop. Writes
// metrics.csv, eval.csv and checkpoints under out_dir when set; rows carry no
// timestamps so reruns are byte-identical.
TrainResult training_loop(Trainer& trainer, const TrainSettings& settings);

std::vector<EpisodeMetrics> evaluate(Trainer& trainer, int episodes, bool keep_alpha_trace = false);

}  // namespace dair
