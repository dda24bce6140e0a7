#include "dair/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "dair/checkpoint.hpp"

namespace dair {

using ad::Tape;
using ad::Tensor;
using ad::Val;

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

NetConfig Trainer::net_config(HeadKind head) const {
  NetConfig nc;
  nc.arch = cfg_.arch;
  nc.head = head;
  nc.embed_dim = cfg_.embed_dim;
  nc.n_agents = cfg_.env.n_agents;
  nc.n_regions = cfg_.env.regions();
  nc.agent_feat = cfg_.env.agent_feat();
  nc.region_feat = cfg_.env.region_feat();
  nc.action_dim = cfg_.env.action_dim();
  return nc;
}

Trainer::Trainer(TrainerConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      env_((cfg_.stages.empty() ? cfg_.env
                                : [&] {
                                    cfg_.env.objects = cfg_.stages.front().objects;
                                    return cfg_.env;
                                  }())),
      buffer_({cfg_.sac.buffer_capacity, cfg_.sac.her_k}, cfg_.env),
      act_rng_(Rng(seed).fork(1)),
      update_rng_(Rng(seed).fork(2)),
      env_rng_(Rng(seed).fork(3)) {
  cfg_.env.validate();
  if (cfg_.sac.batch_size <= 0)
    throw std::invalid_argument("trainer: batch_size must be positive");
  if (cfg_.sac.update_every_episodes <= 0)
    throw std::invalid_argument("trainer: update_every_episodes must be positive");
  if (cfg_.dair.lambda < 0.0)
    throw std::invalid_argument("trainer: lambda must be non-negative");
  for (std::size_t s = 1; s < cfg_.stages.size(); ++s)
    if (cfg_.stages[s].env_steps <= cfg_.stages[s - 1].env_steps)
      throw std::invalid_argument("trainer: stage step budgets must be strictly increasing");

  Rng init = Rng(seed).fork(0);
  agents_.reserve(static_cast<std::size_t>(cfg_.env.n_agents));
  for (int i = 0; i < cfg_.env.n_agents; ++i) {
    // Built in place: the optimizers register pointers into this element, so
    // it must never move again (capacity is reserved above).
    AgentNets& a = agents_.emplace_back();
    a.policy = NetworkParams::make(net_config(HeadKind::policy), init);
    a.q1 = NetworkParams::make(net_config(HeadKind::q_value), init);
    a.q2 = NetworkParams::make(net_config(HeadKind::q_value), init);
    a.tq1 = a.q1;
    a.tq2 = a.q2;
    a.log_tau = Tensor(1, 1, {cfg_.sac.init_log_tau});

    ad::AdamConfig ac;
    ac.lr = cfg_.sac.lr;
    a.policy_opt = ad::Adam(a.policy.parameters(), ac);
    std::vector<Tensor*> qs = a.q1.parameters();
    for (Tensor* t : a.q2.parameters()) qs.push_back(t);
    a.q_opt = ad::Adam(qs, ac);
    a.tau_opt = ad::Adam({&a.log_tau}, ac);
  }
}

EpisodeRollout Trainer::collect_episode(bool stochastic) {
  EpisodeRollout out;
  out.horizon = env_.horizon();
  std::vector<std::vector<double>> feats = env_.reset(env_rng_);
  if (env_.success_now()) {
    out.success_step = 0;
    if (stochastic) ++episodes_collected_;
    return out;
  }
  const int n = cfg_.env.n_agents;
  for (int t = 1; t <= out.horizon; ++t) {
    std::vector<std::array<double, 2>> acts(static_cast<std::size_t>(n));
    std::vector<std::vector<double>> step_alphas;
    step_alphas.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const FastPolicyOut fp = fast_policy(agents_[static_cast<std::size_t>(i)].policy, feats, i);
      for (int d = 0; d < 2; ++d) {
        double u = fp.mean[static_cast<std::size_t>(d)];
        if (stochastic)
          u += std::exp(fp.log_std[static_cast<std::size_t>(d)]) * act_rng_.normal();
        acts[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] = std::tanh(u);
      }
      step_alphas.push_back(fp.alpha);
    }
    const StepResult res = env_.step(acts);
    std::vector<std::vector<double>> next_feats = env_.entity_features();

    Transition tr;
    tr.entity_states = std::move(feats);
    tr.actions = acts;
    tr.reward = res.reward;
    tr.next_entity_states = next_feats;
    tr.achieved_goals = env_.achieved_goal();
    tr.desired_goals = env_.desired_goal();
    tr.door_open01 = env_.door_open01();
    tr.agents_collided = res.info.agents_collided;
    tr.done = res.success;  // horizon truncation keeps bootstrapping alive
    out.transitions.push_back(std::move(tr));
    out.infos.push_back(res.info);
    out.alphas.push_back(std::move(step_alphas));
    feats = std::move(next_feats);

    if (res.success) out.success_step = t;
    if (res.done) break;
  }
  if (stochastic) {
    env_steps_ += static_cast<long>(out.transitions.size());
    ++episodes_collected_;
  }
  return out;
}

void Trainer::insert_episode(const EpisodeRollout& rollout) {
  if (rollout.transitions.empty()) return;  // spawned solved: nothing to learn from
  buffer_.insert_episode(rollout.transitions, update_rng_);
}

EntityBatch Trainer::batch_obs(std::span<const Transition* const> batch, bool next) const {
  if (batch.empty()) throw std::invalid_argument("trainer: empty batch");
  const auto& first = next ? batch.front()->next_entity_states : batch.front()->entity_states;
  const std::size_t entities = first.size();
  EntityBatch out;
  out.batch = batch.size();
  out.feats.reserve(entities);
  for (std::size_t e = 0; e < entities; ++e) {
    const std::size_t width = first[e].size();
    Tensor t(batch.size(), width);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& states = next ? batch[b]->next_entity_states : batch[b]->entity_states;
      if (states.size() != entities || states[e].size() != width)
        throw std::invalid_argument("trainer: batch mixes transitions with different entity shapes");
      for (std::size_t c = 0; c < width; ++c) t.at(b, c) = states[e][c];
    }
    out.feats.push_back(std::move(t));
  }
  return out;
}

Tensor Trainer::batch_actions(std::span<const Transition* const> batch, int agent) const {
  Tensor t(batch.size(), 2);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& a = batch[b]->actions.at(static_cast<std::size_t>(agent));
    t.at(b, 0) = a[0];
    t.at(b, 1) = a[1];
  }
  return t;
}

Trainer::SampledAction Trainer::sample_action(Tape& tape, Val mean, Val log_std,
                                              const Tensor& eps) {
  const Val epsv = tape.constant(eps);
  const Val u = tape.add(mean, tape.mul(tape.exp(log_std), epsv));
  const Val action = tape.tanh(u);

  // log N(u; mean, std) = sum_d -(log_std + eps^2/2 + log(2 pi)/2).
  Tensor c(eps.rows(), eps.cols());
  for (std::size_t k = 0; k < c.size(); ++k)
    c.data()[k] = 0.5 * eps.data()[k] * eps.data()[k] + kHalfLog2Pi;
  const Val gauss = tape.scale(tape.sum_rows(tape.add(log_std, tape.constant(c))), -1.0);

  // Squash correction: sum_d log(1 - tanh(u)^2) = sum_d 2(log 2 - u - softplus(-2u)).
  const Val inner = tape.add(u, tape.softplus(tape.scale(u, -2.0)));
  const Val corr = tape.sum_rows(tape.add_scalar(tape.scale(inner, -2.0), 2.0 * std::log(2.0)));

  return {action, tape.sub(gauss, corr)};
}

std::vector<std::vector<double>> Trainer::compute_targets(
    std::span<const Transition* const> batch, const std::vector<Tensor>* eps) {
  const std::size_t bsz = batch.size();
  const int n = cfg_.env.n_agents;
  if (eps && static_cast<int>(eps->size()) != n)
    throw std::invalid_argument("trainer: one noise tensor per agent expected");

  tape_.reset();
  const EntityBatch nb = batch_obs(batch, true);
  std::vector<std::vector<double>> targets(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    AgentNets& a = agents_[static_cast<std::size_t>(i)];
    Tensor noise = eps ? (*eps)[static_cast<std::size_t>(i)] : Tensor(bsz, 2);
    if (!eps)
      for (std::size_t k = 0; k < noise.size(); ++k) noise.data()[k] = update_rng_.normal();

    const PolicyOut po = forward_policy(tape_, a.policy, nb, i);
    const SampledAction sa = sample_action(tape_, po.mean, po.log_std, noise);
    const QOut q1 = forward_q(tape_, a.tq1, nb, i, sa.action);
    // Copy out of the tape before the next forward; growing the arena would
    // invalidate any span held across it.
    const auto q1s = tape_.values(q1.q);
    std::vector<double> q1v(q1s.begin(), q1s.end());
    std::vector<double> q2v = q1v;
    if (cfg_.sac.twin_critics) {
      const QOut q2 = forward_q(tape_, a.tq2, nb, i, sa.action);
      const auto q2s = tape_.values(q2.q);
      q2v.assign(q2s.begin(), q2s.end());
    }
    const std::span<const double> logp = tape_.values(sa.logp);
    const double tau = a.tau();

    std::vector<double>& y = targets[static_cast<std::size_t>(i)];
    y.resize(bsz);
    for (std::size_t b = 0; b < bsz; ++b) {
      double next_value = std::min(q1v[b], q2v[b]);
      if (cfg_.sac.entropy_bootstrap) next_value -= tau * logp[b];
      const double mask = batch[b]->done ? 0.0 : 1.0;
      y[b] = batch[b]->reward + cfg_.sac.gamma * mask * next_value;
    }
  }
  return targets;
}

Val Trainer::build_critic_loss(Tape& tape, std::span<const Transition* const> batch,
                               const std::vector<std::vector<double>>& targets) {
  const int n = cfg_.env.n_agents;
  if (static_cast<int>(targets.size()) != n)
    throw std::invalid_argument("trainer: one target vector per agent expected");
  const EntityBatch ob = batch_obs(batch, false);

  Val total;
  std::vector<Val> alphas1, alphas2;
  for (int i = 0; i < n; ++i) {
    AgentNets& a = agents_[static_cast<std::size_t>(i)];
    const Val av = tape.constant(batch_actions(batch, i));
    const Val yv = tape.constant(batch.size(), 1, targets[static_cast<std::size_t>(i)]);

    const QOut q1 = forward_q(tape, a.q1, ob, i, av);
    Val li = tape.scale(tape.mean(tape.square(tape.sub(q1.q, yv))), 0.5);
    alphas1.push_back(q1.alpha);
    if (cfg_.sac.twin_critics) {
      const QOut q2 = forward_q(tape, a.q2, ob, i, av);
      li = tape.add(li, tape.scale(tape.mean(tape.square(tape.sub(q2.q, yv))), 0.5));
      alphas2.push_back(q2.alpha);
    }
    total = i == 0 ? li : tape.add(total, li);
  }
  if (cfg_.dair.apply_to_q && cfg_.dair.lambda > 0.0 && n > 1) {
    Val reg = total_overlap_loss(tape, alphas1, cfg_.dair.detach_partner);
    if (cfg_.sac.twin_critics)
      reg = tape.add(reg, total_overlap_loss(tape, alphas2, cfg_.dair.detach_partner));
    total = tape.add(total, tape.scale(reg, cfg_.dair.lambda));
  }
  return total;
}

Trainer::ActorBuild Trainer::build_actor_loss(Tape& tape,
                                              std::span<const Transition* const> batch,
                                              const std::vector<Tensor>& eps) {
  const int n = cfg_.env.n_agents;
  if (static_cast<int>(eps.size()) != n)
    throw std::invalid_argument("trainer: one noise tensor per agent expected");
  const EntityBatch ob = batch_obs(batch, false);

  ActorBuild out;
  out.mean_logp.resize(static_cast<std::size_t>(n));
  std::vector<Val> pol_alphas;
  for (int i = 0; i < n; ++i) {
    AgentNets& a = agents_[static_cast<std::size_t>(i)];
    const PolicyOut po = forward_policy(tape, a.policy, ob, i);
    const SampledAction sa = sample_action(tape, po.mean, po.log_std,
                                           eps[static_cast<std::size_t>(i)]);
    const QOut q1 = forward_q(tape, a.q1, ob, i, sa.action);
    Val qv = q1.q;
    if (cfg_.sac.twin_critics) qv = tape.min(qv, forward_q(tape, a.q2, ob, i, sa.action).q);

    const Val li = tape.mean(tape.sub(tape.scale(sa.logp, a.tau()), qv));
    out.loss = i == 0 ? li : tape.add(out.loss, li);
    pol_alphas.push_back(po.alpha);

    double s = 0.0;
    for (double v : tape.values(sa.logp)) s += v;
    out.mean_logp[static_cast<std::size_t>(i)] = s / static_cast<double>(batch.size());
  }
  if (cfg_.dair.apply_to_policy && cfg_.dair.lambda > 0.0 && n > 1)
    out.loss = tape.add(
        out.loss,
        tape.scale(total_overlap_loss(tape, pol_alphas, cfg_.dair.detach_partner),
                   cfg_.dair.lambda));
  return out;
}

void Trainer::zero_all_grads() {
  for (AgentNets& a : agents_) {
    for (NetworkParams* net : {&a.policy, &a.q1, &a.q2, &a.tq1, &a.tq2})
      for (Tensor* t : net->parameters()) t->zero_grad();
    a.log_tau.zero_grad();
  }
}

std::string Trainer::dump_batch(std::span<const Transition* const> batch) const {
  std::string out = "{\"batch_size\":" + std::to_string(batch.size()) + ",\"transitions\":[";
  const std::size_t show = std::min<std::size_t>(batch.size(), 8);
  for (std::size_t b = 0; b < show; ++b) {
    const Transition& tr = *batch[b];
    if (b) out += ",";
    out += "{\"reward\":" + fmt(tr.reward) + ",\"done\":" + (tr.done ? "true" : "false") +
           ",\"achieved\":[";
    for (std::size_t k = 0; k < tr.achieved_goals.size(); ++k)
      out += (k ? "," : "") + fmt(tr.achieved_goals[k]);
    out += "],\"desired\":[";
    for (std::size_t k = 0; k < tr.desired_goals.size(); ++k)
      out += (k ? "," : "") + fmt(tr.desired_goals[k]);
    out += "],\"actions\":[";
    for (std::size_t i = 0; i < tr.actions.size(); ++i)
      out += (i ? "," : "") + ("[" + fmt(tr.actions[i][0]) + "," + fmt(tr.actions[i][1]) + "]");
    out += "]}";
  }
  out += "]}";
  return out;
}

void Trainer::check_finite(double v, const char* which,
                           std::span<const Transition* const> batch) {
  if (std::isfinite(v)) return;
  throw NonFiniteLossError(std::string("trainer: ") + which + " loss is non-finite (" + fmt(v) +
                               ") at env step " + std::to_string(env_steps_),
                           dump_batch(batch));
}

UpdateStats Trainer::update_round() {
  UpdateStats st;
  if (buffer_.size() < static_cast<std::size_t>(cfg_.sac.batch_size)) {
    st.skipped = true;
    return st;
  }
  const std::vector<const Transition*> batch =
      buffer_.sample_batch(cfg_.sac.batch_size, update_rng_);

  // Critics toward frozen soft targets.
  const auto targets = compute_targets(batch);
  tape_.reset();
  const Val closs = build_critic_loss(tape_, batch, targets);
  st.critic_loss = tape_.value(closs);
  check_finite(st.critic_loss, "critic", batch);
  tape_.backward(closs);
  for (AgentNets& a : agents_) a.q_opt.step();
  zero_all_grads();

  // Actors through the current critics.
  std::vector<Tensor> eps;
  eps.reserve(agents_.size());
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    Tensor t(batch.size(), 2);
    for (std::size_t k = 0; k < t.size(); ++k) t.data()[k] = update_rng_.normal();
    eps.push_back(std::move(t));
  }
  tape_.reset();
  const ActorBuild ab = build_actor_loss(tape_, batch, eps);
  st.actor_loss = tape_.value(ab.loss);
  check_finite(st.actor_loss, "actor", batch);
  tape_.backward(ab.loss);
  for (AgentNets& a : agents_) a.policy_opt.step();
  zero_all_grads();

  // Temperatures against the entropy target, policies held fixed.
  const double target_h =
      cfg_.sac.target_entropy != 0.0 ? cfg_.sac.target_entropy : -cfg_.env.action_dim();
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    AgentNets& a = agents_[i];
    tape_.reset();
    const Val lt = tape_.param(a.log_tau);
    const Val jloss = tape_.scale(tape_.exp(lt), -(ab.mean_logp[i] + target_h));
    st.temp_loss += tape_.value(jloss);
    check_finite(st.temp_loss, "temperature", batch);
    tape_.backward(jloss);
    a.tau_opt.step();
  }

  polyak_update();
  for (const AgentNets& a : agents_) st.tau.push_back(a.tau());
  return st;
}

void Trainer::polyak_update() {
  const double p = cfg_.sac.polyak;
  for (AgentNets& a : agents_) {
    for (auto [src, dst] : {std::pair{&a.q1, &a.tq1}, std::pair{&a.q2, &a.tq2}}) {
      const std::vector<Tensor*> s = src->parameters();
      const std::vector<Tensor*> d = dst->parameters();
      for (std::size_t k = 0; k < s.size(); ++k) {
        std::span<const double> sv = s[k]->data();
        std::span<double> dv = d[k]->data();
        for (std::size_t j = 0; j < sv.size(); ++j) dv[j] = p * dv[j] + (1.0 - p) * sv[j];
      }
    }
  }
}

bool Trainer::maybe_advance_stage() {
  bool advanced = false;
  while (stage_ + 1 < static_cast<int>(cfg_.stages.size()) &&
         env_steps_ >= cfg_.stages[static_cast<std::size_t>(stage_)].env_steps) {
    ++stage_;
    const int old_regions = cfg_.env.regions();
    cfg_.env.objects = cfg_.stages[static_cast<std::size_t>(stage_)].objects;
    if (cfg_.arch == Arch::mlp_concat && cfg_.env.regions() != old_regions)
      throw std::invalid_argument(
          "trainer: the concatenation MLP has a fixed input width and cannot change the region "
          "count mid-run");
    cfg_.env.validate();
    env_ = PlanarEnv(cfg_.env);
    buffer_ = ReplayBuffer({cfg_.sac.buffer_capacity, cfg_.sac.her_k}, cfg_.env);
    for (AgentNets& a : agents_)
      for (NetworkParams* net : {&a.policy, &a.q1, &a.q2, &a.tq1, &a.tq2})
        net->cfg.n_regions = cfg_.env.regions();
    advanced = true;
  }
  return advanced;
}

void Trainer::save(const std::string& path, const std::string& config_json) const {
  std::vector<std::pair<std::string, const Tensor*>> named;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const std::string prefix = "agent" + std::to_string(i) + ".";
    auto& a = const_cast<AgentNets&>(agents_[i]);
    for (auto [net, tag] : {std::pair{&a.policy, "policy."}, std::pair{&a.q1, "q1."},
                            std::pair{&a.q2, "q2."}, std::pair{&a.tq1, "tq1."},
                            std::pair{&a.tq2, "tq2."}}) {
      for (auto& [name, tensor] : net->named_parameters())
        named.emplace_back(prefix + tag + name, tensor);
    }
    named.emplace_back(prefix + "log_tau", &a.log_tau);
  }
  save_checkpoint(path, config_json, named);
}

void Trainer::load(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const std::string prefix = "agent" + std::to_string(i) + ".";
    AgentNets& a = agents_[i];
    for (auto [net, tag] : {std::pair{&a.policy, "policy."}, std::pair{&a.q1, "q1."},
                            std::pair{&a.q2, "q2."}, std::pair{&a.tq1, "tq1."},
                            std::pair{&a.tq2, "tq2."}}) {
      for (auto& [name, tensor] : net->named_parameters()) {
        const auto it = ck.tensors.find(prefix + tag + name);
        if (it == ck.tensors.end())
          throw std::runtime_error("checkpoint " + path + " is missing tensor " + prefix + tag +
                                   name);
        if (it->second.rows() != tensor->rows() || it->second.cols() != tensor->cols())
          throw std::runtime_error("checkpoint " + path + ": tensor " + prefix + tag + name +
                                   " has mismatched shape");
        std::copy(it->second.data().begin(), it->second.data().end(), tensor->data().begin());
      }
    }
    const auto it = ck.tensors.find(prefix + "log_tau");
    if (it == ck.tensors.end())
      throw std::runtime_error("checkpoint " + path + " is missing tensor " + prefix + "log_tau");
    a.log_tau.data()[0] = it->second.data()[0];
  }
}

std::vector<EpisodeMetrics> evaluate(Trainer& trainer, int episodes, bool keep_alpha_trace) {
  if (episodes <= 0) throw std::invalid_argument("evaluate: episode count must be positive");
  std::vector<EpisodeMetrics> out;
  out.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    const EpisodeRollout roll = trainer.collect_episode(false);
    EpisodeInputs in;
    in.infos = roll.infos;
    in.alphas = roll.alphas;
    in.success_step = roll.success_step;
    in.horizon = roll.horizon;
    in.conflict_threshold = trainer.config().env.conflict_threshold;
    in.keep_alpha_trace = keep_alpha_trace;
    out.push_back(build_episode_metrics(in));
  }
  return out;
}

TrainResult training_loop(Trainer& trainer, const TrainSettings& settings) {
  TrainResult res;
  const bool writing = !settings.out_dir.empty();
  std::ofstream metrics_csv;
  std::ofstream eval_csv;
  const int n_agents = trainer.n_agents();
  if (writing) {
    std::filesystem::create_directories(settings.out_dir);
    metrics_csv.open(settings.out_dir + "/metrics.csv");
    eval_csv.open(settings.out_dir + "/eval.csv");
    std::string header =
        "episode,env_steps,stage_objects,success,domination_rate,conflict_rate,finish_steps,"
        "mean_overlap,critic_loss,actor_loss,temp_loss";
    for (int i = 0; i < n_agents; ++i) header += ",tau_" + std::to_string(i);
    metrics_csv << header << "\n";
    eval_csv << "episode,env_steps,success_rate,domination_rate,conflict_rate,finish_steps,"
                "mean_overlap\n";
  }

  UpdateStats last;
  last.tau.assign(static_cast<std::size_t>(n_agents), 0.0);
  for (int i = 0; i < n_agents; ++i)
    last.tau[static_cast<std::size_t>(i)] = trainer.agent(i).tau();

  const auto run_eval = [&]() {
    EvalPoint pt;
    pt.episode = trainer.episodes_collected();
    pt.env_steps = trainer.env_steps();
    pt.episodes = evaluate(trainer, settings.eval_episodes, settings.keep_alpha_trace);
    int succ = 0;
    for (const EpisodeMetrics& m : pt.episodes) succ += m.success ? 1 : 0;
    pt.success_rate = 100.0 * succ / static_cast<double>(pt.episodes.size());
    if (writing) {
      const auto rows = aggregate(pt.episodes);
      eval_csv << pt.episode << "," << pt.env_steps << "," << fmt(pt.success_rate) << ","
               << fmt(rows[1].mean) << "," << fmt(rows[2].mean) << "," << fmt(rows[3].mean) << ","
               << fmt(rows[4].mean) << "\n";
    }
    res.evals.push_back(std::move(pt));
    return res.evals.back().success_rate;
  };

  bool stop = false;
  try {
    while (!stop && trainer.env_steps() < settings.max_env_steps) {
      long collected_now = 0;
      for (int e = 0; e < trainer.config().sac.update_every_episodes && !stop; ++e) {
        const EpisodeRollout roll = trainer.collect_episode(true);
        trainer.insert_episode(roll);
        collected_now += static_cast<long>(roll.transitions.size());

        EpisodeInputs in;
        in.infos = roll.infos;
        in.alphas = roll.alphas;
        in.success_step = roll.success_step;
        in.horizon = roll.horizon;
        in.conflict_threshold = trainer.config().env.conflict_threshold;
        in.keep_alpha_trace = settings.keep_alpha_trace;
        const EpisodeMetrics m = build_episode_metrics(in);
        if (writing) {
          metrics_csv << trainer.episodes_collected() << "," << trainer.env_steps() << ","
                      << trainer.config().env.objects << "," << (m.success ? 1 : 0) << ","
                      << fmt(m.domination_rate) << "," << fmt(m.conflict_rate) << ","
                      << m.finish_steps << "," << fmt(m.mean_attention_overlap) << ","
                      << fmt(last.critic_loss) << "," << fmt(last.actor_loss) << ","
                      << fmt(last.temp_loss);
          for (int i = 0; i < n_agents; ++i)
            metrics_csv << "," << fmt(last.tau[static_cast<std::size_t>(i)]);
          metrics_csv << "\n";
        }
        res.train_episodes.push_back(m);

        if (settings.eval_every_episodes > 0 &&
            trainer.episodes_collected() % settings.eval_every_episodes == 0) {
          const double rate = run_eval();
          if (settings.early_stop_success >= 0.0 &&
              rate >= 100.0 * settings.early_stop_success) {
            res.early_stopped = true;
            stop = true;
          }
        }
        if (writing && settings.checkpoint_every_episodes > 0 &&
            trainer.episodes_collected() % settings.checkpoint_every_episodes == 0) {
          trainer.save(settings.out_dir + "/checkpoint_ep" +
                           std::to_string(trainer.episodes_collected()) + ".ckpt",
                       settings.config_json);
        }
        if (trainer.env_steps() >= settings.max_env_steps) break;
      }
      if (stop) break;

      const int g = trainer.config().sac.updates_per_collection > 0
                        ? trainer.config().sac.updates_per_collection
                        : static_cast<int>(collected_now);
      for (int k = 0; k < g; ++k) {
        const UpdateStats st = trainer.update_round();
        if (!st.skipped) last = st;
      }
      trainer.maybe_advance_stage();
    }
  } catch (const NonFiniteLossError& e) {
    if (writing) {
      std::ofstream dump(settings.out_dir + "/nonfinite_batch.json");
      dump << e.batch_dump << "\n";
    }
    throw;
  }

  if (settings.eval_episodes > 0 && !res.early_stopped) run_eval();
  if (writing) trainer.save(settings.out_dir + "/checkpoint_final.ckpt", settings.config_json);
  res.env_steps = trainer.env_steps();
  return res;
}

}  // namespace dair
