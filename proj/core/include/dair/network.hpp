#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dair/rng.hpp"
#include "dair/tape.hpp"
#include "dair/tensor.hpp"

namespace dair {

enum class HeadKind { policy, q_value };
enum class Arch { attention, mlp_concat };

// One network instance (a policy or a critic) for one agent. Entities are
// ordered globally as [agent 0 .. agent N-1, region 0 .. region M-1] so that
// attention vectors from different agents index the same entities.
struct NetConfig {
  Arch arch = Arch::attention;
  HeadKind head = HeadKind::policy;
  int embed_dim = 512;  // also the hidden width of every 2-layer MLP
  int n_agents = 2;
  int n_regions = 1;
  int agent_feat = 4;
  int region_feat = 6;
  int action_dim = 2;
  double log_std_min = -20.0;
  double log_std_max = 2.0;
  double ln_eps = 1e-5;

  int entities() const { return n_agents + n_regions; }
  int head_out() const { return head == HeadKind::policy ? 2 * action_dim : 1; }
};

// Linear -> relu -> linear.
struct Mlp2 {
  ad::Tensor w1, b1, w2, b2;
  bool empty() const { return w1.size() == 0; }
};

struct NetworkParams {
  NetConfig cfg;

  // Three encoder parameter sets: the agent's own state (with the action
  // appended for critics), other agents (shared), and interaction regions
  // (shared). Unused tensors stay empty under the mlp_concat architecture,
  // where self_enc doubles as the body over the concatenated features.
  Mlp2 self_enc;
  Mlp2 agent_enc;
  Mlp2 region_enc;
  ad::Tensor wq, wk;        // query/key maps, embed_dim x embed_dim
  ad::Tensor mix_w, mix_b;  // linear mix of the attention readout
  ad::Tensor ln_gain, ln_bias;
  Mlp2 head;

  static NetworkParams make(const NetConfig& cfg, Rng& rng);

  // Stable traversal order; checkpoint names and optimizer state rely on it.
  std::vector<std::pair<std::string, ad::Tensor*>> named_parameters();
  std::vector<ad::Tensor*> parameters();
  std::size_t parameter_count() const;
};

// Features for a batch of decision points: one [batch x feat] tensor per
// entity, agents first.
struct EntityBatch {
  std::size_t batch = 0;
  std::vector<ad::Tensor> feats;
};

EntityBatch make_entity_batch(const std::vector<std::vector<double>>& rows_per_entity);

struct PolicyOut {
  ad::Val mean;     // [batch x action_dim]
  ad::Val log_std;  // clamped to [log_std_min, log_std_max]
  ad::Val alpha;    // [batch x entities], rows on the simplex
  ad::Val self_emb;
};

struct QOut {
  ad::Val q;      // [batch x 1]
  ad::Val alpha;  // [batch x entities]
};

struct AttendOut {
  ad::Val value;  // [batch x embed_dim]
  ad::Val alpha;  // [batch x entities]
};

// Per-entity embeddings under the self/other/region encoder split. `actions`
// must be a valid [batch x action_dim] node for q_value heads and is ignored
// for policy heads.
std::vector<ad::Val> encode_entities(ad::Tape& tape, NetworkParams& net,
                                     const EntityBatch& batch, int self_index,
                                     ad::Val actions = {});

// Scaled dot-product attention with the self embedding as the query; the
// softmax runs over all entities, self included.
AttendOut attend(ad::Tape& tape, NetworkParams& net,
                 const std::vector<ad::Val>& embeddings, int self_index);

PolicyOut forward_policy(ad::Tape& tape, NetworkParams& net, const EntityBatch& batch,
                         int self_index);
QOut forward_q(ad::Tape& tape, NetworkParams& net, const EntityBatch& batch,
               int self_index, ad::Val actions);

// Tape-free single-state policy evaluation for rollouts; matches
// forward_policy up to floating point accumulation order.
struct FastPolicyOut {
  std::vector<double> mean;
  std::vector<double> log_std;
  std::vector<double> alpha;
};
FastPolicyOut fast_policy(const NetworkParams& net,
                          const std::vector<std::vector<double>>& entity_feats,
                          int self_index);

}  // namespace dair
