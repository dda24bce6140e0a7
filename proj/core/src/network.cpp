#include "dair/network.hpp"

#include <cmath>
#include <stdexcept>

namespace dair {
namespace {

using ad::Tape;
using ad::Tensor;
using ad::Val;

Tensor xavier(std::size_t in, std::size_t out, Rng& rng) {
  Tensor t(in, out);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
  return t;
}

Mlp2 make_mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng,
              bool small_final) {
  Mlp2 m;
  m.w1 = xavier(in, hidden, rng);
  m.b1 = Tensor(1, hidden);
  if (small_final) {
    // Near-zero output layer: policies start close to a centered unit
    // Gaussian and critics close to zero.
    m.w2 = Tensor(hidden, out);
    for (double& v : m.w2.data()) v = rng.uniform(-1e-3, 1e-3);
    m.b2 = Tensor(1, out);
  } else {
    m.w2 = xavier(hidden, out, rng);
    m.b2 = Tensor(1, out);
  }
  return m;
}

Val mlp2_forward(Tape& tape, Mlp2& m, Val x) {
  Val h = tape.relu(tape.add(tape.matmul(x, tape.param(m.w1)), tape.param(m.b1)));
  return tape.add(tape.matmul(h, tape.param(m.w2)), tape.param(m.b2));
}

void append_mlp(std::vector<std::pair<std::string, Tensor*>>& out, const std::string& prefix,
                Mlp2& m) {
  if (m.empty()) return;
  out.emplace_back(prefix + ".w1", &m.w1);
  out.emplace_back(prefix + ".b1", &m.b1);
  out.emplace_back(prefix + ".w2", &m.w2);
  out.emplace_back(prefix + ".b2", &m.b2);
}

void check_batch(const NetConfig& cfg, const EntityBatch& batch) {
  if (batch.feats.size() != static_cast<std::size_t>(cfg.entities()))
    throw std::invalid_argument(
        "network: batch has " + std::to_string(batch.feats.size()) + " entities, config expects " +
        std::to_string(cfg.entities()));
  for (std::size_t j = 0; j < batch.feats.size(); ++j) {
    const Tensor& f = batch.feats[j];
    const std::size_t want = j < static_cast<std::size_t>(cfg.n_agents)
                                 ? static_cast<std::size_t>(cfg.agent_feat)
                                 : static_cast<std::size_t>(cfg.region_feat);
    if (f.cols() != want || f.rows() != batch.batch)
      throw std::invalid_argument("network: entity " + std::to_string(j) + " features are (" +
                                  std::to_string(f.rows()) + "x" + std::to_string(f.cols()) +
                                  "), expected (" + std::to_string(batch.batch) + "x" +
                                  std::to_string(want) + ")");
  }
}

Val concat_all_features(Tape& tape, const NetConfig& cfg, const EntityBatch& batch,
                        Val actions) {
  std::vector<Val> parts;
  parts.reserve(batch.feats.size() + 1);
  for (const Tensor& f : batch.feats) parts.push_back(tape.constant(f));
  if (cfg.head == HeadKind::q_value) parts.push_back(actions);
  return tape.concat_cols(parts);
}

Val uniform_alpha(Tape& tape, std::size_t batch, std::size_t entities) {
  std::vector<double> flat(batch * entities, 1.0 / static_cast<double>(entities));
  return tape.constant(batch, entities, flat);
}

// ---- tape-free helpers --------------------------------------------------

void linear_apply(const Tensor& w, const Tensor& b, const std::vector<double>& x,
                  std::vector<double>& out) {
  const std::size_t in = w.rows(), on = w.cols();
  out.assign(on, 0.0);
  for (std::size_t l = 0; l < in; ++l) {
    const double xv = x[l];
    if (xv == 0.0) continue;
    const double* wrow = w.data().data() + l * on;
    for (std::size_t j = 0; j < on; ++j) out[j] += xv * wrow[j];
  }
  for (std::size_t j = 0; j < on; ++j) out[j] += b.data()[j];
}

std::vector<double> mlp2_apply(const Mlp2& m, const std::vector<double>& x) {
  std::vector<double> h, out;
  linear_apply(m.w1, m.b1, x, h);
  for (double& v : h) v = v > 0.0 ? v : 0.0;
  linear_apply(m.w2, m.b2, h, out);
  return out;
}

}  // namespace

NetworkParams NetworkParams::make(const NetConfig& cfg, Rng& rng) {
  NetworkParams net;
  net.cfg = cfg;
  const std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
  const std::size_t act = cfg.head == HeadKind::q_value ? cfg.action_dim : 0;

  if (cfg.arch == Arch::attention) {
    net.self_enc = make_mlp(cfg.agent_feat + act, d, d, rng, false);
    net.agent_enc = make_mlp(cfg.agent_feat, d, d, rng, false);
    net.region_enc = make_mlp(cfg.region_feat, d, d, rng, false);
    net.wq = xavier(d, d, rng);
    net.wk = xavier(d, d, rng);
    net.mix_w = xavier(d, d, rng);
    net.mix_b = Tensor(1, d);
    net.ln_gain = Tensor::full(1, d, 1.0);
    net.ln_bias = Tensor(1, d);
    net.head = make_mlp(d, d, cfg.head_out(), rng, true);
  } else {
    const std::size_t concat_in = static_cast<std::size_t>(cfg.n_agents) * cfg.agent_feat +
                                  static_cast<std::size_t>(cfg.n_regions) * cfg.region_feat + act;
    net.self_enc = make_mlp(concat_in, d, d, rng, false);
    net.head = make_mlp(d, d, cfg.head_out(), rng, true);
  }
  return net;
}

std::vector<std::pair<std::string, Tensor*>> NetworkParams::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  append_mlp(out, "self_enc", self_enc);
  append_mlp(out, "agent_enc", agent_enc);
  append_mlp(out, "region_enc", region_enc);
  if (wq.size() != 0) {
    out.emplace_back("wq", &wq);
    out.emplace_back("wk", &wk);
    out.emplace_back("mix.w", &mix_w);
    out.emplace_back("mix.b", &mix_b);
    out.emplace_back("ln.gain", &ln_gain);
    out.emplace_back("ln.bias", &ln_bias);
  }
  append_mlp(out, "head", head);
  return out;
}

std::vector<Tensor*> NetworkParams::parameters() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : const_cast<NetworkParams*>(this)->named_parameters()) n += t->size();
  return n;
}

EntityBatch make_entity_batch(const std::vector<std::vector<double>>& rows_per_entity) {
  EntityBatch b;
  b.batch = 1;
  b.feats.reserve(rows_per_entity.size());
  for (const auto& row : rows_per_entity)
    b.feats.emplace_back(1, row.size(), std::vector<double>(row));
  return b;
}

std::vector<Val> encode_entities(Tape& tape, NetworkParams& net, const EntityBatch& batch,
                                 int self_index, Val actions) {
  const NetConfig& cfg = net.cfg;
  check_batch(cfg, batch);
  if (self_index < 0 || self_index >= cfg.n_agents)
    throw std::invalid_argument("network: self_index " + std::to_string(self_index) +
                                " out of range for " + std::to_string(cfg.n_agents) + " agents");
  if (cfg.head == HeadKind::q_value && !actions.valid())
    throw std::invalid_argument("network: q_value head requires an action input");

  std::vector<Val> emb;
  emb.reserve(batch.feats.size());
  for (int j = 0; j < cfg.entities(); ++j) {
    Val feat = tape.constant(batch.feats[static_cast<std::size_t>(j)]);
    if (j == self_index) {
      if (cfg.head == HeadKind::q_value) {
        std::array<Val, 2> parts{feat, actions};
        feat = tape.concat_cols(parts);
      }
      emb.push_back(mlp2_forward(tape, net.self_enc, feat));
    } else if (j < cfg.n_agents) {
      emb.push_back(mlp2_forward(tape, net.agent_enc, feat));
    } else {
      emb.push_back(mlp2_forward(tape, net.region_enc, feat));
    }
  }
  return emb;
}

AttendOut attend(Tape& tape, NetworkParams& net, const std::vector<Val>& embeddings,
                 int self_index) {
  if (embeddings.empty()) throw std::invalid_argument("attend: no embeddings");
  if (self_index < 0 || static_cast<std::size_t>(self_index) >= embeddings.size())
    throw std::invalid_argument("attend: self_index " + std::to_string(self_index) +
                                " out of range for " + std::to_string(embeddings.size()) +
                                " embeddings");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(net.cfg.embed_dim));

  Val query = tape.matmul(embeddings[static_cast<std::size_t>(self_index)], tape.param(net.wq));
  Val wk = tape.param(net.wk);
  std::vector<Val> scores;
  scores.reserve(embeddings.size());
  for (const Val& e : embeddings)
    scores.push_back(tape.sum_rows(tape.mul(query, tape.matmul(e, wk))));
  Val logits = tape.scale(tape.concat_cols(scores), inv_sqrt_d);
  Val alpha = tape.softmax_rows(logits);

  Val readout{};
  for (std::size_t j = 0; j < embeddings.size(); ++j) {
    Val weighted = tape.mul(embeddings[j], tape.slice_cols(alpha, j, 1));
    readout = j == 0 ? weighted : tape.add(readout, weighted);
  }
  return AttendOut{readout, alpha};
}

PolicyOut forward_policy(Tape& tape, NetworkParams& net, const EntityBatch& batch,
                         int self_index) {
  const NetConfig& cfg = net.cfg;
  if (cfg.head != HeadKind::policy)
    throw std::invalid_argument("forward_policy: network has a q_value head");

  Val out{};
  Val alpha{};
  Val self_emb{};
  if (cfg.arch == Arch::attention) {
    std::vector<Val> emb = encode_entities(tape, net, batch, self_index);
    self_emb = emb[static_cast<std::size_t>(self_index)];
    AttendOut att = attend(tape, net, emb, self_index);
    Val mixed = tape.add(tape.matmul(att.value, tape.param(net.mix_w)), tape.param(net.mix_b));
    Val normed = tape.layer_norm_rows(mixed, tape.param(net.ln_gain), tape.param(net.ln_bias),
                                      cfg.ln_eps);
    Val z = tape.add(self_emb, normed);
    out = mlp2_forward(tape, net.head, z);
    alpha = att.alpha;
  } else {
    check_batch(cfg, batch);
    Val x = concat_all_features(tape, cfg, batch, {});
    Val body = tape.relu(mlp2_forward(tape, net.self_enc, x));
    out = mlp2_forward(tape, net.head, body);
    self_emb = body;
    alpha = uniform_alpha(tape, batch.batch, static_cast<std::size_t>(cfg.entities()));
  }

  PolicyOut po;
  po.mean = tape.slice_cols(out, 0, static_cast<std::size_t>(cfg.action_dim));
  po.log_std = tape.clamp(tape.slice_cols(out, cfg.action_dim, cfg.action_dim),
                          cfg.log_std_min, cfg.log_std_max);
  po.alpha = alpha;
  po.self_emb = self_emb;
  return po;
}

QOut forward_q(Tape& tape, NetworkParams& net, const EntityBatch& batch, int self_index,
               Val actions) {
  const NetConfig& cfg = net.cfg;
  if (cfg.head != HeadKind::q_value)
    throw std::invalid_argument("forward_q: network has a policy head");
  if (!actions.valid()) throw std::invalid_argument("forward_q: missing action input");
  if (tape.rows(actions) != batch.batch ||
      tape.cols(actions) != static_cast<std::size_t>(cfg.action_dim))
    throw std::invalid_argument(
        "forward_q: actions are (" + std::to_string(tape.rows(actions)) + "x" +
        std::to_string(tape.cols(actions)) + "), expected (" + std::to_string(batch.batch) +
        "x" + std::to_string(cfg.action_dim) + ")");

  if (cfg.arch == Arch::attention) {
    std::vector<Val> emb = encode_entities(tape, net, batch, self_index, actions);
    AttendOut att = attend(tape, net, emb, self_index);
    Val mixed = tape.add(tape.matmul(att.value, tape.param(net.mix_w)), tape.param(net.mix_b));
    Val normed = tape.layer_norm_rows(mixed, tape.param(net.ln_gain), tape.param(net.ln_bias),
                                      cfg.ln_eps);
    Val z = tape.add(emb[static_cast<std::size_t>(self_index)], normed);
    return QOut{mlp2_forward(tape, net.head, z), att.alpha};
  }

  check_batch(cfg, batch);
  Val x = concat_all_features(tape, cfg, batch, actions);
  Val body = tape.relu(mlp2_forward(tape, net.self_enc, x));
  Val q = mlp2_forward(tape, net.head, body);
  return QOut{q, uniform_alpha(tape, batch.batch, static_cast<std::size_t>(cfg.entities()))};
}

FastPolicyOut fast_policy(const NetworkParams& net,
                          const std::vector<std::vector<double>>& entity_feats,
                          int self_index) {
  const NetConfig& cfg = net.cfg;
  if (cfg.head != HeadKind::policy)
    throw std::invalid_argument("fast_policy: network has a q_value head");
  if (entity_feats.size() != static_cast<std::size_t>(cfg.entities()))
    throw std::invalid_argument("fast_policy: wrong entity count");

  const std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
  const std::size_t entities = entity_feats.size();
  std::vector<double> z;

  FastPolicyOut out;
  if (cfg.arch == Arch::attention) {
    std::vector<std::vector<double>> emb(entities);
    for (std::size_t j = 0; j < entities; ++j) {
      const Mlp2& enc = static_cast<int>(j) == self_index ? net.self_enc
                        : j < static_cast<std::size_t>(cfg.n_agents) ? net.agent_enc
                                                                     : net.region_enc;
      emb[j] = mlp2_apply(enc, entity_feats[j]);
    }
    std::vector<double> query;
    linear_apply(net.wq, Tensor(1, d), emb[static_cast<std::size_t>(self_index)], query);
    std::vector<double> key;
    std::vector<double> logits(entities, 0.0);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
    for (std::size_t j = 0; j < entities; ++j) {
      linear_apply(net.wk, Tensor(1, d), emb[j], key);
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += query[k] * key[k];
      logits[j] = s * inv_sqrt_d;
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    out.alpha.assign(entities, 0.0);
    double zsum = 0.0;
    for (std::size_t j = 0; j < entities; ++j) {
      out.alpha[j] = std::exp(logits[j] - mx);
      zsum += out.alpha[j];
    }
    for (double& a : out.alpha) a /= zsum;

    std::vector<double> readout(d, 0.0);
    for (std::size_t j = 0; j < entities; ++j)
      for (std::size_t k = 0; k < d; ++k) readout[k] += out.alpha[j] * emb[j][k];

    std::vector<double> mixed;
    linear_apply(net.mix_w, net.mix_b, readout, mixed);
    double mu = 0.0, var = 0.0;
    for (double v : mixed) mu += v;
    mu /= static_cast<double>(d);
    for (double v : mixed) var += (v - mu) * (v - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + cfg.ln_eps);
    z.assign(d, 0.0);
    const auto& self_emb = emb[static_cast<std::size_t>(self_index)];
    for (std::size_t k = 0; k < d; ++k)
      z[k] = self_emb[k] +
             (mixed[k] - mu) * inv * net.ln_gain.data()[k] + net.ln_bias.data()[k];
  } else {
    std::vector<double> x;
    for (const auto& f : entity_feats) x.insert(x.end(), f.begin(), f.end());
    z = mlp2_apply(net.self_enc, x);
    for (double& v : z) v = v > 0.0 ? v : 0.0;
    out.alpha.assign(entities, 1.0 / static_cast<double>(entities));
  }

  std::vector<double> headv = mlp2_apply(net.head, z);
  const std::size_t adim = static_cast<std::size_t>(cfg.action_dim);
  out.mean.assign(headv.begin(), headv.begin() + adim);
  out.log_std.assign(headv.begin() + adim, headv.begin() + 2 * adim);
  for (double& v : out.log_std) v = std::clamp(v, cfg.log_std_min, cfg.log_std_max);
  return out;
}

}  // namespace dair
