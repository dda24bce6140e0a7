#include "dair/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dair {

using nlohmann::json;

std::string to_string(Method m) {
  switch (m) {
    case Method::dair: return "dair";
    case Method::attention: return "attention";
    case Method::mlp: return "mlp";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "dair") return Method::dair;
  if (s == "attention") return Method::attention;
  if (s == "mlp") return Method::mlp;
  throw std::invalid_argument("config key \"method\": unknown method \"" + s +
                              "\" (expected dair, attention or mlp)");
}

ExperimentConfig experiment_defaults() {
  ExperimentConfig cfg;
  cfg.sac.batch_size = 512;  // orchestration default; the library default is desk-sized
  return cfg;
}

namespace {

json to_json(const ExperimentConfig& c) {
  json j;
  j["task"] = to_string(c.env.task);
  j["method"] = to_string(c.method);
  j["seeds"] = c.seeds;
  j["out_dir"] = c.out_dir;
  j["desk_scale"] = c.desk_scale;
  j["env"] = {{"n_agents", c.env.n_agents},
              {"objects", c.env.objects},
              {"reward_mode", to_string(c.env.reward_mode)},
              {"collision_penalty", c.env.collision_penalty},
              {"door_latched", c.env.door_latched},
              {"table_w", c.env.table_w},
              {"table_h", c.env.table_h},
              {"success_radius", c.env.success_radius},
              {"agent_radius", c.env.agent_radius},
              {"block_radius", c.env.block_radius},
              {"max_step", c.env.max_step},
              {"spring_rate", c.env.spring_rate},
              {"open_rate", c.env.open_rate},
              {"handle_radius", c.env.handle_radius},
              {"interaction_threshold", c.env.interaction_threshold},
              {"conflict_threshold", c.env.conflict_threshold},
              {"bar_length", c.env.bar_length},
              {"door_open_threshold", c.env.door_open_threshold},
              {"episode_scale", c.env.episode_scale}};
  j["network"] = {{"embed_dim", c.embed_dim}};
  j["dair"] = {{"lambda", c.dair.lambda},
               {"apply_to_policy", c.dair.apply_to_policy},
               {"apply_to_q", c.dair.apply_to_q},
               {"detach_partner", c.dair.detach_partner}};
  j["sac"] = {{"lr", c.sac.lr},
              {"gamma", c.sac.gamma},
              {"polyak", c.sac.polyak},
              {"batch_size", c.sac.batch_size},
              {"buffer_capacity", c.sac.buffer_capacity},
              {"her_k", c.sac.her_k},
              {"update_every_episodes", c.sac.update_every_episodes},
              {"updates_per_collection", c.sac.updates_per_collection},
              {"target_entropy", c.sac.target_entropy},
              {"init_log_tau", c.sac.init_log_tau},
              {"twin_critics", c.sac.twin_critics},
              {"entropy_bootstrap", c.sac.entropy_bootstrap}};
  j["curriculum"] = json::array();
  for (const StageConfig& s : c.stages)
    j["curriculum"].push_back({{"objects", s.objects}, {"env_steps", s.env_steps}});
  j["train"] = {{"max_env_steps", c.max_env_steps},
                {"eval_every_episodes", c.eval_every_episodes},
                {"eval_episodes", c.eval_episodes},
                {"early_stop_success", c.early_stop_success},
                {"checkpoint_every_episodes", c.checkpoint_every_episodes},
                {"keep_alpha_trace", c.keep_alpha_trace}};
  return j;
}

[[noreturn]] void bad_key(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config key \"" + path + "\": " + what);
}

// Every user key must exist in the schema (the fully materialized defaults);
// nulls are rejected rather than silently deleting defaults on merge.
void check_keys(const json& user, const json& schema, const std::string& prefix) {
  for (const auto& [key, val] : user.items()) {
    const std::string path = prefix + key;
    if (!schema.contains(key)) throw std::invalid_argument("unknown config key \"" + path + "\"");
    if (val.is_null()) bad_key(path, "null is not a valid value");
    if (key == "curriculum") {
      if (!val.is_array()) bad_key(path, "expected an array of stages");
      for (std::size_t i = 0; i < val.size(); ++i) {
        const std::string sp = path + "[" + std::to_string(i) + "]";
        if (!val[i].is_object()) bad_key(sp, "expected an object {objects, env_steps}");
        for (const auto& [sk, sv] : val[i].items()) {
          if (sk != "objects" && sk != "env_steps")
            throw std::invalid_argument("unknown config key \"" + sp + "." + sk + "\"");
          if (sv.is_null()) bad_key(sp + "." + sk, "null is not a valid value");
        }
      }
    } else if (schema[key].is_object()) {
      if (!val.is_object()) bad_key(path, "expected an object");
      check_keys(val, schema[key], path + ".");
    }
  }
}

double as_num(const json& j, const std::string& path) {
  if (!j.is_number()) bad_key(path, "expected a number");
  return j.get<double>();
}

long as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) bad_key(path, "expected an integer");
  return j.get<long>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) bad_key(path, "expected true or false");
  return j.get<bool>();
}

std::string as_str(const json& j, const std::string& path) {
  if (!j.is_string()) bad_key(path, "expected a string");
  return j.get<std::string>();
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  c.env.task = task_from_string(as_str(j["task"], "task"));
  c.method = method_from_string(as_str(j["method"], "method"));
  if (!j["seeds"].is_array() || j["seeds"].empty()) bad_key("seeds", "expected a non-empty array");
  c.seeds.clear();
  for (std::size_t i = 0; i < j["seeds"].size(); ++i) {
    const long s = as_int(j["seeds"][i], "seeds[" + std::to_string(i) + "]");
    if (s < 0) bad_key("seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
    c.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  c.out_dir = as_str(j["out_dir"], "out_dir");
  c.desk_scale = as_num(j["desk_scale"], "desk_scale");
  if (!(c.desk_scale > 0.0)) bad_key("desk_scale", "expected a positive number");

  const json& e = j["env"];
  c.env.n_agents = static_cast<int>(as_int(e["n_agents"], "env.n_agents"));
  c.env.objects = static_cast<int>(as_int(e["objects"], "env.objects"));
  c.env.reward_mode = reward_mode_from_string(as_str(e["reward_mode"], "env.reward_mode"));
  c.env.collision_penalty = as_bool(e["collision_penalty"], "env.collision_penalty");
  c.env.door_latched = as_bool(e["door_latched"], "env.door_latched");
  c.env.table_w = as_num(e["table_w"], "env.table_w");
  c.env.table_h = as_num(e["table_h"], "env.table_h");
  c.env.success_radius = as_num(e["success_radius"], "env.success_radius");
  c.env.agent_radius = as_num(e["agent_radius"], "env.agent_radius");
  c.env.block_radius = as_num(e["block_radius"], "env.block_radius");
  c.env.max_step = as_num(e["max_step"], "env.max_step");
  c.env.spring_rate = as_num(e["spring_rate"], "env.spring_rate");
  c.env.open_rate = as_num(e["open_rate"], "env.open_rate");
  c.env.handle_radius = as_num(e["handle_radius"], "env.handle_radius");
  c.env.interaction_threshold = as_num(e["interaction_threshold"], "env.interaction_threshold");
  c.env.conflict_threshold = as_num(e["conflict_threshold"], "env.conflict_threshold");
  c.env.bar_length = as_num(e["bar_length"], "env.bar_length");
  c.env.door_open_threshold = as_num(e["door_open_threshold"], "env.door_open_threshold");
  c.env.episode_scale = static_cast<int>(as_int(e["episode_scale"], "env.episode_scale"));

  c.embed_dim = static_cast<int>(as_int(j["network"]["embed_dim"], "network.embed_dim"));

  const json& d = j["dair"];
  c.dair.lambda = as_num(d["lambda"], "dair.lambda");
  c.dair.apply_to_policy = as_bool(d["apply_to_policy"], "dair.apply_to_policy");
  c.dair.apply_to_q = as_bool(d["apply_to_q"], "dair.apply_to_q");
  c.dair.detach_partner = as_bool(d["detach_partner"], "dair.detach_partner");

  const json& s = j["sac"];
  c.sac.lr = as_num(s["lr"], "sac.lr");
  c.sac.gamma = as_num(s["gamma"], "sac.gamma");
  c.sac.polyak = as_num(s["polyak"], "sac.polyak");
  c.sac.batch_size = static_cast<int>(as_int(s["batch_size"], "sac.batch_size"));
  const long cap = as_int(s["buffer_capacity"], "sac.buffer_capacity");
  if (cap <= 0) bad_key("sac.buffer_capacity", "expected a positive integer");
  c.sac.buffer_capacity = static_cast<std::size_t>(cap);
  c.sac.her_k = static_cast<int>(as_int(s["her_k"], "sac.her_k"));
  c.sac.update_every_episodes =
      static_cast<int>(as_int(s["update_every_episodes"], "sac.update_every_episodes"));
  c.sac.updates_per_collection =
      static_cast<int>(as_int(s["updates_per_collection"], "sac.updates_per_collection"));
  c.sac.target_entropy = as_num(s["target_entropy"], "sac.target_entropy");
  c.sac.init_log_tau = as_num(s["init_log_tau"], "sac.init_log_tau");
  c.sac.twin_critics = as_bool(s["twin_critics"], "sac.twin_critics");
  c.sac.entropy_bootstrap = as_bool(s["entropy_bootstrap"], "sac.entropy_bootstrap");

  c.stages.clear();
  for (std::size_t i = 0; i < j["curriculum"].size(); ++i) {
    const json& st = j["curriculum"][i];
    const std::string sp = "curriculum[" + std::to_string(i) + "]";
    StageConfig sc;
    if (!st.contains("objects")) bad_key(sp + ".objects", "missing");
    if (!st.contains("env_steps")) bad_key(sp + ".env_steps", "missing");
    sc.objects = static_cast<int>(as_int(st["objects"], sp + ".objects"));
    sc.env_steps = as_int(st["env_steps"], sp + ".env_steps");
    if (sc.env_steps <= 0) bad_key(sp + ".env_steps", "expected a positive integer");
    c.stages.push_back(sc);
  }

  const json& t = j["train"];
  c.max_env_steps = as_int(t["max_env_steps"], "train.max_env_steps");
  if (c.max_env_steps <= 0) bad_key("train.max_env_steps", "expected a positive integer");
  c.eval_every_episodes =
      static_cast<int>(as_int(t["eval_every_episodes"], "train.eval_every_episodes"));
  c.eval_episodes = static_cast<int>(as_int(t["eval_episodes"], "train.eval_episodes"));
  if (c.eval_episodes <= 0) bad_key("train.eval_episodes", "expected a positive integer");
  c.early_stop_success = as_num(t["early_stop_success"], "train.early_stop_success");
  c.checkpoint_every_episodes =
      static_cast<int>(as_int(t["checkpoint_every_episodes"], "train.checkpoint_every_episodes"));
  c.keep_alpha_trace = as_bool(t["keep_alpha_trace"], "train.keep_alpha_trace");
  return c;
}

// Splits "a.b.c=value" and grafts the value into `target`. Values parse as
// JSON when possible and fall back to strings, so task=push_door and
// sac.lr=3e-4 both read naturally.
void apply_override(json& target, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override \"" + kv + "\": expected key.path=value");
  const std::string path = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &target;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot - start);
    if (part.empty()) throw std::invalid_argument("override \"" + kv + "\": empty key segment");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace

ExperimentConfig parse_experiment(const std::string& json_text,
                                  const std::vector<std::string>& overrides) {
  json user = json::parse(json_text, nullptr, false);
  if (user.is_discarded()) throw std::invalid_argument("config is not valid JSON");
  if (!user.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const std::string& kv : overrides) apply_override(user, kv);

  const json schema = to_json(experiment_defaults());
  check_keys(user, schema, "");
  if (!user.contains("task"))
    throw std::invalid_argument("missing required config key \"task\"");

  json merged = schema;
  merged.merge_patch(user);
  ExperimentConfig cfg = from_json(merged);

  // Tasks pin their object count unless the file chose one: reach and
  // adjust_bar have no free blocks, rearrange and push_door start with one.
  const bool objects_explicit = user.contains("env") && user["env"].contains("objects");
  if (!objects_explicit &&
      (cfg.env.task == Task::reach || cfg.env.task == Task::adjust_bar))
    cfg.env.objects = 0;

  // The method pins the regularizer: dair needs a positive weight, the
  // baselines run with it off. An explicit nonzero weight on a baseline is an
  // error rather than a silent override.
  const bool lambda_explicit = user.contains("dair") && user["dair"].contains("lambda");
  if (cfg.method == Method::dair) {
    if (!(cfg.dair.lambda > 0.0))
      throw std::invalid_argument("config key \"dair.lambda\": method \"dair\" requires a "
                                  "positive value, got " + std::to_string(cfg.dair.lambda));
  } else {
    if (lambda_explicit && cfg.dair.lambda != 0.0)
      throw std::invalid_argument("config key \"dair.lambda\": method \"" +
                                  to_string(cfg.method) + "\" requires 0, got " +
                                  std::to_string(cfg.dair.lambda));
    cfg.dair.lambda = 0.0;
  }
  cfg.env.validate();
  return cfg;
}

ExperimentConfig parse_experiment_file(const std::string& path,
                                       const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse_experiment(os.str(), overrides);
}

std::string resolved_json(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

TrainerConfig ExperimentConfig::trainer_config() const {
  TrainerConfig tc;
  tc.env = env;
  tc.arch = method == Method::mlp ? Arch::mlp_concat : Arch::attention;
  tc.embed_dim = embed_dim;
  tc.dair = dair;
  tc.sac = sac;
  for (const StageConfig& s : stages) {
    StageConfig scaled = s;
    scaled.env_steps = std::max<long>(1, std::lround(static_cast<double>(s.env_steps) * desk_scale));
    tc.stages.push_back(scaled);
  }
  return tc;
}

TrainSettings ExperimentConfig::train_settings(const std::string& run_dir) const {
  TrainSettings ts;
  ts.max_env_steps =
      std::max<long>(1, std::lround(static_cast<double>(max_env_steps) * desk_scale));
  ts.eval_every_episodes = eval_every_episodes;
  ts.eval_episodes = eval_episodes;
  ts.early_stop_success = early_stop_success;
  ts.checkpoint_every_episodes = checkpoint_every_episodes;
  ts.out_dir = run_dir;
  ts.config_json = resolved_json(*this);
  ts.keep_alpha_trace = keep_alpha_trace;
  return ts;
}

std::string build_id() {
#if defined(__clang__)
  return std::string("dair_lab 0.1.0 clang ") + __clang_version__;
#elif defined(__GNUC__)
  return std::string("dair_lab 0.1.0 gcc ") + __VERSION__;
#else
  return "dair_lab 0.1.0";
#endif
}

std::string config_hash(const std::string& resolved) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : resolved) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dair
