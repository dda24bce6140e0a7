#include "dair/planar_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dair {
namespace {

constexpr double kEdgeMargin = 0.02;     // bar endpoint clearance from the rim
constexpr double kSpawnHalfExtent = 0.2;  // agent spawn square half width
constexpr double kSpawnRadius = 0.2;      // object/goal spawn circle radius
constexpr int kMaxSamplingTries = 1000;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

}  // namespace

void EnvConfig::validate() const {
  const auto fail = [](const std::string& what) {
    throw std::invalid_argument("env config: " + what);
  };
  if (n_agents < 1 || n_agents > 2) fail("n_agents must be 1 or 2, got " + std::to_string(n_agents));
  switch (task) {
    case Task::reach:
      if (objects != 0) fail("reach uses no movable objects, set objects to 0");
      break;
    case Task::rearrange:
      if (objects < 1 || objects > 8)
        fail("rearrange needs between 1 and 8 objects, got " + std::to_string(objects));
      break;
    case Task::push_door:
      if (objects != 1) fail("push_door uses exactly 1 object, got " + std::to_string(objects));
      break;
    case Task::adjust_bar:
      if (objects != 0) fail("adjust_bar has no free objects, set objects to 0");
      break;
  }
  if (table_w < 0.9 || table_h < 0.6) fail("table must be at least 0.9 x 0.6");
  if (success_radius <= 0.0) fail("success_radius must be positive");
  if (agent_radius <= 0.0 || block_radius <= 0.0) fail("radii must be positive");
  if (max_step <= 0.0 || max_step > 0.1) fail("max_step must be in (0, 0.1]");
  if (spring_rate < 0.0 || open_rate <= 0.0) fail("door rates must be positive");
  if (handle_radius <= 0.0) fail("handle_radius must be positive");
  if (interaction_threshold <= 0.0 || conflict_threshold <= 0.0) fail("thresholds must be positive");
  if (bar_length < 0.1 || bar_length > 0.4) fail("bar_length must be in [0.1, 0.4]");
  if (door_open_threshold <= 0.0 || door_open_threshold > 1.0)
    fail("door_open_threshold must be in (0, 1]");
  if (episode_scale < 1) fail("episode_scale must be at least 1");
}

PlanarEnv::PlanarEnv(const EnvConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

// Door geometry, proportional to the table so non-default sizes stay sane.
// The panel covers the opening when closed and slides up as the slider goes
// 0 -> 1, uncovering [lo, lo + slider * travel].
namespace {
double opening_lo(const EnvConfig& c) { return c.table_h * (0.25 / 0.7); }
double opening_hi(const EnvConfig& c) { return c.table_h * (0.45 / 0.7); }
double door_travel(const EnvConfig& c) { return opening_hi(c) - opening_lo(c); }
double wall_x(const EnvConfig& c) { return c.table_w / 2.0; }
}  // namespace

Vec2 PlanarEnv::handle_pos(double slider) const {
  return {wall_x(cfg_), opening_lo(cfg_) + slider * door_travel(cfg_)};
}

bool PlanarEnv::wall_crossing_allowed(double y, double radius) const {
  const double lo = opening_lo(cfg_);
  const double open_top = lo + st_.door_slider * door_travel(cfg_);
  return y - radius >= lo && y + radius <= open_top;
}

void PlanarEnv::enforce_wall(Vec2 old_pos, Vec2& new_pos, double radius) const {
  if (cfg_.task != Task::push_door) return;
  const double wx = wall_x(cfg_);
  const bool was_left = old_pos.x < wx;
  const bool stays_clear = was_left ? new_pos.x <= wx - radius : new_pos.x >= wx + radius;
  if (stays_clear) return;
  if (wall_crossing_allowed(new_pos.y, radius)) return;
  new_pos.x = was_left ? std::min(new_pos.x, wx - radius) : std::max(new_pos.x, wx + radius);
}

void PlanarEnv::clip_to_table(Vec2& p, double radius) const {
  p.x = std::clamp(p.x, radius, cfg_.table_w - radius);
  p.y = std::clamp(p.y, radius, cfg_.table_h - radius);
}

std::vector<std::vector<double>> PlanarEnv::reset(Rng& rng) {
  st_ = WorldState{};
  const Vec2 center{cfg_.table_w / 2.0, cfg_.table_h / 2.0};
  int tries = 0;
  const auto give_up = [&]() {
    if (++tries > kMaxSamplingTries)
      throw std::runtime_error("env reset: rejection sampling found no valid layout after " +
                               std::to_string(kMaxSamplingTries) + " tries");
  };
  const auto sample_square = [&]() {
    return Vec2{center.x + rng.uniform(-kSpawnHalfExtent, kSpawnHalfExtent),
                center.y + rng.uniform(-kSpawnHalfExtent, kSpawnHalfExtent)};
  };
  const auto sample_circle = [&](double radius) {
    while (true) {
      give_up();
      Vec2 p{rng.uniform(-radius, radius), rng.uniform(-radius, radius)};
      if (p.norm() <= radius) return center + p;
    }
  };

  // Objects and goals first.
  switch (cfg_.task) {
    case Task::reach:
      st_.goals.push_back(sample_circle(kSpawnRadius));
      break;
    case Task::rearrange: {
      while (static_cast<int>(st_.block_pos.size()) < cfg_.objects) {
        Vec2 p = sample_circle(kSpawnRadius);
        bool ok = true;
        for (Vec2 other : st_.block_pos)
          if (distance(p, other) < 2.0 * cfg_.block_radius + 0.01) ok = false;
        if (ok) st_.block_pos.push_back(p);
      }
      while (static_cast<int>(st_.goals.size()) < cfg_.objects) {
        Vec2 g = sample_circle(kSpawnRadius);
        bool ok = true;
        for (Vec2 other : st_.goals)
          if (distance(g, other) < 2.0 * cfg_.success_radius) ok = false;
        if (ok) st_.goals.push_back(g);
      }
      break;
    }
    case Task::push_door: {
      const double wx = wall_x(cfg_);
      while (st_.block_pos.empty()) {
        Vec2 p = sample_circle(kSpawnRadius);
        if (p.x <= wx - 0.05 - cfg_.block_radius) st_.block_pos.push_back(p);
      }
      while (st_.goals.empty()) {
        Vec2 g = sample_circle(kSpawnRadius);
        if (g.x >= wx + 0.05) st_.goals.push_back(g);
      }
      break;
    }
    case Task::adjust_bar: {
      const double half = cfg_.bar_length / 2.0;
      const auto sample_bar = [&](std::array<Vec2, 2>& ends) {
        while (true) {
          give_up();
          const Vec2 c = sample_circle(0.1);
          const double angle = rng.uniform(0.0, 2.0 * M_PI);
          const Vec2 u = rotate({1.0, 0.0}, angle);
          ends[0] = c - u * half;
          ends[1] = c + u * half;
          bool inside = true;
          for (Vec2 e : ends)
            if (e.x < kEdgeMargin || e.x > cfg_.table_w - kEdgeMargin || e.y < kEdgeMargin ||
                e.y > cfg_.table_h - kEdgeMargin)
              inside = false;
          if (inside) return;
        }
      };
      std::array<Vec2, 2> goal_ends{};
      while (true) {
        give_up();
        sample_bar(st_.bar_end);
        sample_bar(goal_ends);
        if (distance(st_.bar_end[0], goal_ends[0]) <= 0.4 &&
            distance(st_.bar_end[1], goal_ends[1]) <= 0.4)
          break;
      }
      st_.goals.assign(goal_ends.begin(), goal_ends.end());
      break;
    }
  }

  // Agents avoid each other, blocks and the wall strip.
  while (static_cast<int>(st_.agent_pos.size()) < cfg_.n_agents) {
    give_up();
    Vec2 p = sample_square();
    clip_to_table(p, cfg_.agent_radius);
    bool ok = true;
    for (Vec2 other : st_.agent_pos)
      if (distance(p, other) < 2.0 * cfg_.agent_radius + 0.005) ok = false;
    for (Vec2 b : st_.block_pos)
      if (distance(p, b) < cfg_.agent_radius + cfg_.block_radius + 0.005) ok = false;
    if (cfg_.task == Task::push_door &&
        std::abs(p.x - wall_x(cfg_)) < cfg_.agent_radius + 0.01)
      ok = false;
    if (ok) st_.agent_pos.push_back(p);
  }

  st_.agent_vel.assign(cfg_.n_agents, Vec2{});
  st_.block_vel.assign(st_.block_pos.size(), Vec2{});
  ready_ = true;
  done_ = false;
  return entity_features();
}

void PlanarEnv::move_agent(int i, Vec2 delta) {
  Vec2& pos = st_.agent_pos[static_cast<std::size_t>(i)];
  const Vec2 old = pos;
  Vec2 next = old + delta;
  enforce_wall(old, next, cfg_.agent_radius);
  clip_to_table(next, cfg_.agent_radius);
  st_.agent_vel[static_cast<std::size_t>(i)] = next - old;
  pos = next;
}

void PlanarEnv::push_blocks() {
  std::vector<Vec2> pre = st_.block_pos;
  const double contact = cfg_.agent_radius + cfg_.block_radius;
  for (Vec2 agent : st_.agent_pos) {
    for (Vec2& block : st_.block_pos) {
      const Vec2 d = block - agent;
      const double dist = d.norm();
      if (dist >= contact) continue;
      const Vec2 n = dist > 1e-9 ? d * (1.0 / dist) : Vec2{1.0, 0.0};
      Vec2 next = agent + n * contact;
      enforce_wall(block, next, cfg_.block_radius);
      clip_to_table(next, cfg_.block_radius);
      block = next;
    }
  }
  // Separate block pairs half and half.
  for (std::size_t i = 0; i + 1 < st_.block_pos.size(); ++i) {
    for (std::size_t j = i + 1; j < st_.block_pos.size(); ++j) {
      const Vec2 d = st_.block_pos[j] - st_.block_pos[i];
      const double dist = d.norm();
      const double min_dist = 2.0 * cfg_.block_radius;
      if (dist >= min_dist) continue;
      const Vec2 n = dist > 1e-9 ? d * (1.0 / dist) : Vec2{1.0, 0.0};
      const double push = (min_dist - dist) / 2.0;
      Vec2 pi = st_.block_pos[i] - n * push;
      Vec2 pj = st_.block_pos[j] + n * push;
      enforce_wall(st_.block_pos[i], pi, cfg_.block_radius);
      enforce_wall(st_.block_pos[j], pj, cfg_.block_radius);
      clip_to_table(pi, cfg_.block_radius);
      clip_to_table(pj, cfg_.block_radius);
      st_.block_pos[i] = pi;
      st_.block_pos[j] = pj;
    }
  }
  for (std::size_t k = 0; k < st_.block_pos.size(); ++k)
    st_.block_vel[k] = st_.block_pos[k] - pre[k];
}

void PlanarEnv::update_door(const std::vector<Vec2>& /*pre_move_agents*/) {
  const Vec2 handle = handle_pos(st_.door_slider);
  bool pressed = false;
  for (Vec2 agent : st_.agent_pos)
    if (distance(agent, handle) <= cfg_.handle_radius) pressed = true;

  const double before = st_.door_slider;
  const bool held_open = cfg_.door_latched && st_.door_open_latch;
  if (pressed)
    st_.door_slider += cfg_.open_rate;
  else if (!held_open)
    st_.door_slider -= cfg_.spring_rate;
  st_.door_slider = clamp01(st_.door_slider);
  if (held_open) st_.door_slider = std::max(st_.door_slider, cfg_.door_open_threshold);
  if (st_.door_slider >= cfg_.door_open_threshold && cfg_.door_latched)
    st_.door_open_latch = true;
  st_.door_vel = st_.door_slider - before;
}

void PlanarEnv::update_bar(const std::vector<Vec2>& pre_move_agents,
                           const std::vector<Vec2>& displacement) {
  std::array<Vec2, 2> disp{};
  bool any = false;
  for (int k = 0; k < 2; ++k) {
    double best = cfg_.handle_radius;
    int grabber = -1;
    for (std::size_t i = 0; i < pre_move_agents.size(); ++i) {
      const double d = distance(pre_move_agents[i], st_.bar_end[static_cast<std::size_t>(k)]);
      if (d <= best) {
        best = d;
        grabber = static_cast<int>(i);
      }
    }
    if (grabber >= 0) {
      disp[static_cast<std::size_t>(k)] = displacement[static_cast<std::size_t>(grabber)];
      any = true;
    }
  }
  if (!any) {
    st_.bar_end_vel = {Vec2{}, Vec2{}};
    return;
  }

  // Best-fit rigid motion taking the endpoints toward their displaced targets.
  const std::array<Vec2, 2> p = st_.bar_end;
  const std::array<Vec2, 2> q{p[0] + disp[0], p[1] + disp[1]};
  const Vec2 pc = (p[0] + p[1]) * 0.5;
  const Vec2 qc = (q[0] + q[1]) * 0.5;
  double dot = 0.0, cross = 0.0;
  for (int k = 0; k < 2; ++k) {
    const Vec2 a = p[static_cast<std::size_t>(k)] - pc;
    const Vec2 b = q[static_cast<std::size_t>(k)] - qc;
    dot += a.dot(b);
    cross += a.cross(b);
  }
  const double angle = (dot == 0.0 && cross == 0.0) ? 0.0 : std::atan2(cross, dot);

  std::array<Vec2, 2> next{};
  for (int k = 0; k < 2; ++k)
    next[static_cast<std::size_t>(k)] = qc + rotate(p[static_cast<std::size_t>(k)] - pc, angle);

  // Containment by rigid translation so the length is untouched.
  Vec2 shift{};
  for (Vec2 e : next) {
    shift.x = std::max(shift.x, kEdgeMargin - e.x);
    shift.y = std::max(shift.y, kEdgeMargin - e.y);
  }
  for (Vec2 e : next) {
    shift.x = std::min(shift.x, cfg_.table_w - kEdgeMargin - e.x);
    shift.y = std::min(shift.y, cfg_.table_h - kEdgeMargin - e.y);
  }
  for (int k = 0; k < 2; ++k) {
    next[static_cast<std::size_t>(k)] = next[static_cast<std::size_t>(k)] + shift;
    st_.bar_end_vel[static_cast<std::size_t>(k)] =
        next[static_cast<std::size_t>(k)] - st_.bar_end[static_cast<std::size_t>(k)];
  }
  st_.bar_end = next;
}

StepResult PlanarEnv::step(std::span<const std::array<double, 2>> actions) {
  if (!ready_) throw std::logic_error("env step: reset() must be called first");
  if (static_cast<int>(actions.size()) != cfg_.n_agents)
    throw std::invalid_argument("env step: got " + std::to_string(actions.size()) +
                                " actions for " + std::to_string(cfg_.n_agents) + " agents");
  if (done_ || st_.step_count >= horizon())
    throw std::logic_error("env step: episode is over, call reset()");
  for (std::size_t i = 0; i < actions.size(); ++i)
    for (double a : actions[i])
      if (!std::isfinite(a))
        throw std::invalid_argument("env step: non-finite action for agent " + std::to_string(i));

  const std::vector<Vec2> pre_agents = st_.agent_pos;
  std::vector<Vec2> disp(static_cast<std::size_t>(cfg_.n_agents));
  for (int i = 0; i < cfg_.n_agents; ++i) {
    const auto& a = actions[static_cast<std::size_t>(i)];
    const Vec2 delta{std::clamp(a[0], -1.0, 1.0) * cfg_.max_step,
                     std::clamp(a[1], -1.0, 1.0) * cfg_.max_step};
    move_agent(i, delta);
    disp[static_cast<std::size_t>(i)] = st_.agent_vel[static_cast<std::size_t>(i)];
  }

  switch (cfg_.task) {
    case Task::reach:
      break;
    case Task::rearrange:
      push_blocks();
      break;
    case Task::push_door:
      push_blocks();
      update_door(pre_agents);
      break;
    case Task::adjust_bar:
      update_bar(pre_agents, disp);
      break;
  }

  ++st_.step_count;

  StepInfo info;
  info.gripper_distance = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cfg_.n_agents; ++i)
    for (int j = i + 1; j < cfg_.n_agents; ++j)
      info.gripper_distance = std::min(
          info.gripper_distance,
          distance(st_.agent_pos[static_cast<std::size_t>(i)], st_.agent_pos[static_cast<std::size_t>(j)]));
  info.agents_collided = cfg_.n_agents > 1 && info.gripper_distance < cfg_.conflict_threshold;

  const std::vector<Vec2> regions = region_positions();
  info.region_of_agent.assign(static_cast<std::size_t>(cfg_.n_agents), -1);
  for (int i = 0; i < cfg_.n_agents; ++i) {
    double best = cfg_.interaction_threshold;
    for (std::size_t r = 0; r < regions.size(); ++r) {
      const double d = distance(st_.agent_pos[static_cast<std::size_t>(i)], regions[r]);
      if (d < best) {
        best = d;
        info.region_of_agent[static_cast<std::size_t>(i)] = static_cast<int>(r);
      }
    }
  }

  StepResult out;
  out.info = info;
  const std::vector<double> achieved = achieved_goal();
  const std::vector<double> desired = desired_goal();
  out.reward = compute_reward(cfg_, achieved, desired, door_open01(), info.agents_collided);
  out.success = success_now();
  out.done = out.success || st_.step_count >= horizon();
  done_ = out.done;
  return out;
}

std::vector<Vec2> PlanarEnv::region_positions() const {
  switch (cfg_.task) {
    case Task::reach:
      return {st_.goals[0]};
    case Task::rearrange:
      return st_.block_pos;
    case Task::push_door:
      return {st_.block_pos[0], handle_pos(st_.door_slider)};
    case Task::adjust_bar:
      return {st_.bar_end[0], st_.bar_end[1]};
  }
  return {};
}

std::vector<std::vector<double>> PlanarEnv::entity_features() const {
  const double inv = 1.0 / cfg_.max_step;
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(cfg_.entities()));
  for (int i = 0; i < cfg_.n_agents; ++i) {
    const Vec2 p = st_.agent_pos[static_cast<std::size_t>(i)];
    const Vec2 v = st_.agent_vel[static_cast<std::size_t>(i)];
    out.push_back({p.x, p.y, v.x * inv, v.y * inv});
  }
  const auto region_row = [&](Vec2 p, Vec2 v, Vec2 g) {
    out.push_back({p.x, p.y, v.x * inv, v.y * inv, g.x, g.y});
  };
  switch (cfg_.task) {
    case Task::reach:
      region_row(st_.goals[0], Vec2{}, st_.goals[0]);
      break;
    case Task::rearrange:
      for (std::size_t k = 0; k < st_.block_pos.size(); ++k)
        region_row(st_.block_pos[k], st_.block_vel[k], st_.goals[k]);
      break;
    case Task::push_door: {
      region_row(st_.block_pos[0], st_.block_vel[0], st_.goals[0]);
      const Vec2 handle = handle_pos(st_.door_slider);
      const Vec2 handle_vel{0.0, st_.door_vel * door_travel(cfg_)};
      region_row(handle, handle_vel, handle_pos(1.0));
      break;
    }
    case Task::adjust_bar:
      for (int k = 0; k < 2; ++k)
        region_row(st_.bar_end[static_cast<std::size_t>(k)],
                   st_.bar_end_vel[static_cast<std::size_t>(k)], st_.goals[static_cast<std::size_t>(k)]);
      break;
  }
  return out;
}

std::vector<double> PlanarEnv::achieved_goal() const {
  switch (cfg_.task) {
    case Task::reach:
      return {st_.agent_pos[0].x, st_.agent_pos[0].y};
    case Task::rearrange: {
      std::vector<double> out;
      for (Vec2 b : st_.block_pos) {
        out.push_back(b.x);
        out.push_back(b.y);
      }
      return out;
    }
    case Task::push_door:
      return {st_.block_pos[0].x, st_.block_pos[0].y};
    case Task::adjust_bar:
      return {st_.bar_end[0].x, st_.bar_end[0].y, st_.bar_end[1].x, st_.bar_end[1].y};
  }
  return {};
}

std::vector<double> PlanarEnv::desired_goal() const {
  std::vector<double> out;
  for (Vec2 g : st_.goals) {
    out.push_back(g.x);
    out.push_back(g.y);
  }
  return out;
}

double PlanarEnv::door_open01() const {
  if (cfg_.task != Task::push_door) return 0.0;
  const bool open = (cfg_.door_latched && st_.door_open_latch) ||
                    st_.door_slider >= cfg_.door_open_threshold;
  return open ? 1.0 : 0.0;
}

bool PlanarEnv::success_now() const {
  return compute_success(cfg_, achieved_goal(), desired_goal());
}

bool PlanarEnv::compute_success(const EnvConfig& cfg, std::span<const double> achieved,
                                std::span<const double> desired) {
  if (achieved.size() != desired.size() || achieved.size() % 2 != 0)
    throw std::invalid_argument("compute_success: achieved has " +
                                std::to_string(achieved.size()) + " values, desired " +
                                std::to_string(desired.size()) +
                                "; expected matching even lengths");
  for (std::size_t k = 0; k + 1 < achieved.size(); k += 2) {
    const double dx = achieved[k] - desired[k], dy = achieved[k + 1] - desired[k + 1];
    if (std::sqrt(dx * dx + dy * dy) > cfg.success_radius) return false;
  }
  return true;
}

void PlanarEnv::write_desired_goal(const EnvConfig& cfg, std::span<const double> desired,
                                   std::vector<std::vector<double>>& entity_feats) {
  // Goal pair k belongs to region row k; push_door's handle row owns none.
  const std::size_t pairs = desired.size() / 2;
  const std::size_t expected = cfg.task == Task::reach      ? 1
                               : cfg.task == Task::rearrange ? static_cast<std::size_t>(cfg.objects)
                               : cfg.task == Task::push_door ? 1
                                                             : 2;
  if (desired.size() % 2 != 0 || pairs != expected)
    throw std::invalid_argument("write_desired_goal: got " + std::to_string(desired.size()) +
                                " goal values, task expects " + std::to_string(2 * expected));
  if (entity_feats.size() != static_cast<std::size_t>(cfg.entities()))
    throw std::invalid_argument("write_desired_goal: " + std::to_string(entity_feats.size()) +
                                " entity rows, config has " + std::to_string(cfg.entities()));
  for (std::size_t k = 0; k < pairs; ++k) {
    std::vector<double>& row = entity_feats[static_cast<std::size_t>(cfg.n_agents) + k];
    if (row.size() < 6)
      throw std::invalid_argument("write_desired_goal: region row " + std::to_string(k) +
                                  " has " + std::to_string(row.size()) + " features, need 6");
    row[4] = desired[2 * k];
    row[5] = desired[2 * k + 1];
    if (cfg.task == Task::reach) {  // the marker entity sits at the goal
      row[0] = desired[0];
      row[1] = desired[1];
    }
  }
}

double PlanarEnv::compute_reward(const EnvConfig& cfg, std::span<const double> achieved,
                                 std::span<const double> desired, double door_open01,
                                 bool agents_collided) {
  if (achieved.size() != desired.size() || achieved.size() % 2 != 0)
    throw std::invalid_argument("compute_reward: achieved has " +
                                std::to_string(achieved.size()) + " values, desired " +
                                std::to_string(desired.size()) +
                                "; expected matching even lengths");
  int satisfied = 0;
  const std::size_t pairs = achieved.size() / 2;
  for (std::size_t k = 0; k < pairs; ++k) {
    const double dx = achieved[2 * k] - desired[2 * k];
    const double dy = achieved[2 * k + 1] - desired[2 * k + 1];
    if (std::sqrt(dx * dx + dy * dy) <= cfg.success_radius) ++satisfied;
  }

  double reward = 0.0;
  if (cfg.reward_mode == RewardMode::sparse) {
    reward = satisfied == static_cast<int>(pairs) ? 1.0 : 0.0;
  } else {
    reward = static_cast<double>(satisfied);
    if (cfg.task == Task::push_door) reward += door_open01;
  }
  if (cfg.collision_penalty && agents_collided) reward -= 1.0;
  return reward;
}

std::string to_string(Task t) {
  switch (t) {
    case Task::reach: return "reach";
    case Task::rearrange: return "rearrange";
    case Task::push_door: return "push_door";
    case Task::adjust_bar: return "adjust_bar";
  }
  return "?";
}

std::string to_string(RewardMode m) {
  return m == RewardMode::sparse ? "sparse" : "informative";
}

Task task_from_string(const std::string& s) {
  if (s == "reach") return Task::reach;
  if (s == "rearrange") return Task::rearrange;
  if (s == "push_door") return Task::push_door;
  if (s == "adjust_bar") return Task::adjust_bar;
  throw std::invalid_argument("unknown task '" + s +
                              "', expected reach|rearrange|push_door|adjust_bar");
}

RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "sparse") return RewardMode::sparse;
  if (s == "informative") return RewardMode::informative;
  throw std::invalid_argument("unknown reward mode '" + s + "', expected sparse|informative");
}

}  // namespace dair
