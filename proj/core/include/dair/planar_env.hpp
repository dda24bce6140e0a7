#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dair/rng.hpp"

namespace dair {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

enum class Task { reach, rearrange, push_door, adjust_bar };
enum class RewardMode { sparse, informative };

// Tabletop in [0, table_w] x [0, table_h]. Agents are kinematic discs; blocks
// move quasi-statically when a disc penetrates them. push_door has a wall at
// x = table_w/2 with an opening that a spring-loaded sliding door covers; the
// door_latched variant (a box lid) stays open once opened. adjust_bar is a
// rigid two-handle bar whose pose follows the grabbing agents by a best-fit
// rigid motion.
struct EnvConfig {
  Task task = Task::rearrange;
  int n_agents = 2;
  int objects = 1;  // movable blocks; only rearrange uses more than one
  RewardMode reward_mode = RewardMode::sparse;
  bool collision_penalty = false;
  bool door_latched = false;

  double table_w = 1.0;
  double table_h = 0.7;
  double success_radius = 0.05;
  double agent_radius = 0.02;
  double block_radius = 0.025;
  double max_step = 0.03;           // displacement per tick at full action
  double spring_rate = 0.05;        // door slider decay per tick
  double open_rate = 0.15;          // slider gain per tick while pressed
  double handle_radius = 0.05;      // door handle / bar end grip range
  double interaction_threshold = 0.06;
  double conflict_threshold = 0.06;
  double bar_length = 0.3;
  double door_open_threshold = 0.75;  // slider value that counts as open
  int episode_scale = 50;

  // Interaction regions: entities beyond the agents that policies attend to.
  int regions() const {
    switch (task) {
      case Task::reach: return 1;          // the target marker
      case Task::rearrange: return objects;
      case Task::push_door: return 2;      // block and door handle
      case Task::adjust_bar: return 2;     // the two bar ends
    }
    return 0;
  }
  int entities() const { return n_agents + regions(); }
  int episode_length() const { return episode_scale * regions(); }
  int agent_feat() const { return 4; }   // px py vx vy
  int region_feat() const { return 6; }  // px py vx vy gx gy
  int action_dim() const { return 2; }

  void validate() const;  // throws std::invalid_argument naming the field
};

struct WorldState {
  std::vector<Vec2> agent_pos;
  std::vector<Vec2> agent_vel;
  std::vector<Vec2> block_pos;
  std::vector<Vec2> block_vel;
  std::array<Vec2, 2> bar_end{};
  std::array<Vec2, 2> bar_end_vel{};
  std::vector<Vec2> goals;  // one per goal-bearing object (bar: one per end)
  double door_slider = 0.0;
  double door_vel = 0.0;
  bool door_open_latch = false;
  int step_count = 0;
};

struct StepInfo {
  double gripper_distance = 0.0;  // min pairwise agent distance; inf for one agent
  bool agents_collided = false;
  std::vector<int> region_of_agent;  // nearest region within reach, else -1
};

struct StepResult {
  double reward = 0.0;
  bool done = false;     // episode over (success or horizon)
  bool success = false;  // all goal conditions met at this step
  StepInfo info;
};

class PlanarEnv {
 public:
  explicit PlanarEnv(const EnvConfig& cfg);

  // Rejection-samples a start layout with no initial overlaps. Returns the
  // entity features. Throws std::runtime_error if no valid layout is found.
  std::vector<std::vector<double>> reset(Rng& rng);

  // One tick. Actions are per-agent [-1, 1]^2 (clipped); displacement is
  // action * max_step. Deterministic given the state and actions.
  StepResult step(std::span<const std::array<double, 2>> actions);

  std::vector<std::vector<double>> entity_features() const;
  std::vector<Vec2> region_positions() const;
  std::vector<double> achieved_goal() const;
  std::vector<double> desired_goal() const;
  double door_open01() const;
  bool success_now() const;

  const EnvConfig& config() const { return cfg_; }
  const WorldState& state() const { return st_; }
  WorldState& mutable_state() { return st_; }  // test scenario setup
  int horizon() const { return cfg_.episode_length(); }

  // Reward as a pure function of the post-step quantities, shared by step()
  // and replay relabeling. Sparse: 1.0 when every achieved/desired pair is
  // within success_radius. Informative: one point per satisfied pair, plus
  // door_open01 for push_door. Both modes subtract 1.0 on an agent collision
  // when the config enables the penalty.
  static double compute_reward(const EnvConfig& cfg, std::span<const double> achieved,
                               std::span<const double> desired, double door_open01,
                               bool agents_collided);

  // Success as the same pure function: every achieved/desired pair within
  // success_radius. Relabeling must recompute this along with the reward,
  // because episodes terminate on success.
  static bool compute_success(const EnvConfig& cfg, std::span<const double> achieved,
                              std::span<const double> desired);

  // Rewrites the goal-carrying entries of an entity-feature set to a new
  // desired goal: the target dims (4, 5) of each goal-owning region row, and
  // for reach also the marker's position, which is the goal itself. Relabeled
  // replay must pass through here or the networks are rewarded against a goal
  // they cannot observe.
  static void write_desired_goal(const EnvConfig& cfg, std::span<const double> desired,
                                 std::vector<std::vector<double>>& entity_feats);

 private:
  void move_agent(int i, Vec2 delta);
  void push_blocks();
  void update_door(const std::vector<Vec2>& pre_move_agents);
  void update_bar(const std::vector<Vec2>& pre_move_agents,
                  const std::vector<Vec2>& displacement);
  void clip_to_table(Vec2& p, double radius) const;
  bool wall_crossing_allowed(double y, double radius) const;
  void enforce_wall(Vec2 old_pos, Vec2& new_pos, double radius) const;
  Vec2 handle_pos(double slider) const;

  EnvConfig cfg_;
  WorldState st_;
  bool ready_ = false;
  bool done_ = false;
};

// Human-readable names used in configs and CSV columns.
std::string to_string(Task t);
std::string to_string(RewardMode m);
Task task_from_string(const std::string& s);
RewardMode reward_mode_from_string(const std::string& s);

}  // namespace dair
