// Acceptance suite. Runs nine checks spanning gradient correctness, attention
// invariants, learning performance, directional method comparisons,
// generalization, robustness and reproducibility; prints exactly one
// PASS/FAIL line per criterion and exits nonzero if any failed.
//
// Training-backed criteria run through the real CLI into ./acceptance_cache
// (relative to the working directory) and reuse finished runs on later
// invocations. Set DAIR_ACCEPT_FRESH=1 to wipe the cache first, or delete
// individual run directories to retrain selectively. `--only 1,4` restricts
// the run to the listed criteria. Per-run CLI output lands in
// acceptance_cache/<run>/train.log.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dair/cli.hpp"
#include "dair/dair_loss.hpp"
#include "dair/experiment.hpp"
#include "dair/network.hpp"
#include "dair/trainer.hpp"
#include "json.hpp"
#include "support/grad_check.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using dair::Rng;
using dair::Trainer;
using dair::TrainerConfig;
using dair::ad::Tape;
using dair::ad::Tensor;
using dair::ad::Val;

namespace {

// ---------------------------------------------------------------------------
// Pinned tolerances and budgets. Step budgets are desk-scale (the configs use
// desk_scale 1.0 except the curriculum, which exercises the scaling path);
// learning-rate and batch knobs are calibrated for embed_dim 16 on one CPU
// core.
constexpr int kGradDraws = 100;             // random parameter draws
constexpr double kGradRelTol = 1e-4;        // max relative error vs central FD
constexpr double kGradMaxSeconds = 120.0;
constexpr int kSimplexDraws = 10000;        // attention rows checked
constexpr double kRowSumTol = 1e-12;        // simplex row-sum tolerance
constexpr double kReachSuccessPct = 90.0;   // per seed
constexpr long kReachBudget = 200000;       // env steps per seed
constexpr double kReachMaxSeconds = 1800.0; // all three seeds together
constexpr double kOverlapDropRel = 0.30;    // DAIR overlap at least 30% lower
constexpr double kLambdaBandPts = 15.0;     // success spread across lambdas
constexpr double kBarDominationMax = 60.0;  // seed-averaged, percent
constexpr double kBarSolveSuccessPct = 50.0;

constexpr double kLr = 1e-3;
constexpr int kBatch = 128;
constexpr long kDoorBudget = 500000;
constexpr long kBarBudget = 500000;
constexpr double kEarlyStop = 0.9;

int g_failures = 0;

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void report(int idx, const std::string& label, bool pass, const std::string& detail) {
  std::printf("criterion %d (%s): %s  [%s]\n", idx, label.c_str(), pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// CLI plumbing: in-process invocations with stdout/stderr captured to a log.

int run_cli(std::vector<std::string> args, const fs::path& log_path) {
  args.insert(args.begin(), "dair_lab");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ofstream log(log_path, std::ios::app);
  std::streambuf* out = std::cout.rdbuf(log.rdbuf());
  std::streambuf* err = std::cerr.rdbuf(log.rdbuf());
  const int rc = dair::cli_main(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(out);
  std::cerr.rdbuf(err);
  return rc;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

const fs::path kCache = "acceptance_cache";

struct FinalEval {
  long env_steps = 0;
  double success = 0.0;
  double domination = 50.0;
  double conflict = 0.0;
  double finish = 0.0;
  double overlap = 0.0;
};

FinalEval last_eval_row(const fs::path& csv) {
  std::ifstream f(csv);
  if (!f.good()) throw std::runtime_error("cannot open " + csv.string());
  std::string line, last;
  std::getline(f, line);  // header
  while (std::getline(f, line))
    if (!line.empty()) last = line;
  if (last.empty()) throw std::runtime_error(csv.string() + " has no evaluation rows");
  std::vector<double> cols;
  std::stringstream ss(last);
  std::string cell;
  while (std::getline(ss, cell, ',')) cols.push_back(std::stod(cell));
  if (cols.size() != 7)
    throw std::runtime_error(csv.string() + ": expected 7 columns, got " +
                             std::to_string(cols.size()));
  return FinalEval{static_cast<long>(cols[1]), cols[2], cols[3], cols[4], cols[5], cols[6]};
}

struct RunOutput {
  fs::path dir;
  double train_seconds = 0.0;
  std::vector<FinalEval> seeds;

  double mean(double FinalEval::* field) const {
    double s = 0.0;
    for (const FinalEval& e : seeds) s += e.*field;
    return s / static_cast<double>(seeds.size());
  }
};

// Trains through the CLI unless the run directory already holds a finished
// run (marker file carries the original wall time), then loads every seed's
// final evaluation row.
RunOutput train_cached(const std::string& name, const json& config) {
  RunOutput out;
  out.dir = kCache / name;
  const fs::path marker = out.dir / ".done";
  if (!fs::exists(marker)) {
    fs::remove_all(out.dir);
    fs::create_directories(out.dir);
    const fs::path cfg_path = out.dir / "config.json";
    std::ofstream(cfg_path) << config.dump(2) << '\n';
    const double t0 = now_s();
    const int rc = run_cli({"train", "--config", cfg_path.string(), "--out", out.dir.string()},
                           out.dir / "train.log");
    if (rc != 0)
      throw std::runtime_error(name + ": train exited with " + std::to_string(rc) +
                               ", see " + (out.dir / "train.log").string());
    std::ofstream(marker) << (now_s() - t0) << '\n';
  }
  std::ifstream(marker) >> out.train_seconds;
  std::vector<fs::path> seed_dirs;
  for (const auto& e : fs::directory_iterator(out.dir))
    if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0)
      seed_dirs.push_back(e.path());
  std::sort(seed_dirs.begin(), seed_dirs.end());
  for (const fs::path& sd : seed_dirs) out.seeds.push_back(last_eval_row(sd / "eval.csv"));
  if (out.seeds.empty()) throw std::runtime_error(name + ": no seed directories found");
  return out;
}

// ---------------------------------------------------------------------------
// Shared experiment configs.

json door_config(const std::string& method, double lambda, bool latched, bool collision) {
  json j{{"task", "push_door"},
         {"method", method},
         {"seeds", {0, 1, 2}},
         {"desk_scale", 1.0},
         {"env", {{"n_agents", 2}, {"door_latched", latched}, {"collision_penalty", collision}}},
         {"network", {{"embed_dim", 16}}},
         {"sac", {{"batch_size", kBatch}, {"lr", kLr}}},
         {"train",
          {{"max_env_steps", kDoorBudget},
           {"eval_every_episodes", 50},
           {"eval_episodes", 20},
           {"early_stop_success", kEarlyStop}}}};
  if (method == "dair") j["dair"] = {{"lambda", lambda}};
  return j;
}

json reach_config() {
  return json{{"task", "reach"},
              {"method", "attention"},
              {"seeds", {0, 1, 2}},
              {"desk_scale", 1.0},
              {"env", {{"n_agents", 1}}},
              {"network", {{"embed_dim", 16}}},
              {"sac", {{"batch_size", kBatch}, {"lr", kLr}}},
              {"train",
               {{"max_env_steps", kReachBudget},
                {"eval_every_episodes", 50},
                {"eval_episodes", 20},
                {"early_stop_success", kEarlyStop}}}};
}

json bar_config(const std::string& method) {
  json j{{"task", "adjust_bar"},
         {"method", method},
         {"seeds", {0, 1, 2}},
         {"desk_scale", 1.0},
         {"env", {{"n_agents", 2}}},
         {"network", {{"embed_dim", 16}}},
         {"sac", {{"batch_size", kBatch}, {"lr", kLr}}},
         {"train",
          {{"max_env_steps", kBarBudget},
           {"eval_every_episodes", 50},
           {"eval_episodes", 20},
           {"early_stop_success", kEarlyStop}}}};
  if (method == "dair") j["dair"] = {{"lambda", 0.05}};
  return j;
}

json curriculum_config() {
  // Full-scale stage budgets through the desk_scale path: 20k/60k/100k here.
  return json{{"task", "rearrange"},
              {"method", "dair"},
              {"seeds", {0}},
              {"desk_scale", 0.02},
              {"env", {{"n_agents", 2}}},
              {"network", {{"embed_dim", 16}}},
              {"dair", {{"lambda", 0.05}}},
              {"sac", {{"batch_size", kBatch}, {"lr", kLr}}},
              {"curriculum",
               {{{"objects", 1}, {"env_steps", 1000000}},
                {{"objects", 2}, {"env_steps", 3000000}},
                {{"objects", 3}, {"env_steps", 5000000}}}},
              {"train",
               {{"max_env_steps", 5000000},
                {"eval_every_episodes", 50},
                {"eval_episodes", 20}}}};
}

json mlp_config() {
  return json{{"task", "rearrange"},
              {"method", "mlp"},
              {"seeds", {0}},
              {"desk_scale", 1.0},
              {"env", {{"n_agents", 2}, {"objects", 2}}},
              {"network", {{"embed_dim", 16}}},
              {"sac", {{"batch_size", 64}, {"lr", kLr}, {"updates_per_collection", 20}}},
              {"train",
               {{"max_env_steps", 2000},
                {"eval_every_episodes", 0},
                {"eval_episodes", 5}}}};
}

json determinism_config() {
  return json{{"task", "push_door"},
              {"method", "dair"},
              {"seeds", {0}},
              {"desk_scale", 1.0},
              {"env", {{"n_agents", 2}}},
              {"network", {{"embed_dim", 16}}},
              {"dair", {{"lambda", 0.05}}},
              {"sac", {{"batch_size", kBatch}, {"lr", kLr}, {"updates_per_collection", 50}}},
              {"train",
               {{"max_env_steps", 4000}, {"eval_every_episodes", 0}, {"eval_episodes", 5}}}};
}

// ---------------------------------------------------------------------------
// Criterion 1: every training loss matches central finite differences on a
// tiny two-agent, two-region setup across kGradDraws fresh parameter draws.

void criterion_grad_suite() {
  const double t0 = now_s();
  double worst = 0.0;
  std::string worst_where;
  std::size_t coords = 0;

  TrainerConfig cfg;
  cfg.env.task = dair::Task::rearrange;
  cfg.env.objects = 2;
  cfg.env.n_agents = 2;
  cfg.embed_dim = 16;
  cfg.sac.batch_size = 4;
  cfg.dair.lambda = 0.05;

  const auto note = [&](const dair::test::GradCheckResult& r, const char* which, int draw) {
    coords += r.coords_checked;
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      worst_where = std::string(which) + " draw " + std::to_string(draw) + ": " + r.worst;
    }
  };

  for (int draw = 0; draw < kGradDraws; ++draw) {
    Trainer t(cfg, 1000 + static_cast<std::uint64_t>(draw));
    t.insert_episode(t.collect_episode(true));
    Rng rng(500 + static_cast<std::uint64_t>(draw));
    const auto batch = t.buffer().sample_batch(4, rng);
    Rng picker(7000 + static_cast<std::uint64_t>(draw));

    std::vector<Tensor> eps;
    {
      Rng nrng(9000 + static_cast<std::uint64_t>(draw));
      for (int i = 0; i < 2; ++i) {
        Tensor e(4, 2);
        for (double& v : e.data()) v = nrng.normal();
        eps.push_back(std::move(e));
      }
    }

    // Critic regression toward fixed soft targets.
    {
      const auto targets = t.compute_targets(batch, &eps);
      std::vector<Tensor*> params;
      for (int i = 0; i < 2; ++i) {
        for (Tensor* p : t.agent(i).q1.parameters()) params.push_back(p);
        for (Tensor* p : t.agent(i).q2.parameters()) params.push_back(p);
      }
      note(dair::test::check_gradients(
               params, [&](Tape& tape) { return t.build_critic_loss(tape, batch, targets); },
               1e-7, 2, &picker),
           "critic", draw);
    }

    // Actor objective with pinned reparameterization noise.
    {
      std::vector<Tensor*> params;
      for (int i = 0; i < 2; ++i)
        for (Tensor* p : t.agent(i).policy.parameters()) params.push_back(p);
      note(dair::test::check_gradients(
               params, [&](Tape& tape) { return t.build_actor_loss(tape, batch, eps).loss; },
               1e-7, 2, &picker),
           "actor", draw);
    }

    // Attention-overlap penalty through both policy trunks.
    {
      std::vector<Tensor*> params;
      for (int i = 0; i < 2; ++i)
        for (Tensor* p : t.agent(i).policy.parameters()) params.push_back(p);
      const dair::EntityBatch eb = t.batch_obs(batch, false);
      note(dair::test::check_gradients(
               params,
               [&](Tape& tape) {
                 std::vector<Val> alphas;
                 for (int i = 0; i < 2; ++i)
                   alphas.push_back(dair::forward_policy(tape, t.agent(i).policy, eb, i).alpha);
                 return dair::total_overlap_loss(tape, alphas);
               },
               1e-7, 2, &picker),
           "overlap", draw);
    }

    // Temperature objective, policies held fixed.
    {
      std::vector<double> mean_logp;
      {
        Tape tape;
        mean_logp = t.build_actor_loss(tape, batch, eps).mean_logp;
      }
      for (int i = 0; i < 2; ++i) {
        std::vector<Tensor*> params{&t.agent(i).log_tau};
        const double push = -(mean_logp[static_cast<std::size_t>(i)] +
                              -cfg.env.action_dim());
        note(dair::test::check_gradients(
                 params,
                 [&](Tape& tape) {
                   return tape.scale(tape.exp(tape.param(t.agent(i).log_tau)), push);
                 },
                 1e-7, 0, &picker),
             "temperature", draw);
      }
    }
  }

  const double secs = now_s() - t0;
  const bool pass = worst < kGradRelTol && secs < kGradMaxSeconds && coords > 0;
  report(1, "gradient suite", pass,
         std::to_string(kGradDraws) + " draws, " + std::to_string(coords) +
             " coords, max rel err " + fmt3(worst) + (worst_where.empty() ? "" : " at " + worst_where) +
             ", " + fmt1(secs) + "s");
}

// ---------------------------------------------------------------------------
// Criterion 2: attention rows live on the simplex and the overlap penalty
// keeps its range, symmetry and zero-iff-disjoint properties.

void criterion_simplex_overlap() {
  dair::NetConfig ncfg;
  ncfg.arch = dair::Arch::attention;
  ncfg.head = dair::HeadKind::policy;
  ncfg.embed_dim = 16;
  ncfg.n_agents = 2;
  ncfg.n_regions = 2;

  const int entities = ncfg.entities();
  const int batch = 50;
  const int param_draws = kSimplexDraws / (batch * ncfg.n_agents);  // 100 nets

  int rows_checked = 0;
  double worst_sum_err = 0.0, min_w = 1.0, max_pair = 0.0;
  bool simplex_ok = true, range_ok = true, symmetry_ok = true;

  Rng rng(77);
  for (int d = 0; d < param_draws; ++d) {
    dair::NetworkParams net0 = dair::NetworkParams::make(ncfg, rng);
    dair::NetworkParams net1 = dair::NetworkParams::make(ncfg, rng);

    dair::EntityBatch eb;
    eb.batch = static_cast<std::size_t>(batch);
    for (int e = 0; e < entities; ++e) {
      const std::size_t width = e < ncfg.n_agents ? 4 : 6;
      std::vector<double> flat;
      flat.reserve(static_cast<std::size_t>(batch) * width);
      for (int b = 0; b < batch; ++b)
        for (std::size_t k = 0; k < width; ++k) flat.push_back(rng.uniform(-1.0, 1.0));
      eb.feats.emplace_back(static_cast<std::size_t>(batch), width, std::move(flat));
    }

    Tape tape;
    const Val a0 = dair::forward_policy(tape, net0, eb, 0).alpha;
    const Val a1 = dair::forward_policy(tape, net1, eb, 1).alpha;
    for (Val a : {a0, a1}) {
      const auto vals = tape.values(a);
      for (int b = 0; b < batch; ++b) {
        double sum = 0.0;
        for (int e = 0; e < entities; ++e) {
          const double w = vals[static_cast<std::size_t>(b * entities + e)];
          if (!(w >= 0.0) || !std::isfinite(w)) simplex_ok = false;
          min_w = std::min(min_w, w);
          sum += w;
        }
        worst_sum_err = std::max(worst_sum_err, std::abs(sum - 1.0));
        ++rows_checked;
      }
    }
    if (worst_sum_err > kRowSumTol) simplex_ok = false;

    // Range and exact symmetry of the pair penalty on these rows.
    const std::vector<Val> fwd{a0, a1}, rev{a1, a0};
    const double v_fwd = tape.value(dair::total_overlap_loss(tape, fwd));
    const double v_rev = tape.value(dair::total_overlap_loss(tape, rev));
    if (v_fwd < 0.0 || v_fwd > 1.0) range_ok = false;
    if (v_fwd != v_rev) symmetry_ok = false;
    max_pair = std::max(max_pair, v_fwd);
  }

  // Zero iff disjoint, on exact rows: disjoint supports give exactly 0, any
  // shared entity with positive mass on both sides gives strictly positive.
  bool disjoint_ok = true;
  Rng zrng(78);
  for (int trial = 0; trial < 1000; ++trial) {
    const double x = zrng.uniform(0.1, 0.9), y = zrng.uniform(0.1, 0.9);
    std::vector<double> a{x, 1.0 - x, 0.0, 0.0}, b{0.0, 0.0, y, 1.0 - y};
    if (trial % 2 == 1) std::swap(a, b);
    Tape tape;
    const std::vector<Val> alphas{tape.constant(1, 4, a), tape.constant(1, 4, b)};
    if (tape.value(dair::total_overlap_loss(tape, alphas)) != 0.0) disjoint_ok = false;
    // Sharing one entity with positive mass on both sides must be strictly
    // positive.
    const std::vector<double> u{0.5 * x, 1.0 - x, 0.5 * x, 0.0},
        v{0.0, 0.0, y, 1.0 - y};
    const std::vector<Val> shared{tape.constant(1, 4, u), tape.constant(1, 4, v)};
    if (!(tape.value(dair::total_overlap_loss(tape, shared)) > 0.0)) disjoint_ok = false;
  }

  const bool pass = simplex_ok && range_ok && symmetry_ok && disjoint_ok &&
                    rows_checked >= kSimplexDraws;
  report(2, "simplex and overlap invariants", pass,
         std::to_string(rows_checked) + " rows, worst |sum-1| " + fmt3(worst_sum_err) +
             ", min weight " + fmt3(min_w) + ", max pair loss " + fmt3(max_pair) +
             ", disjoint " + (disjoint_ok ? "ok" : "violated"));
}

// ---------------------------------------------------------------------------
// Criterion 3: single-agent sparse reach with relabeling learns to >= 90%
// evaluation success on every seed inside the step and wall budgets.

void criterion_reach() {
  const RunOutput run = train_cached("reach_sanity", reach_config());
  bool pass = run.seeds.size() == 3 && run.train_seconds < kReachMaxSeconds;
  std::string detail;
  for (const FinalEval& e : run.seeds) {
    if (e.success < kReachSuccessPct || e.env_steps > kReachBudget) pass = false;
    detail += (detail.empty() ? "" : ", ") + fmt1(e.success) + "% @" +
              std::to_string(e.env_steps);
  }
  report(3, "reach sanity", pass,
         detail + " steps; " + fmt1(run.train_seconds) + "s train");
}

// ---------------------------------------------------------------------------
// Criterion 4: on sparse door (and its latched box variant) DAIR beats the
// attention baseline directionally: lower conflict, domination closer to 50,
// mean attention overlap lower by at least 30%.

void criterion_door_box() {
  const RunOutput door_d = train_cached("door_dair", door_config("dair", 0.05, false, false));
  const RunOutput door_a = train_cached("door_attn", door_config("attention", 0.0, false, false));
  const RunOutput box_d = train_cached("box_dair", door_config("dair", 0.05, true, false));
  const RunOutput box_a = train_cached("box_attn", door_config("attention", 0.0, true, false));

  const double c_d = door_d.mean(&FinalEval::conflict), c_a = door_a.mean(&FinalEval::conflict);
  const double dom_d = box_d.mean(&FinalEval::domination),
               dom_a = box_a.mean(&FinalEval::domination);
  const double o_d = door_d.mean(&FinalEval::overlap), o_a = door_a.mean(&FinalEval::overlap);

  const bool conflict_ok = c_d < c_a;
  const bool domination_ok = std::abs(dom_d - 50.0) < std::abs(dom_a - 50.0);
  const bool overlap_ok = o_d <= (1.0 - kOverlapDropRel) * o_a;
  report(4, "door and box directional comparison", conflict_ok && domination_ok && overlap_ok,
         "conflict " + fmt1(c_d) + " vs " + fmt1(c_a) + ", domination " + fmt1(dom_d) + " vs " +
             fmt1(dom_a) + ", overlap " + fmt3(o_d) + " vs " + fmt3(o_a));
}

// ---------------------------------------------------------------------------
// Criterion 5: the conflict gap survives an explicit collision penalty.

void criterion_collision_penalty() {
  const RunOutput d = train_cached("door_coll_dair", door_config("dair", 0.05, false, true));
  const RunOutput a = train_cached("door_coll_attn", door_config("attention", 0.0, false, true));
  const double c_d = d.mean(&FinalEval::conflict), c_a = a.mean(&FinalEval::conflict);
  report(5, "collision penalty ablation", c_d < c_a,
         "conflict " + fmt1(c_d) + " vs " + fmt1(c_a));
}

// ---------------------------------------------------------------------------
// Criterion 6: a curriculum-trained attention policy evaluates cleanly beyond
// its training object counts; the fixed-width baseline refuses with the
// documented error.

void criterion_generalization() {
  const RunOutput cur = train_cached("curriculum_dair", curriculum_config());
  const fs::path ckpt = cur.dir / "seed_0" / "checkpoint_final.ckpt";
  const fs::path log = cur.dir / "eval.log";

  bool pass = true;
  std::string detail;

  const fs::path m4_dir = cur.dir / "eval_m4";
  const int rc4 = run_cli({"eval", "--checkpoint", ckpt.string(), "--episodes", "20", "--set",
                           "env.objects=4", "--out", m4_dir.string()},
                          log);
  double m4_success = 0.0;
  if (rc4 == 0) {
    std::ifstream f(m4_dir / "eval_summary.csv");
    std::string line;
    while (std::getline(f, line))
      if (line.rfind("success_rate,", 0) == 0) {
        std::stringstream ss(line.substr(std::string("success_rate,").size()));
        ss >> m4_success;
      }
  } else {
    pass = false;
  }
  if (m4_success <= 0.0) pass = false;
  detail += "M=4 exit " + std::to_string(rc4) + " success " + fmt1(m4_success) + "%";

  const int rc8 = run_cli(
      {"eval", "--checkpoint", ckpt.string(), "--episodes", "20", "--set", "env.objects=8"}, log);
  if (rc8 != 0) pass = false;
  detail += ", M=8 exit " + std::to_string(rc8);

  const RunOutput mlp = train_cached("mlp_fixed", mlp_config());
  const fs::path mlp_ckpt = mlp.dir / "seed_0" / "checkpoint_final.ckpt";
  for (int m : {1, 3}) {
    const int rc = run_cli({"eval", "--checkpoint", mlp_ckpt.string(), "--episodes", "2", "--set",
                            "env.objects=" + std::to_string(m)},
                           log);
    if (rc != 1) pass = false;
    detail += ", mlp M=" + std::to_string(m) + " exit " + std::to_string(rc);
  }
  report(6, "generalization across object counts", pass, detail);
}

// ---------------------------------------------------------------------------
// Criterion 7: final door success is insensitive to the penalty weight across
// a 10x lambda range.

void criterion_lambda_robustness() {
  const RunOutput l_mid = train_cached("door_dair", door_config("dair", 0.05, false, false));
  const RunOutput l_low = train_cached("door_lam002", door_config("dair", 0.02, false, false));
  const RunOutput l_high = train_cached("door_lam02", door_config("dair", 0.2, false, false));
  const double s_low = l_low.mean(&FinalEval::success), s_mid = l_mid.mean(&FinalEval::success),
               s_high = l_high.mean(&FinalEval::success);
  const double spread = std::max({s_low, s_mid, s_high}) - std::min({s_low, s_mid, s_high});
  report(7, "lambda robustness", spread <= kLambdaBandPts,
         "success " + fmt1(s_low) + "/" + fmt1(s_mid) + "/" + fmt1(s_high) +
             " (lambda 0.02/0.05/0.2), spread " + fmt1(spread) + " pts");
}

// ---------------------------------------------------------------------------
// Criterion 8: retraining with an identical config and seed reproduces the
// training metrics byte for byte.

void criterion_determinism() {
  const RunOutput a = train_cached("det_a", determinism_config());
  const RunOutput b = train_cached("det_b", determinism_config());
  const std::string ma = slurp(a.dir / "seed_0" / "metrics.csv");
  const std::string mb = slurp(b.dir / "seed_0" / "metrics.csv");
  const bool pass = !ma.empty() && ma == mb;
  report(8, "byte-identical retraining", pass,
         std::to_string(ma.size()) + " bytes " + (pass ? "identical" : "differ"));
}

// ---------------------------------------------------------------------------
// Criterion 9: on the two-handed bar task DAIR solves with balanced effort.

void criterion_bar_synergy() {
  const RunOutput d = train_cached("bar_dair", bar_config("dair"));
  const RunOutput a = train_cached("bar_attn", bar_config("attention"));
  const double s_d = d.mean(&FinalEval::success);
  const double dom_d = d.mean(&FinalEval::domination), dom_a = a.mean(&FinalEval::domination);
  const bool pass = s_d >= kBarSolveSuccessPct && dom_d <= kBarDominationMax && dom_d < dom_a;
  report(9, "bar synergy", pass,
         "success " + fmt1(s_d) + "%, domination " + fmt1(dom_d) + " vs " + fmt1(dom_a));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: %s [--only 1,2,...]\n", argv[0]);
      return 2;
    }
  }
  const char* fresh = std::getenv("DAIR_ACCEPT_FRESH");
  if (fresh && std::string(fresh) == "1") fs::remove_all(kCache);
  fs::create_directories(kCache);

  struct Entry {
    int idx;
    void (*fn)();
  };
  const Entry entries[] = {
      {1, criterion_grad_suite},    {2, criterion_simplex_overlap},
      {3, criterion_reach},         {4, criterion_door_box},
      {5, criterion_collision_penalty}, {6, criterion_generalization},
      {7, criterion_lambda_robustness}, {8, criterion_determinism},
      {9, criterion_bar_synergy},
  };
  for (const Entry& e : entries) {
    if (!only.empty() && !only.count(e.idx)) continue;
    try {
      e.fn();
    } catch (const std::exception& ex) {
      report(e.idx, "criterion", false, std::string("exception: ") + ex.what());
    }
  }
  return g_failures == 0 ? 0 : 1;
}
