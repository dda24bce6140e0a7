#include "dair/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dair/checkpoint.hpp"
#include "dair/experiment.hpp"

namespace dair {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::vector<double>> entity_positions(
    const std::vector<std::vector<double>>& entity_states) {
  std::vector<std::vector<double>> out;
  out.reserve(entity_states.size());
  for (const auto& row : entity_states) out.push_back({row[0], row[1]});
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) return cells;
    start = comma + 1;
  }
}

int run_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::vector<std::uint64_t>& seed_args, const std::string& out_override,
              const std::string& resume) {
  ExperimentConfig cfg;
  try {
    std::vector<std::string> overrides = sets;
    if (!out_override.empty()) overrides.push_back("out_dir=" + out_override);
    if (!seed_args.empty()) overrides.push_back("seeds=" + json(seed_args).dump());
    cfg = parse_experiment_file(config_path, overrides);
    if (!resume.empty() && !std::filesystem::exists(resume))
      throw std::invalid_argument("resume checkpoint not found: " + resume);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    const std::string resolved = resolved_json(cfg);
    for (const std::uint64_t seed : cfg.seeds) {
      const std::string dir = cfg.out_dir + "/seed_" + std::to_string(seed);
      std::filesystem::create_directories(dir);
      std::ofstream(dir + "/resolved_config.json") << resolved;
      json manifest;
      manifest["seed"] = seed;
      manifest["build"] = build_id();
      manifest["config_hash"] = config_hash(resolved);
      std::ofstream(dir + "/manifest.json") << manifest.dump(2) << "\n";

      Trainer trainer(cfg.trainer_config(), seed);
      if (!resume.empty()) trainer.load(resume);
      const TrainResult res = training_loop(trainer, cfg.train_settings(dir));
      std::cout << "seed " << seed << ": " << res.env_steps << " env steps, "
                << res.train_episodes.size() << " episodes, final eval success "
                << res.evals.back().success_rate << "% -> " << dir << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int run_eval(const std::string& ckpt_path, const std::vector<std::string>& sets, int episodes,
             std::uint64_t seed, bool deterministic, const std::string& out_dir,
             const std::string& traj_path) {
  ExperimentConfig cfg;
  TrainerConfig tc;
  try {
    if (episodes <= 0) throw std::invalid_argument("--episodes must be positive");
    const Checkpoint ck = load_checkpoint(ckpt_path);
    const ExperimentConfig trained = parse_experiment(ck.config_json);
    cfg = parse_experiment(ck.config_json, sets);
    const int trained_objects =
        trained.stages.empty() ? trained.env.objects : trained.stages.back().objects;
    // Curriculum checkpoints evaluate at their final-stage object count unless
    // the command line picks another.
    bool objects_overridden = false;
    for (const std::string& kv : sets)
      if (kv.rfind("env.objects=", 0) == 0) objects_overridden = true;
    if (!objects_overridden) cfg.env.objects = trained_objects;
    if (cfg.method == Method::mlp && cfg.env.objects != trained_objects)
      throw std::invalid_argument(
          "mlp policies have a fixed input width: trained with " +
          std::to_string(trained_objects) + " objects, cannot evaluate with " +
          std::to_string(cfg.env.objects) + "; use the attention architecture for that");
    tc = cfg.trainer_config();
    tc.stages.clear();  // evaluate exactly the requested environment
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    Trainer trainer(tc, seed);
    trainer.load(ckpt_path);

    std::ofstream traj;
    if (!traj_path.empty()) {
      traj.open(traj_path);
      write_trajectory_meta(traj, tc.env.n_agents, tc.env.entities(), to_string(tc.env.task));
    }

    std::vector<EpisodeMetrics> episodes_out;
    for (int e = 0; e < episodes; ++e) {
      const EpisodeRollout roll = trainer.collect_episode(!deterministic);
      EpisodeInputs in;
      in.infos = roll.infos;
      in.alphas = roll.alphas;
      in.success_step = roll.success_step;
      in.horizon = roll.horizon;
      in.conflict_threshold = tc.env.conflict_threshold;
      episodes_out.push_back(build_episode_metrics(in));
      if (traj.is_open()) write_trajectory_steps(traj, e, roll);
    }

    const auto rows = aggregate(episodes_out);
    std::cout << "checkpoint: " << ckpt_path << "\nepisodes: " << episodes << " ("
              << (deterministic ? "deterministic" : "stochastic") << " actions)\n";
    for (const SummaryRow& r : rows)
      std::cout << "  " << r.metric << ": " << r.mean << " +- " << r.stddev << "\n";
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      std::ofstream(out_dir + "/eval_summary.csv") << summary_to_csv(rows);
      std::cout << "wrote " << out_dir << "/eval_summary.csv\n";
    }
    if (traj.is_open()) std::cout << "wrote " << traj_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int run_replay(const std::string& dump_path, const std::string& out_dir) {
  std::ostringstream heatmap, trajectory;
  try {
    std::ifstream dump(dump_path);
    if (!dump) throw std::invalid_argument("cannot open trajectory dump: " + dump_path);
    replay_to_plot_data(dump, heatmap, trajectory);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  try {
    std::filesystem::create_directories(out_dir);
    std::ofstream(out_dir + "/alpha_heatmap.csv") << heatmap.str();
    std::ofstream(out_dir + "/trajectory.csv") << trajectory.str();
    std::cout << "wrote " << out_dir << "/alpha_heatmap.csv and " << out_dir
              << "/trajectory.csv\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int run_plot_data(const std::string& runs_dir, const std::string& out_dir) {
  std::string curves;
  std::vector<SummaryRow> summary;
  try {
    std::vector<std::filesystem::path> seed_dirs;
    for (const auto& entry : std::filesystem::directory_iterator(runs_dir))
      if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0)
        seed_dirs.push_back(entry.path());
    std::sort(seed_dirs.begin(), seed_dirs.end());
    if (seed_dirs.empty())
      throw std::invalid_argument("no seed_* directories under " + runs_dir);

    std::string header;
    std::vector<std::vector<double>> finals;  // per seed, final eval row cells
    for (const auto& dir : seed_dirs) {
      const std::string path = (dir / "eval.csv").string();
      std::ifstream f(path);
      if (!f) throw std::invalid_argument("missing " + path);
      std::string line;
      int lineno = 0;
      std::vector<std::string> last_cells;
      while (std::getline(f, line)) {
        ++lineno;
        if (lineno == 1) {
          if (header.empty()) {
            header = line;
            curves = "seed," + header + "\n";
          } else if (line != header) {
            throw std::invalid_argument(path + " line 1: header differs between seeds");
          }
          continue;
        }
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != split_csv(header).size())
          throw std::invalid_argument(path + " line " + std::to_string(lineno) +
                                      ": wrong column count");
        curves += dir.filename().string().substr(5) + "," + line + "\n";
        last_cells = cells;
      }
      if (last_cells.empty())
        throw std::invalid_argument(path + ": no evaluation rows");
      std::vector<double> vals;
      for (std::size_t c = 2; c < last_cells.size(); ++c) {
        try {
          vals.push_back(std::stod(last_cells[c]));
        } catch (const std::exception&) {
          throw std::invalid_argument(path + ": malformed number \"" + last_cells[c] + "\"");
        }
      }
      finals.push_back(std::move(vals));
    }

    const auto names = split_csv(header);
    for (std::size_t c = 2; c < names.size(); ++c) {
      std::vector<double> per_seed;
      for (const auto& row : finals) per_seed.push_back(row[c - 2]);
      const auto [m, s] = mean_std(per_seed);
      summary.push_back({names[c], m, s});
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  try {
    std::filesystem::create_directories(out_dir);
    std::ofstream(out_dir + "/final_summary.csv") << summary_to_csv(summary);
    std::ofstream(out_dir + "/curves.csv") << curves;
    std::cout << "wrote " << out_dir << "/final_summary.csv and " << out_dir << "/curves.csv\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

void write_trajectory_meta(std::ostream& out, int n_agents, int entities,
                           const std::string& task) {
  json meta;
  meta["meta"] = {{"n_agents", n_agents}, {"entities", entities}, {"task", task}};
  out << meta.dump() << "\n";
}

void write_trajectory_steps(std::ostream& out, int episode, const EpisodeRollout& roll) {
  for (std::size_t t = 0; t < roll.transitions.size(); ++t) {
    json line;
    line["episode"] = episode;
    line["step"] = t + 1;
    line["positions"] = entity_positions(roll.transitions[t].next_entity_states);
    line["alphas"] = roll.alphas[t];
    line["reward"] = roll.transitions[t].reward;
    line["success"] = roll.success_step && *roll.success_step == static_cast<int>(t) + 1;
    out << line.dump() << "\n";
  }
}

void replay_to_plot_data(std::istream& dump, std::ostream& heatmap, std::ostream& trajectory) {
  const auto fail = [](int lineno, const std::string& what) {
    throw std::runtime_error("trajectory dump line " + std::to_string(lineno) + ": " + what);
  };

  std::string line;
  if (!std::getline(dump, line)) fail(1, "empty file, expected a meta header");
  json meta = json::parse(line, nullptr, false);
  if (meta.is_discarded() || !meta.contains("meta") || !meta["meta"].contains("n_agents") ||
      !meta["meta"].contains("entities"))
    fail(1, "expected {\"meta\":{\"n_agents\":..,\"entities\":..,..}}");
  const int n_agents = meta["meta"]["n_agents"].get<int>();
  const int entities = meta["meta"]["entities"].get<int>();
  if (n_agents <= 0 || entities < n_agents) fail(1, "inconsistent meta shape");

  heatmap << "episode,step,agent";
  for (int e = 0; e < entities; ++e) heatmap << ",alpha_" << e;
  heatmap << "\n";
  trajectory << "episode,step,entity,kind,x,y,reward,success\n";

  int lineno = 1;
  while (std::getline(dump, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(lineno, "not valid JSON (truncated dump?)");
    for (const char* key : {"episode", "step", "positions", "alphas", "reward", "success"})
      if (!j.contains(key)) fail(lineno, std::string("missing field \"") + key + "\"");
    const auto& alphas = j["alphas"];
    const auto& positions = j["positions"];
    if (!alphas.is_array() || static_cast<int>(alphas.size()) != n_agents)
      fail(lineno, "expected one alpha row per agent");
    if (!positions.is_array() || static_cast<int>(positions.size()) != entities)
      fail(lineno, "expected one position per entity");

    for (int a = 0; a < n_agents; ++a) {
      const auto& row = alphas[a];
      if (!row.is_array() || static_cast<int>(row.size()) != entities)
        fail(lineno, "alpha row " + std::to_string(a) + " is not one weight per entity");
      heatmap << j["episode"] << "," << j["step"] << "," << a;
      for (int e = 0; e < entities; ++e) heatmap << "," << fmt(row[e].get<double>());
      heatmap << "\n";
    }
    for (int e = 0; e < entities; ++e) {
      const auto& p = positions[e];
      if (!p.is_array() || p.size() != 2) fail(lineno, "positions must be [x,y] pairs");
      trajectory << j["episode"] << "," << j["step"] << "," << e << ","
                 << (e < n_agents ? "agent" : "region") << "," << fmt(p[0].get<double>()) << ","
                 << fmt(p[1].get<double>()) << "," << fmt(j["reward"].get<double>()) << ","
                 << (j["success"].get<bool>() ? 1 : 0) << "\n";
    }
  }
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Desk-scale lab for two-agent cooperative planar manipulation"};
  app.require_subcommand(1);

  std::string config_path, out_override, resume, ckpt_path, dump_path, runs_dir, traj_path;
  std::vector<std::string> sets;
  std::vector<std::uint64_t> seed_args;
  std::uint64_t eval_seed = 0;
  int episodes = 20;
  bool deterministic = true;
  std::string out_dir = ".";

  CLI::App* train = app.add_subcommand("train", "Train one experiment, sequentially per seed");
  train->add_option("--config", config_path, "Experiment config JSON")->required();
  train->add_option("--set", sets, "Override a config key, e.g. --set dair.lambda=0.2");
  train->add_option("--seed", seed_args, "Replace the config's seed list");
  train->add_option("--out", out_override, "Replace the config's output directory");
  train->add_option("--resume", resume, "Warm-start parameters from a checkpoint");

  CLI::App* eval = app.add_subcommand("eval", "Roll out a frozen checkpointed policy");
  eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  eval->add_option("--episodes", episodes, "Evaluation episodes");
  eval->add_option("--seed", eval_seed, "Environment seed");
  eval->add_option("--set", sets, "Override a config key, e.g. --set env.objects=8");
  eval->add_option("--out", out_dir, "Directory for eval_summary.csv");
  eval->add_option("--trajectories", traj_path, "Write a trajectory dump (JSON lines)");
  eval->add_flag("--deterministic,!--stochastic", deterministic,
                 "Use distribution means (default) or sample");

  CLI::App* replay = app.add_subcommand("replay", "Turn a trajectory dump into plot data");
  replay->add_option("--dump", dump_path, "Trajectory dump from eval --trajectories")->required();
  replay->add_option("--out", out_dir, "Output directory");

  CLI::App* plot = app.add_subcommand("plot-data", "Aggregate per-seed results for plotting");
  plot->add_option("--runs", runs_dir, "Experiment output directory (holds seed_*/)")->required();
  plot->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*train) return run_train(config_path, sets, seed_args, out_override, resume);
  if (*eval) {
    std::string eval_out = eval->count("--out") ? out_dir : "";
    return run_eval(ckpt_path, sets, episodes, eval_seed, deterministic, eval_out, traj_path);
  }
  if (*replay) return run_replay(dump_path, out_dir);
  if (*plot) return run_plot_data(runs_dir, out_dir);
  return 1;
}

}  // namespace dair
