#pragma once

#include <iosfwd>
#include <string>

#include "dair/trainer.hpp"

namespace dair {

// Entry point behind the dair_lab binary: train / eval / replay / plot-data
// subcommands. Returns 0 on success, 1 on bad input (flags, config, files),
// 2 on a runtime failure mid-run.
int cli_main(int argc, char** argv);

// Trajectory dumps are JSON lines: a meta header naming the shape, then one
// object per step with entity positions, per-agent attention rows, reward and
// success. Empty episodes contribute no step lines.
void write_trajectory_meta(std::ostream& out, int n_agents, int entities, const std::string& task);
void write_trajectory_steps(std::ostream& out, int episode, const EpisodeRollout& roll);

// Converts a dump into two flat CSVs for external plotting: an attention
// heat map (one row per step and agent, one column per entity) and entity
// trajectory traces. Throws std::runtime_error naming the 1-based line of the
// first malformed record.
void replay_to_plot_data(std::istream& dump, std::ostream& heatmap, std::ostream& trajectory);

}  // namespace dair
