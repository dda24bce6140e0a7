#pragma once

#include <span>
#include <vector>

#include "dair/tape.hpp"

namespace dair {

struct DairConfig {
  double lambda = 0.05;
  bool apply_to_policy = true;
  bool apply_to_q = true;
  // When set, each pair term becomes the average of the two one-sided losses
  // with the partner's weights frozen: same value, but gradients push each
  // agent against a fixed partner instead of flowing jointly.
  bool detach_partner = false;
};

// Disentanglement penalty for one agent: sum over the other agents j of the
// batch-mean squared inner product <alpha_i, alpha_j>. Every alpha must be a
// [batch x entities] matrix with rows on the simplex.
ad::Val attn_overlap_loss(ad::Tape& tape, std::span<const ad::Val> alphas, int agent_index);

// Symmetric total over unordered pairs, sum_{i<j} mean_B <alpha_i, alpha_j>^2.
// This is the term the trainer scales by lambda; with a single agent there are
// no pairs and the result is a constant zero. See DairConfig::detach_partner
// for the frozen-partner variant.
ad::Val total_overlap_loss(ad::Tape& tape, std::span<const ad::Val> alphas,
                           bool detach_partner = false);

// Diagnostic on plain rows: the unsquared inner product, averaged over all
// unordered agent pairs. Used for logging and run comparisons.
double overlap_metric(std::span<const double> a, std::span<const double> b);
double mean_pairwise_overlap(const std::vector<std::vector<double>>& alpha_per_agent);

}  // namespace dair
