#include "dair/dair_loss.hpp"

#include <stdexcept>
#include <string>

namespace dair {
namespace {

using ad::Tape;
using ad::Val;

void check_alphas(Tape& tape, std::span<const Val> alphas) {
  if (alphas.empty()) throw std::invalid_argument("overlap loss: no attention inputs");
  const std::size_t rows = tape.rows(alphas[0]);
  const std::size_t cols = tape.cols(alphas[0]);
  for (std::size_t i = 1; i < alphas.size(); ++i) {
    if (tape.rows(alphas[i]) != rows || tape.cols(alphas[i]) != cols)
      throw std::invalid_argument(
          "overlap loss: attention " + std::to_string(i) + " is (" +
          std::to_string(tape.rows(alphas[i])) + "x" + std::to_string(tape.cols(alphas[i])) +
          "), expected (" + std::to_string(rows) + "x" + std::to_string(cols) + ")");
  }
}

Val pair_term(Tape& tape, Val a, Val b, bool detach_partner) {
  if (!detach_partner) {
    return tape.mean(tape.square(tape.sum_rows(tape.mul(a, b))));
  }
  Val one = tape.mean(tape.square(tape.sum_rows(tape.mul(a, tape.detach(b)))));
  Val two = tape.mean(tape.square(tape.sum_rows(tape.mul(tape.detach(a), b))));
  return tape.scale(tape.add(one, two), 0.5);
}

}  // namespace

Val attn_overlap_loss(Tape& tape, std::span<const Val> alphas, int agent_index) {
  check_alphas(tape, alphas);
  if (agent_index < 0 || static_cast<std::size_t>(agent_index) >= alphas.size())
    throw std::invalid_argument("overlap loss: agent_index " + std::to_string(agent_index) +
                                " out of range for " + std::to_string(alphas.size()) +
                                " agents");
  Val acc{};
  for (std::size_t j = 0; j < alphas.size(); ++j) {
    if (j == static_cast<std::size_t>(agent_index)) continue;
    Val term = pair_term(tape, alphas[static_cast<std::size_t>(agent_index)], alphas[j], false);
    acc = acc.valid() ? tape.add(acc, term) : term;
  }
  return acc.valid() ? acc : tape.scalar(0.0);
}

Val total_overlap_loss(Tape& tape, std::span<const Val> alphas, bool detach_partner) {
  check_alphas(tape, alphas);
  Val acc{};
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    for (std::size_t j = i + 1; j < alphas.size(); ++j) {
      Val term = pair_term(tape, alphas[i], alphas[j], detach_partner);
      acc = acc.valid() ? tape.add(acc, term) : term;
    }
  }
  return acc.valid() ? acc : tape.scalar(0.0);
}

double overlap_metric(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("overlap metric: size mismatch " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double mean_pairwise_overlap(const std::vector<std::vector<double>>& alpha_per_agent) {
  if (alpha_per_agent.size() < 2) return 0.0;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < alpha_per_agent.size(); ++i)
    for (std::size_t j = i + 1; j < alpha_per_agent.size(); ++j) {
      total += overlap_metric(alpha_per_agent[i], alpha_per_agent[j]);
      ++pairs;
    }
  return total / static_cast<double>(pairs);
}

}  // namespace dair
