#pragma once
// Evaluation metrics and reference baselines: selection entropy (the
// routing-collapse diagnostic), trajectory-set summaries, percentile
// bootstrap confidence intervals, and agent overrides for the
// uniform-random and always-strongest baselines.

#include <span>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "router.hpp"

namespace skillbook {

// Shannon entropy (bits) of the agent-selection distribution. 0 means
// total collapse onto one agent; log2(n) means a uniform spread over n.
inline double selection_entropy_bits(const std::map<std::string, std::uint64_t>& counts) {
  double total = 0.0;
  for (const auto& [agent, n] : counts) total += static_cast<double>(n);
  if (total == 0.0) return 0.0;
  double h = 0.0;
  for (const auto& [agent, n] : counts) {
    if (n == 0) continue;
    const double p = static_cast<double>(n) / total;
    h -= p * std::log2(p);
  }
  return h;
}

inline std::map<std::string, std::uint64_t> agent_selection_counts(
    std::span<const Trajectory> trajectories) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& t : trajectories)
    for (const auto& s : t.steps) counts[s.agent] += 1;
  return counts;
}

struct EvalSummary {
  std::size_t n_trajectories = 0;
  std::size_t n_steps = 0;
  double mean_reward = 0.0;
  double mean_total_cost = 0.0;
  std::map<double, double> objective_by_lambda;  // J = reward - lambda * cost
  std::map<std::string, double> selection_share;
  double entropy_bits = 0.0;
};

inline EvalSummary summarize(std::span<const Trajectory> trajectories,
                             std::span<const double> lambdas) {
  EvalSummary s;
  s.n_trajectories = trajectories.size();
  for (const auto& t : trajectories) {
    s.n_steps += t.steps.size();
    s.mean_reward += t.reward;
    s.mean_total_cost += t.total_cost;
  }
  if (s.n_trajectories > 0) {
    s.mean_reward /= static_cast<double>(s.n_trajectories);
    s.mean_total_cost /= static_cast<double>(s.n_trajectories);
  }
  for (double lambda : lambdas)
    s.objective_by_lambda[lambda] = s.mean_reward - lambda * s.mean_total_cost;
  auto counts = agent_selection_counts(trajectories);
  for (const auto& [agent, n] : counts)
    s.selection_share[agent] =
        s.n_steps == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(s.n_steps);
  s.entropy_bits = selection_entropy_bits(counts);
  return s;
}

// Per-trajectory objective samples, for paired comparisons.
inline std::vector<double> objective_samples(std::span<const Trajectory> trajectories,
                                             double lambda) {
  std::vector<double> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) out.push_back(t.reward - lambda * t.total_cost);
  return out;
}

// Percentile bootstrap CI for the mean of `samples`. Deterministic under
// the seed; `confidence` is two-sided (e.g. 0.95).
inline std::pair<double, double> bootstrap_ci_mean(std::span<const double> samples,
                                                   int resamples, double confidence,
                                                   std::uint64_t seed) {
  if (samples.empty()) throw ConfigError("bootstrap needs at least one sample");
  if (resamples < 1) throw ConfigError("bootstrap needs at least one resample");
  Rng rng(derive_seed(seed, "bootstrap"));
  std::vector<double> means;
  means.reserve(resamples);
  const std::size_t n = samples.size();
  for (int r = 0; r < resamples; ++r) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += samples[rng.below(n)];
    means.push_back(sum / static_cast<double>(n));
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - confidence) / 2.0;
  auto index = [&](double q) {
    double idx = q * static_cast<double>(means.size() - 1);
    return means[static_cast<std::size_t>(idx)];
  };
  return {index(tail), index(1.0 - tail)};
}

// Override that routes every step to one fixed agent.
inline AgentOverride fixed_agent_override(std::string agent) {
  return [agent = std::move(agent)](const InteractionState&,
                                    const std::string&) -> std::optional<std::string> {
    return agent;
  };
}

// Override that picks uniformly among the mode's allowed agents, with
// draws tied to (seed, query, turn) so runs replay exactly.
inline AgentOverride random_agent_override(const Handbook& handbook, std::uint64_t seed) {
  return [&handbook, seed](const InteractionState& state,
                           const std::string& mode) -> std::optional<std::string> {
    const ModeMetadata* meta = find_mode(handbook, mode);
    if (!meta || meta->allowed_agents.empty()) return std::nullopt;
    std::vector<std::string> roster = meta->allowed_agents;
    std::sort(roster.begin(), roster.end());
    Rng rng(derive_seed(seed, state.query + "|turn" + std::to_string(state.turn)));
    return roster[rng.below(roster.size())];
  };
}

// Round-robin over each mode's roster keyed by a running step count — the
// forced-exploration schedule used when gathering training data, so every
// agent gets observed on every kind of step.
class RoundRobinExplorer {
 public:
  explicit RoundRobinExplorer(const Handbook& handbook) : handbook_(handbook) {}

  AgentOverride override() {
    return [this](const InteractionState& state,
                  const std::string& mode) -> std::optional<std::string> {
      const ModeMetadata* meta = find_mode(handbook_, mode);
      if (!meta || meta->allowed_agents.empty()) return std::nullopt;
      std::vector<std::string> roster = meta->allowed_agents;
      std::sort(roster.begin(), roster.end());
      std::uint64_t& k = cursor_[mode];
      (void)state;
      return roster[(k++) % roster.size()];
    };
  }

 private:
  const Handbook& handbook_;
  std::map<std::string, std::uint64_t> cursor_;
};

}  // namespace skillbook
