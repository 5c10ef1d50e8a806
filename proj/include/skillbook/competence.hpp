#pragma once
// Beta-Bernoulli competence tracking. Each (agent, skill) pair carries a
// Beta(alpha, beta) posterior over step success, seeded at the
// uninformative Beta(1, 1); a success increments alpha, a failure beta.
// Per-(agent, mode) cost is an exact running mean. All updates are pure:
// they return a new profile and never mutate their input.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "handbook.hpp"

namespace skillbook {

// One labelled step: which agent acted in which mode, which skills the
// step exercised, whether it counted as a success, and what it cost.
struct Outcome {
  std::string agent_id;
  std::string mode;
  std::vector<std::string> skill_ids;
  bool success = false;
  double cost = 0.0;
};

// Posterior mean of step success for a skill; defaults to the prior mean
// 0.5 when the profile holds no counter for it.
inline double posterior_mean(const AgentProfile& profile, const std::string& skill_id) {
  auto it = profile.counters.find(skill_id);
  if (it == profile.counters.end()) return kPriorAlpha / (kPriorAlpha + kPriorBeta);
  const BetaCounter& c = it->second;
  return c.alpha / (c.alpha + c.beta);
}

// Folds a batch of outcomes into the profile's counters. Every outcome must
// match the profile's agent and mode, and every referenced skill must exist
// in the handbook under that mode. Duplicate skill ids within one outcome
// count once: an outcome is a set of exercised skills.
inline AgentProfile update_counters(const AgentProfile& profile,
                                    std::span<const Outcome> outcomes,
                                    const Handbook& handbook) {
  AgentProfile next = profile;
  for (const auto& o : outcomes) {
    if (o.agent_id != profile.agent_id)
      throw DataError("outcome for agent " + o.agent_id + " applied to profile of " +
                      profile.agent_id);
    if (o.mode != profile.mode)
      throw DataError("outcome for mode " + o.mode + " applied to profile of mode " +
                      profile.mode);
    std::vector<std::string> ids = o.skill_ids;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (const auto& sid : ids) {
      const Skill* s = find_skill(handbook, sid);
      if (!s) throw DataError("outcome references unknown skill: " + sid);
      if (s->mode != profile.mode)
        throw DataError("outcome references skill " + sid + " of mode " + s->mode);
      BetaCounter& c = next.counters[sid];  // inserts Beta(1, 1) when absent
      if (o.success)
        c.alpha += 1.0;
      else
        c.beta += 1.0;
    }
  }
  return next;
}

// Adds one cost observation via the exact running mean
//   mean' = mean + (cost - mean) / (count + 1)
// so stored state stays a two-number summary yet equals the full-sample mean.
inline AgentProfile update_cost(const AgentProfile& profile, double observed_cost) {
  if (observed_cost < 0.0 || !std::isfinite(observed_cost))
    throw DataError("cost observation must be finite and non-negative");
  AgentProfile next = profile;
  const double n = static_cast<double>(next.cost_stats.count);
  next.cost_stats.mean += (observed_cost - next.cost_stats.mean) / (n + 1.0);
  next.cost_stats.count += 1;
  return next;
}

// Combines profiles that were independently advanced from a common base,
// e.g. evidence folded in per trajectory shard. Counter deltas and cost
// mass add exactly; nothing is double-counted because each branch carries
// only its own increments on top of the base.
inline AgentProfile merge_updates(const AgentProfile& base,
                                  std::span<const AgentProfile> branches) {
  AgentProfile merged = base;
  double cost_mass = base.cost_stats.mean * static_cast<double>(base.cost_stats.count);
  std::uint64_t cost_count = base.cost_stats.count;
  for (const auto& b : branches) {
    if (b.agent_id != base.agent_id || b.mode != base.mode)
      throw DataError("merge_updates requires branches of the same (agent, mode)");
    for (const auto& [sid, counter] : b.counters) {
      auto it = base.counters.find(sid);
      const BetaCounter base_counter =
          it == base.counters.end() ? BetaCounter{} : it->second;
      BetaCounter& m = merged.counters[sid];
      m.alpha += counter.alpha - base_counter.alpha;
      m.beta += counter.beta - base_counter.beta;
    }
    if (b.cost_stats.count < base.cost_stats.count)
      throw DataError("merge_updates branch lost cost observations");
    cost_mass += b.cost_stats.mean * static_cast<double>(b.cost_stats.count) -
                 base.cost_stats.mean * static_cast<double>(base.cost_stats.count);
    cost_count += b.cost_stats.count - base.cost_stats.count;
  }
  merged.cost_stats.count = cost_count;
  merged.cost_stats.mean = cost_count == 0 ? 0.0 : cost_mass / static_cast<double>(cost_count);
  return merged;
}

}  // namespace skillbook
