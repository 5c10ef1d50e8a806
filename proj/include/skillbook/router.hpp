#pragma once
// Skill-aware, cost-aware agent routing. For each step: pick a mode via the
// pluggable mode policy, retrieve the mode's relevant skills with weights,
// score every allowed agent by
//
//   U(A) = sum_sigma w_sigma * alpha / (alpha + beta)  -  lambda_c * mean_cost(A)
//
// and take the argmax, breaking ties toward the cheaper then the
// lexicographically smaller agent id. All reductions run in sorted key
// order, so equal inputs give bit-identical decisions.

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "competence.hpp"
#include "policy.hpp"
#include "text.hpp"
#include "trajectory.hpp"

namespace skillbook {

// Skill weights for one step; weights are positive and sum to one unless
// the set is empty (mode with no skills yet).
struct ActiveSkillSet {
  std::map<std::string, double> entries;  // skill id -> weight
  bool fallback_uniform = false;          // no skill passed the threshold
};

struct RoutingDecision {
  std::string mode;
  ActiveSkillSet active_skills;
  std::map<std::string, double> utilities;  // agent id -> U(A)
  std::string chosen;
  std::optional<std::string> tie_break;
  std::vector<std::string> notes;
  std::uint64_t handbook_version = 0;
};

struct RouterConfig {
  double lambda_c = 0.5;
  std::map<std::string, double> lambda_c_by_mode;  // overrides per mode
  int retrieval_k = 3;
  double retrieval_threshold = 0.05;
  int max_turns = 4;
  std::string terminal_mode = "answer";
  ModePolicy* mode_policy = nullptr;  // non-owning; required by route_step
  bool continue_after_failed_step = true;
  std::uint64_t episode_seed = 0;

  double lambda_for(const std::string& mode) const {
    auto it = lambda_c_by_mode.find(mode);
    return it == lambda_c_by_mode.end() ? lambda_c : it->second;
  }
};

// What one executed step reports back to the router.
struct StepResult {
  std::string trace_digest;
  std::string observation_digest;
  std::optional<bool> success;
  double cost = 0.0;
  bool failed = false;  // infrastructure failure (timeout, transport, bad payload)
  std::string failure_kind;
};

// Where steps actually run: the simulator in tests and experiments, the
// HTTP gateway in deployments.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual void begin_episode(const std::string& /*query*/, std::uint64_t /*episode_seed*/) {}
  virtual StepResult execute(const InteractionState& state, const std::string& mode,
                             const std::string& agent) = 0;
  virtual double judge_reward(const std::string& query, const Trajectory& t) = 0;
};

inline std::string select_mode(const InteractionState& state, const Handbook& handbook,
                               ModePolicy& policy, const ModePolicyContext& ctx) {
  std::string mode = policy.select(state, handbook, ctx);
  if (!find_mode(handbook, mode)) throw UnknownModeError(mode);
  return mode;
}

// The text retrieval matches against: the query plus everything observed so
// far, so weights can shift as the episode progresses.
inline std::string retrieval_context(const InteractionState& state) {
  std::string ctx = state.query;
  for (const auto& entry : state.history) {
    ctx += " ";
    ctx += entry.observation_digest;
  }
  return ctx;
}

// Top-k skills of the mode by cosine similarity between the retrieval
// context and the skill text (description + indicators), keeping scores
// strictly above `threshold` and normalizing to sum one. When nothing
// passes, falls back to uniform weights over all of the mode's skills.
inline ActiveSkillSet retrieve_active_skills(const InteractionState& state,
                                             const std::string& mode,
                                             const Handbook& handbook, int k,
                                             double threshold) {
  if (k < 0) throw ConfigError("retrieval k must be non-negative");
  std::vector<Skill> skills = mode_skills(handbook, mode);
  ActiveSkillSet out;
  if (skills.empty()) return out;

  const TokenCounts context = token_counts(retrieval_context(state));
  std::vector<std::pair<double, const Skill*>> scored;
  for (const auto& s : skills) {
    std::vector<std::string> texts = s.indicators;
    texts.push_back(s.description);
    double score = cosine(context, token_counts(texts));
    if (score > threshold) scored.push_back({score, &s});
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->id < b.second->id;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(k);

  if (scored.empty()) {
    out.fallback_uniform = true;
    const double w = 1.0 / static_cast<double>(skills.size());
    for (const auto& s : skills) out.entries[s.id] = w;
    return out;
  }
  double total = 0.0;
  for (const auto& [score, s] : scored) total += score;
  for (const auto& [score, s] : scored) out.entries[s->id] = score / total;
  return out;
}

// U(A) for every allowed agent of the mode. Agents without a stored profile
// score from the prior (posterior mean 0.5 per skill, zero observed cost).
inline std::map<std::string, double> score_agents(const ActiveSkillSet& active,
                                                  const std::string& mode,
                                                  const Handbook& handbook,
                                                  double lambda_c) {
  const ModeMetadata* meta = find_mode(handbook, mode);
  if (!meta) throw UnknownModeError(mode);
  std::map<std::string, double> utilities;
  static const AgentProfile kPriorProfile{};
  for (const auto& agent : meta->allowed_agents) {
    const AgentProfile* profile = find_profile(handbook, agent, mode);
    if (!profile) profile = &kPriorProfile;
    double u = 0.0;
    for (const auto& [sid, w] : active.entries) u += w * posterior_mean(*profile, sid);
    u -= lambda_c * profile->cost_stats.mean;
    utilities[agent] = u;
  }
  return utilities;
}

// Mean observed step cost used for tie-breaking; prior profiles cost zero.
inline double agent_mean_cost(const Handbook& handbook, const std::string& agent,
                              const std::string& mode) {
  const AgentProfile* p = find_profile(handbook, agent, mode);
  return p ? p->cost_stats.mean : 0.0;
}

inline RoutingDecision route_step(const InteractionState& state, const Handbook& handbook,
                                  const RouterConfig& cfg) {
  if (!cfg.mode_policy) throw ConfigError("route_step requires a mode policy");
  RoutingDecision d;
  d.handbook_version = handbook.version;
  ModePolicyContext pctx{cfg.max_turns, cfg.episode_seed};
  d.mode = select_mode(state, handbook, *cfg.mode_policy, pctx);
  d.active_skills =
      retrieve_active_skills(state, d.mode, handbook, cfg.retrieval_k, cfg.retrieval_threshold);
  if (d.active_skills.fallback_uniform) d.notes.push_back("retrieval_fallback_uniform");
  d.utilities = score_agents(d.active_skills, d.mode, handbook, cfg.lambda_for(d.mode));
  if (d.utilities.empty()) throw DataError("mode " + d.mode + " has no allowed agents");

  // Argmax with deterministic tie-breaking: utility desc, then mean cost
  // asc, then agent id asc. Map order makes the id rule implicit.
  const std::string* best = nullptr;
  double best_u = 0.0, best_cost = 0.0;
  int at_max = 0;
  for (const auto& [agent, u] : d.utilities) {
    double cost = agent_mean_cost(handbook, agent, d.mode);
    if (!best || u > best_u) {
      best = &agent;
      best_u = u;
      best_cost = cost;
      at_max = 1;
    } else if (u == best_u) {
      ++at_max;
      if (cost < best_cost) {
        best = &agent;
        best_cost = cost;
      }
    }
  }
  d.chosen = *best;
  if (at_max > 1)
    d.tie_break = "utility tie among " + std::to_string(at_max) +
                  " agents; chose lower mean cost, then lexicographic id";
  return d;
}

// Optional per-step agent override used for exploration and baselines; it
// must name an allowed agent. Overridden steps keep the audited utilities
// and are flagged in `notes`.
using AgentOverride =
    std::function<std::optional<std::string>(const InteractionState&, const std::string&)>;

inline Trajectory run_episode(const std::string& query, const Handbook& handbook,
                              Environment& env, const RouterConfig& cfg,
                              const std::string& trajectory_id,
                              const AgentOverride& override = nullptr) {
  Trajectory t;
  t.id = trajectory_id;
  t.query = query;
  InteractionState state{query, {}, 0};
  env.begin_episode(query, cfg.episode_seed);
  while (state.turn < cfg.max_turns) {
    RoutingDecision d = route_step(state, handbook, cfg);
    if (override) {
      if (auto forced = override(state, d.mode)) {
        if (!d.utilities.count(*forced)) throw UnknownAgentError(*forced);
        if (*forced != d.chosen) d.notes.push_back("agent_override");
        d.chosen = *forced;
      }
    }
    StepResult r = env.execute(state, d.mode, d.chosen);

    StepRecord rec;
    rec.turn = state.turn;
    rec.mode = d.mode;
    rec.agent = d.chosen;
    rec.active_skills = d.active_skills.entries;
    rec.utilities = d.utilities;
    rec.cost = r.cost;
    rec.trace_digest = r.trace_digest;
    rec.observation_digest = r.observation_digest;
    rec.success = r.success;
    rec.tie_break = d.tie_break;
    rec.notes = d.notes;
    if (r.failed) rec.notes.push_back("env_failure:" + r.failure_kind);
    rec.handbook_version = handbook.version;
    t.steps.push_back(rec);
    t.total_cost += r.cost;

    HistoryEntry entry{d.mode, d.chosen, r.trace_digest, r.observation_digest, r.success,
                       r.failed};
    state.history.push_back(entry);
    state.turn += 1;

    if (d.mode == cfg.terminal_mode) break;
    if (r.failed && !cfg.continue_after_failed_step) break;
  }
  t.reward = env.judge_reward(query, t);
  return t;
}

}  // namespace skillbook
