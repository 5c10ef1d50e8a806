#pragma once
// Phase-1 learning: turn raw trajectory bundles into handbook content.
//
//   mine_diffs        contrastive (success, failure) step pairs per mode
//   propose_skills    cluster diffs and ask a proposer to name each skill
//   apply_proposals   insert accepted skills into the handbook
//   extract_outcomes  label steps and attribute them to active skills
//   build_profiles    fold outcomes into Beta counters and cost means
//   distill_insights  mine mode-transition patterns from successful runs
//
// Proposers are pluggable: a deterministic token-difference baseline, a
// ground-truth oracle for simulator experiments, or an external service
// behind the gateway. Proposer failures never abort a run; they are
// recorded and the cluster is skipped.

#include <span>
#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "router.hpp"
#include "simulator.hpp"

namespace skillbook {

// A positive and a negative trajectory for the same query disagreeing at
// the first divergent step of one mode.
struct ContrastiveDiff {
  std::string id;
  std::string query;
  std::string mode;
  std::string pos_trajectory, neg_trajectory;
  std::string agent_pos, agent_neg;
  std::string trace_pos, trace_neg;
  std::string obs_pos, obs_neg;
  double reward_pos = 0.0, reward_neg = 0.0;
};

struct LearnConfig {
  double success_threshold = 0.5;  // reward at or above counts as success
  double cluster_jaccard = 0.5;    // diff joins a cluster at this overlap
  double dedup_jaccard = 0.6;      // proposal dropped at this overlap
  int max_indicators = 8;
  enum class Labels { trajectory, step } labels = Labels::trajectory;
  int retrieval_k = 3;
  double retrieval_threshold = 0.05;
};

// All (positive, negative) pairs within each bundle; for each pair, one
// diff per mode at the first step where the two runs diverge (different
// agent, different success flag, or different trace).
inline std::vector<ContrastiveDiff> mine_diffs(std::span<const TrajectoryBundle> bundles,
                                               double success_threshold = 0.5) {
  std::vector<ContrastiveDiff> out;
  for (const auto& bundle : bundles) {
    std::vector<const Trajectory*> pos, neg;
    for (const auto& t : bundle.trajectories)
      (t.reward >= success_threshold ? pos : neg).push_back(&t);
    for (const Trajectory* p : pos) {
      for (const Trajectory* n : neg) {
        std::set<std::string> modes;
        for (const auto& s : p->steps) modes.insert(s.mode);
        for (const auto& mode : modes) {
          std::vector<const StepRecord*> ps, ns;
          for (const auto& s : p->steps)
            if (s.mode == mode) ps.push_back(&s);
          for (const auto& s : n->steps)
            if (s.mode == mode) ns.push_back(&s);
          const std::size_t shared = std::min(ps.size(), ns.size());
          for (std::size_t i = 0; i < shared; ++i) {
            const StepRecord& a = *ps[i];
            const StepRecord& b = *ns[i];
            if (a.agent == b.agent && a.success == b.success &&
                a.trace_digest == b.trace_digest)
              continue;
            ContrastiveDiff d;
            d.id = p->id + "|" + n->id + "|" + mode;
            d.query = bundle.query;
            d.mode = mode;
            d.pos_trajectory = p->id;
            d.neg_trajectory = n->id;
            d.agent_pos = a.agent;
            d.agent_neg = b.agent;
            d.trace_pos = a.trace_digest;
            d.trace_neg = b.trace_digest;
            d.obs_pos = a.observation_digest;
            d.obs_neg = b.observation_digest;
            d.reward_pos = p->reward;
            d.reward_neg = n->reward;
            out.push_back(std::move(d));
            break;  // first divergent step only
          }
        }
      }
    }
  }
  return out;
}

// Tokens that describe *what the successful step did* and nothing else:
// positive-trace tokens minus negative-trace tokens, minus structural
// noise (digest markers, agent ids, mode names).
inline std::set<std::string> diff_tokens(const ContrastiveDiff& d, const Handbook& handbook) {
  std::set<std::string> stop = {"trace", "obs", "ok", "err", "fail"};
  for (const auto& tok : tokenize(d.agent_pos)) stop.insert(tok);
  for (const auto& tok : tokenize(d.agent_neg)) stop.insert(tok);
  for (const auto& m : handbook.modes)
    for (const auto& tok : tokenize(m.mode)) stop.insert(tok);

  std::set<std::string> pos = token_set(d.trace_pos);
  std::set<std::string> neg = token_set(d.trace_neg);
  std::set<std::string> out;
  for (const auto& tok : pos)
    if (!neg.count(tok) && !stop.count(tok)) out.insert(tok);
  return out;
}

struct DiffCluster {
  std::string mode;
  std::set<std::string> leader_tokens;  // matching representative
  std::set<std::string> tokens;         // union over members
  std::vector<ContrastiveDiff> diffs;
};

// Greedy leader clustering in input order: a diff joins the first cluster
// of its mode whose representative it overlaps at `cluster_jaccard`.
inline std::vector<DiffCluster> cluster_diffs(std::span<const ContrastiveDiff> diffs,
                                              const Handbook& handbook,
                                              const LearnConfig& cfg = {}) {
  std::vector<DiffCluster> clusters;
  for (const auto& d : diffs) {
    std::set<std::string> toks = diff_tokens(d, handbook);
    if (toks.empty()) continue;  // nothing to learn from this pair
    DiffCluster* home = nullptr;
    for (auto& c : clusters) {
      if (c.mode != d.mode) continue;
      if (jaccard(toks, c.leader_tokens) >= cfg.cluster_jaccard) {
        home = &c;
        break;
      }
    }
    if (!home) {
      clusters.push_back(DiffCluster{d.mode, toks, {}, {}});
      home = &clusters.back();
    }
    home->tokens.insert(toks.begin(), toks.end());
    home->diffs.push_back(d);
  }
  return clusters;
}

class SkillProposer {
 public:
  virtual ~SkillProposer() = default;
  // Returns the proposed skill, or nothing when the cluster is unusable.
  virtual std::optional<Skill> propose(const DiffCluster& cluster) = 0;
  virtual std::string name() const = 0;
};

// Deterministic fallback proposer: the cluster's token evidence becomes the
// indicator list, capped and sorted; the id is derived from the first
// indicator.
class BaselineProposer : public SkillProposer {
 public:
  explicit BaselineProposer(int max_indicators = 8) : max_indicators_(max_indicators) {}

  std::optional<Skill> propose(const DiffCluster& cluster) override {
    if (cluster.tokens.empty()) return std::nullopt;
    Skill s;
    s.mode = cluster.mode;
    s.indicators.assign(cluster.tokens.begin(), cluster.tokens.end());
    if (static_cast<int>(s.indicators.size()) > max_indicators_)
      s.indicators.resize(max_indicators_);
    s.id = "auto-" + cluster.mode + "-" + s.indicators.front();
    // The mode stays out of the description: queries mention mode names in
    // their scaffolding, and a mode token here would give every same-mode
    // skill a nonzero retrieval score, diluting the active set.
    s.description = "mined capability signalled by";
    for (const auto& tok : s.indicators) s.description += " " + tok;
    return s;
  }

  std::string name() const override { return "baseline"; }

 private:
  int max_indicators_;
};

// Ground-truth proposer for simulator experiments: maps the cluster's
// tokens back to the latent skill they vote for.
class OracleProposer : public SkillProposer {
 public:
  explicit OracleProposer(const sim::LatentWorld& world) : world_(world) {}

  std::optional<Skill> propose(const DiffCluster& cluster) override {
    const auto index = world_.token_index();
    std::map<std::string, int> votes;  // latent skill id -> token hits
    for (const auto& tok : cluster.tokens) {
      auto it = index.find(tok);
      if (it != index.end() && it->second->mode == cluster.mode) ++votes[it->second->id];
    }
    if (votes.empty()) return std::nullopt;
    const std::string* best = nullptr;
    int best_votes = 0;
    for (const auto& [sid, n] : votes)
      if (!best || n > best_votes) {
        best = &sid;
        best_votes = n;
      }
    const sim::LatentSkill* latent = world_.find_skill(*best);
    return Skill{latent->id, latent->description, latent->indicators, latent->mode,
                 std::nullopt};
  }

  std::string name() const override { return "oracle"; }

 private:
  const sim::LatentWorld& world_;
};

struct ProposalResult {
  std::vector<Skill> proposals;
  std::vector<std::string> errors;  // per-cluster proposer failures
};

// Clusters diffs, asks the proposer, validates, and dedups — against the
// handbook and against earlier accepted proposals — at `dedup_jaccard`
// indicator overlap (same mode only) or on id collision.
inline ProposalResult propose_skills(const Handbook& handbook,
                                     std::span<const ContrastiveDiff> diffs,
                                     SkillProposer& proposer, const LearnConfig& cfg = {}) {
  ProposalResult result;
  std::vector<DiffCluster> clusters = cluster_diffs(diffs, handbook, cfg);
  std::vector<std::pair<std::string, std::set<std::string>>> accepted;  // (mode, tokens)
  for (const auto& skill : handbook.skills)
    accepted.push_back({skill.mode, token_set(skill.indicators)});

  for (const auto& cluster : clusters) {
    const std::string label =
        cluster.mode + "/" + (cluster.leader_tokens.empty() ? "?" : *cluster.leader_tokens.begin());
    std::optional<Skill> skill;
    try {
      skill = proposer.propose(cluster);
    } catch (const std::exception& e) {
      result.errors.push_back("cluster " + label + ": proposer " + proposer.name() +
                              " failed: " + e.what());
      continue;
    }
    if (!skill) continue;
    if (skill->id.empty() || skill->indicators.empty()) {
      result.errors.push_back("cluster " + label + ": proposal missing id or indicators");
      continue;
    }
    if (!find_mode(handbook, skill->mode)) {
      result.errors.push_back("cluster " + label + ": proposal for unknown mode " +
                              skill->mode);
      continue;
    }
    if (skill->parent) {
      const Skill* parent = find_skill(handbook, *skill->parent);
      if (!parent || parent->mode != skill->mode || parent->parent) {
        result.errors.push_back("cluster " + label + ": invalid parent " + *skill->parent);
        continue;
      }
    }

    bool duplicate = find_skill(handbook, skill->id) != nullptr;
    for (const auto& p : result.proposals) duplicate |= (p.id == skill->id);
    const std::set<std::string> toks = token_set(skill->indicators);
    for (const auto& [mode, existing] : accepted)
      if (mode == skill->mode && jaccard(toks, existing) >= cfg.dedup_jaccard)
        duplicate = true;
    if (duplicate) continue;

    accepted.push_back({skill->mode, toks});
    result.proposals.push_back(std::move(*skill));
  }
  return result;
}

// Inserts proposals into the handbook and wires their edges. Counters are
// not seeded: an absent counter already reads as the Beta(1, 1) prior.
inline Handbook apply_proposals(const Handbook& handbook, std::span<const Skill> proposals) {
  Handbook next = handbook;
  for (const auto& skill : proposals) {
    if (find_skill(next, skill.id))
      throw DataError("apply_proposals: skill id collision: " + skill.id);
    if (!find_mode(next, skill.mode))
      throw DataError("apply_proposals: unknown mode: " + skill.mode);
    next.edges[skill.mode].push_back(skill.id);
    next.skills.push_back(skill);
  }
  next.version += 1;
  require_valid(next, "apply_proposals");
  return next;
}

// One labelled, skill-attributed step pulled out of a trajectory.
struct StepOutcome {
  std::string query;
  std::string trajectory_id;
  int turn = 0;
  Outcome outcome;
};

// Labels every step and attributes it to skills. Attribution prefers the
// skills recorded at routing time; when those don't exist in this handbook
// (e.g. the log predates the skills), retrieval is replayed against the
// current registry. Labels come from the trajectory reward by default, or
// from the per-step success flag when configured (absent flags fall back
// to the trajectory label).
inline std::vector<StepOutcome> extract_outcomes(const Handbook& handbook,
                                                 std::span<const TrajectoryBundle> bundles,
                                                 const LearnConfig& cfg = {}) {
  std::vector<StepOutcome> out;
  for (const auto& bundle : bundles) {
    for (const auto& t : bundle.trajectories) {
      const bool traj_success = t.reward >= cfg.success_threshold;
      InteractionState state{t.query, {}, 0};
      for (const auto& step : t.steps) {
        std::vector<std::string> skills;
        for (const auto& [sid, w] : step.active_skills) {
          const Skill* s = find_skill(handbook, sid);
          if (s && s->mode == step.mode) skills.push_back(sid);
        }
        if (skills.empty() && find_mode(handbook, step.mode)) {
          ActiveSkillSet replayed = retrieve_active_skills(
              state, step.mode, handbook, cfg.retrieval_k, cfg.retrieval_threshold);
          for (const auto& [sid, w] : replayed.entries) skills.push_back(sid);
        }
        StepOutcome so;
        so.query = t.query;
        so.trajectory_id = t.id;
        so.turn = step.turn;
        so.outcome.agent_id = step.agent;
        so.outcome.mode = step.mode;
        so.outcome.skill_ids = std::move(skills);
        so.outcome.success = cfg.labels == LearnConfig::Labels::step
                                 ? step.success.value_or(traj_success)
                                 : traj_success;
        so.outcome.cost = step.cost;
        out.push_back(std::move(so));

        state.history.push_back(HistoryEntry{step.mode, step.agent, step.trace_digest,
                                             step.observation_digest, step.success,
                                             false});
        state.turn += 1;
      }
    }
  }
  return out;
}

// Folds a batch of outcomes into the handbook's profiles: Beta counters per
// attributed skill, cost running means per step. Profiles are created on
// first evidence for an unseen (agent, mode).
inline Handbook build_profiles(const Handbook& handbook,
                               std::span<const TrajectoryBundle> bundles,
                               const LearnConfig& cfg = {}) {
  std::vector<StepOutcome> outcomes = extract_outcomes(handbook, bundles, cfg);
  std::map<std::pair<std::string, std::string>, std::vector<const StepOutcome*>> grouped;
  for (const auto& so : outcomes)
    grouped[{so.outcome.agent_id, so.outcome.mode}].push_back(&so);

  Handbook next = handbook;
  next.version += 1;
  for (const auto& [key, group] : grouped) {
    const auto& [agent, mode] = key;
    if (!find_mode(next, mode))
      throw DataError("build_profiles: trajectory step in unknown mode: " + mode);
    AgentProfile* slot = nullptr;
    for (auto& p : next.profiles)
      if (p.agent_id == agent && p.mode == mode) slot = &p;
    if (!slot) {
      next.profiles.push_back(AgentProfile{agent, mode, "", {}, {}, {}});
      slot = &next.profiles.back();
    }
    std::vector<Outcome> batch;
    for (const StepOutcome* so : group) batch.push_back(so->outcome);
    AgentProfile updated = update_counters(*slot, batch, next);
    for (const Outcome& o : batch) updated = update_cost(updated, o.cost);
    *slot = std::move(updated);
  }
  require_valid(next, "build_profiles");
  return next;
}

struct InsightConfig {
  double success_threshold = 0.5;
  int min_support = 3;         // successful runs exhibiting the transition
  double min_frequency = 0.6;  // of successful runs that visit the source mode
};

// Mines mode-transition regularities from successful trajectories and
// appends them as human-readable insights on the source mode. Re-running
// on the same data is idempotent apart from the version bump: duplicate
// strings are not appended twice.
inline Handbook distill_insights(const Handbook& handbook,
                                 std::span<const TrajectoryBundle> bundles,
                                 const InsightConfig& cfg = {}) {
  std::map<std::string, int> visits;                       // mode -> successful runs
  std::map<std::pair<std::string, std::string>, int> fol;  // (a, b) -> runs with a->b
  for (const auto& bundle : bundles) {
    for (const auto& t : bundle.trajectories) {
      if (t.reward < cfg.success_threshold) continue;
      std::set<std::string> seen_modes;
      std::set<std::pair<std::string, std::string>> seen_pairs;
      for (std::size_t i = 0; i + 1 < t.steps.size(); ++i) {
        seen_pairs.insert({t.steps[i].mode, t.steps[i + 1].mode});
        seen_modes.insert(t.steps[i].mode);
      }
      for (const auto& m : seen_modes) visits[m] += 1;
      for (const auto& p : seen_pairs) fol[p] += 1;
    }
  }

  Handbook next = handbook;
  next.version += 1;
  for (auto& meta : next.modes) {
    auto vit = visits.find(meta.mode);
    if (vit == visits.end()) continue;
    for (const auto& [pair, support] : fol) {
      if (pair.first != meta.mode) continue;
      if (support < cfg.min_support) continue;
      const double freq = static_cast<double>(support) / static_cast<double>(vit->second);
      if (freq < cfg.min_frequency) continue;
      const int pct = static_cast<int>(freq * 100.0 + 0.5);
      std::string insight = "after " + pair.first + ", successful runs continue with " +
                            pair.second + " (" + std::to_string(pct) + "% of " +
                            std::to_string(vit->second) + ")";
      if (std::find(meta.insights.begin(), meta.insights.end(), insight) ==
          meta.insights.end())
        meta.insights.push_back(insight);
    }
  }
  require_valid(next, "distill_insights");
  return next;
}

}  // namespace skillbook
