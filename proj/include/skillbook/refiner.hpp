#pragma once
// Phase-2 refinement: reshape the skill registry once evidence says its
// granularity is wrong.
//
//   split  — a skill whose queries fall into two clusters on which agents
//            perform very differently hides structure: carve it into two
//            child skills and repartition its evidence.
//   merge  — two skills no agent can statistically distinguish are one
//            skill twice: pool them and their evidence.
//
// Candidates are detected from data, pass through a reviewer (auto-approve
// by default, an external service via the gateway if configured), and are
// applied conservatively: observation counts are never invented or lost —
// merges add counters minus the duplicated prior, splits hand each child
// its partition's tallies plus a fresh prior.

#include <span>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "learner.hpp"

namespace skillbook {

struct SkillObservation {
  std::string query;
  std::string agent;
  bool success = false;
};

// Per-skill evidence extracted from trajectory logs.
class SkillOutcomeStore {
 public:
  static SkillOutcomeStore from_outcomes(std::span<const StepOutcome> outcomes) {
    SkillOutcomeStore store;
    for (const auto& so : outcomes)
      for (const auto& sid : so.outcome.skill_ids)
        store.by_skill_[sid].push_back(
            SkillObservation{so.query, so.outcome.agent_id, so.outcome.success});
    return store;
  }

  const std::vector<SkillObservation>* find(const std::string& skill_id) const {
    auto it = by_skill_.find(skill_id);
    return it == by_skill_.end() ? nullptr : &it->second;
  }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [sid, v] : by_skill_) n += v.size();
    return n;
  }

 private:
  std::map<std::string, std::vector<SkillObservation>> by_skill_;
};

struct RefinementCandidate {
  enum class Kind { split, merge };
  Kind kind = Kind::split;
  std::string mode;
  std::vector<std::string> targets;  // one skill for split, two for merge
  double statistic = 0.0;            // mean per-agent gap, or max |z|
  std::string note;

  // Split payload: the query partition, the distinctive tokens per group
  // (these become the children's indicators), and per-agent group tallies
  // (successes_a, failures_a, successes_b, failures_b).
  std::vector<std::string> group_a_queries, group_b_queries;
  std::vector<std::string> tokens_a, tokens_b;
  std::string suffix_a, suffix_b;
  std::map<std::string, std::array<double, 4>> split_tallies;
};

struct SplitConfig {
  int min_queries = 6;          // distinct queries before a split is considered
  double gap_threshold = 0.3;   // mean per-agent success-rate gap to trigger
  int max_child_indicators = 8;
};

struct MergeConfig {
  double alpha = 0.05;   // two-sided significance level
  double min_obs = 10;   // per-agent observations per skill to enter the test
};

namespace refine_detail {

// Picks the pair of queries with minimal cosine similarity as cluster
// seeds, then assigns every query to the nearer seed. Queries are scanned
// in sorted order, so the partition is deterministic.
inline std::pair<std::vector<std::string>, std::vector<std::string>> partition_queries(
    const std::vector<std::string>& queries) {
  std::vector<std::string> sorted = queries;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<TokenCounts> counts;
  counts.reserve(sorted.size());
  for (const auto& q : sorted) counts.push_back(token_counts(q));

  std::size_t seed_a = 0, seed_b = 1;
  double min_sim = 2.0;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      double sim = cosine(counts[i], counts[j]);
      if (sim < min_sim) {
        min_sim = sim;
        seed_a = i;
        seed_b = j;
      }
    }

  std::vector<std::string> group_a, group_b;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    double sa = cosine(counts[i], counts[seed_a]);
    double sb = cosine(counts[i], counts[seed_b]);
    (sa >= sb ? group_a : group_b).push_back(sorted[i]);
  }
  return {group_a, group_b};
}

// Tokens that most characterize `own` relative to `other`: ranked by count
// difference, ties lexicographic.
inline std::vector<std::string> distinctive_tokens(const std::vector<std::string>& own,
                                                   const std::vector<std::string>& other,
                                                   int cap) {
  std::map<std::string, double> score;
  for (const auto& q : own)
    for (const auto& tok : tokenize(q)) score[tok] += 1.0;
  for (const auto& q : other)
    for (const auto& tok : tokenize(q)) score[tok] -= 1.0;
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [tok, s] : score)
    if (s > 0.0) ranked.push_back({s, tok});
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (const auto& [s, tok] : ranked) {
    out.push_back(tok);
    if (static_cast<int>(out.size()) >= cap) break;
  }
  return out;
}

}  // namespace refine_detail

// Two-sided two-proportion z-test p-value via the complementary error
// function: p = erfc(|z| / sqrt(2)).
inline double two_proportion_p_value(double s1, double n1, double s2, double n2) {
  if (n1 <= 0.0 || n2 <= 0.0) return 1.0;
  const double pooled = (s1 + s2) / (n1 + n2);
  const double denom = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  if (denom == 0.0) return 1.0;
  const double z = (s1 / n1 - s2 / n2) / denom;
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

inline double two_proportion_z(double s1, double n1, double s2, double n2) {
  if (n1 <= 0.0 || n2 <= 0.0) return 0.0;
  const double pooled = (s1 + s2) / (n1 + n2);
  const double denom = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  return denom == 0.0 ? 0.0 : (s1 / n1 - s2 / n2) / denom;
}

// Scans top-level leaf skills for high cross-query variance: cluster the
// skill's queries into two groups, and flag the skill when the mean
// per-agent absolute success-rate gap between groups exceeds the
// threshold. Only agents observed in both groups enter the mean.
inline std::vector<RefinementCandidate> find_split_candidates(
    const Handbook& handbook, const SkillOutcomeStore& store, const SplitConfig& cfg = {}) {
  std::vector<RefinementCandidate> out;
  for (const auto& skill : handbook.skills) {
    if (skill.parent || has_children(handbook, skill.id)) continue;
    const auto* obs = store.find(skill.id);
    if (!obs) continue;

    std::set<std::string> distinct;
    for (const auto& o : *obs) distinct.insert(o.query);
    if (static_cast<int>(distinct.size()) < cfg.min_queries) continue;

    auto [group_a, group_b] =
        refine_detail::partition_queries({distinct.begin(), distinct.end()});
    if (group_a.empty() || group_b.empty()) continue;
    std::set<std::string> in_a(group_a.begin(), group_a.end());

    // agent -> (successes_a, failures_a, successes_b, failures_b)
    std::map<std::string, std::array<double, 4>> tallies;
    for (const auto& o : *obs) {
      auto& t = tallies[o.agent];
      const int base = in_a.count(o.query) ? 0 : 2;
      t[base + (o.success ? 0 : 1)] += 1.0;
    }
    double gap_sum = 0.0;
    int eligible = 0;
    for (const auto& [agent, t] : tallies) {
      const double na = t[0] + t[1], nb = t[2] + t[3];
      if (na == 0.0 || nb == 0.0) continue;
      gap_sum += std::abs(t[0] / na - t[2] / nb);
      ++eligible;
    }
    if (eligible == 0) continue;
    const double mean_gap = gap_sum / eligible;
    if (mean_gap <= cfg.gap_threshold) continue;

    RefinementCandidate c;
    c.kind = RefinementCandidate::Kind::split;
    c.mode = skill.mode;
    c.targets = {skill.id};
    c.statistic = mean_gap;
    c.group_a_queries = group_a;
    c.group_b_queries = group_b;
    c.tokens_a =
        refine_detail::distinctive_tokens(group_a, group_b, cfg.max_child_indicators);
    c.tokens_b =
        refine_detail::distinctive_tokens(group_b, group_a, cfg.max_child_indicators);
    c.suffix_a = c.tokens_a.empty() ? "a" : c.tokens_a.front();
    c.suffix_b = c.tokens_b.empty() ? "b" : c.tokens_b.front();
    if (c.suffix_a == c.suffix_b) {
      c.suffix_a += "a";
      c.suffix_b += "b";
    }
    c.split_tallies = std::move(tallies);
    c.note = "mean per-agent gap " + std::to_string(mean_gap) + " across " +
             std::to_string(eligible) + " agents";
    out.push_back(std::move(c));
  }
  return out;
}

// Scans same-mode leaf pairs with the same parent slot for statistical
// indistinguishability: a pair merges when no agent with enough evidence
// on both skills rejects equality of success rates at level alpha. At
// least one agent must clear the evidence bar.
inline std::vector<RefinementCandidate> find_merge_candidates(const Handbook& handbook,
                                                              const MergeConfig& cfg = {}) {
  std::vector<RefinementCandidate> out;
  std::vector<const Skill*> leaves;
  for (const auto& s : handbook.skills)
    if (!has_children(handbook, s.id)) leaves.push_back(&s);
  std::sort(leaves.begin(), leaves.end(),
            [](const Skill* a, const Skill* b) { return a->id < b->id; });

  for (std::size_t i = 0; i < leaves.size(); ++i) {
    for (std::size_t j = i + 1; j < leaves.size(); ++j) {
      const Skill& a = *leaves[i];
      const Skill& b = *leaves[j];
      if (a.mode != b.mode || a.parent != b.parent) continue;

      int tested = 0;
      bool distinguishable = false;
      double max_abs_z = 0.0;
      for (const auto& profile : handbook.profiles) {
        if (profile.mode != a.mode) continue;
        auto ca = profile.counters.find(a.id);
        auto cb = profile.counters.find(b.id);
        if (ca == profile.counters.end() || cb == profile.counters.end()) continue;
        const double n1 = ca->second.alpha + ca->second.beta - kPriorAlpha - kPriorBeta;
        const double n2 = cb->second.alpha + cb->second.beta - kPriorAlpha - kPriorBeta;
        if (n1 < cfg.min_obs || n2 < cfg.min_obs) continue;
        const double s1 = ca->second.alpha - kPriorAlpha;
        const double s2 = cb->second.alpha - kPriorAlpha;
        ++tested;
        const double z = two_proportion_z(s1, n1, s2, n2);
        max_abs_z = std::max(max_abs_z, std::abs(z));
        if (two_proportion_p_value(s1, n1, s2, n2) < cfg.alpha) distinguishable = true;
      }
      if (tested == 0 || distinguishable) continue;

      RefinementCandidate c;
      c.kind = RefinementCandidate::Kind::merge;
      c.mode = a.mode;
      c.targets = {a.id, b.id};
      c.statistic = max_abs_z;
      c.note = "indistinguishable for " + std::to_string(tested) +
               " agents (max |z| = " + std::to_string(max_abs_z) + ")";
      out.push_back(std::move(c));
    }
  }
  return out;
}

struct ReviewDecision {
  bool approve = true;
  std::string note;
  std::optional<std::string> merged_id;                          // merge override
  std::optional<std::pair<std::string, std::string>> child_ids;  // split override
};

class RefinementReviewer {
 public:
  virtual ~RefinementReviewer() = default;
  virtual ReviewDecision review(const RefinementCandidate& candidate,
                                const Handbook& handbook) = 0;
  virtual std::string name() const = 0;
};

class AutoApproveReviewer : public RefinementReviewer {
 public:
  ReviewDecision review(const RefinementCandidate&, const Handbook&) override {
    return ReviewDecision{};
  }
  std::string name() const override { return "auto"; }
};

struct RefinementResult {
  Handbook handbook;
  std::vector<std::string> applied;
  std::vector<std::string> rejected;  // with diagnostics
};

namespace refine_detail {

inline std::string describe(const RefinementCandidate& c) {
  std::string s = c.kind == RefinementCandidate::Kind::split ? "split(" : "merge(";
  for (std::size_t i = 0; i < c.targets.size(); ++i) s += (i ? ", " : "") + c.targets[i];
  return s + ")";
}

}  // namespace refine_detail

// Applies reviewed candidates in order. Candidates touching a skill already
// rewritten in this pass are rejected with a diagnostic instead of applied
// to stale state. One version bump per call.
inline RefinementResult apply_refinements(const Handbook& handbook,
                                          std::span<const RefinementCandidate> candidates,
                                          RefinementReviewer& reviewer) {
  RefinementResult result;
  Handbook next = handbook;
  std::set<std::string> touched;

  for (const auto& c : candidates) {
    const std::string desc = refine_detail::describe(c);
    bool conflict = false;
    for (const auto& t : c.targets) conflict |= touched.count(t) > 0;
    if (conflict) {
      result.rejected.push_back(desc + ": conflicts with an earlier refinement");
      continue;
    }
    ReviewDecision decision = reviewer.review(c, next);
    if (!decision.approve) {
      result.rejected.push_back(desc + ": rejected by reviewer " + reviewer.name() +
                                (decision.note.empty() ? "" : " (" + decision.note + ")"));
      continue;
    }

    if (c.kind == RefinementCandidate::Kind::merge) {
      if (c.targets.size() != 2) {
        result.rejected.push_back(desc + ": merge needs exactly two targets");
        continue;
      }
      const Skill* a = find_skill(next, c.targets[0]);
      const Skill* b = find_skill(next, c.targets[1]);
      if (!a || !b) {
        result.rejected.push_back(desc + ": target skill missing");
        continue;
      }
      const std::string merged_id =
          decision.merged_id.value_or(std::min(a->id, b->id));
      if (merged_id != a->id && merged_id != b->id && find_skill(next, merged_id)) {
        result.rejected.push_back(desc + ": merged id collides: " + merged_id);
        continue;
      }
      Skill merged;
      merged.id = merged_id;
      merged.mode = a->mode;
      merged.description = a->description;
      std::set<std::string> ind(a->indicators.begin(), a->indicators.end());
      ind.insert(b->indicators.begin(), b->indicators.end());
      merged.indicators.assign(ind.begin(), ind.end());
      merged.parent = a->parent == b->parent ? a->parent : std::nullopt;

      const std::string id_a = a->id, id_b = b->id;
      // Replace a's slot, drop b's; rewire the mode's edge list.
      for (auto& s : next.skills)
        if (s.id == id_a) s = merged;
      std::erase_if(next.skills, [&](const Skill& s) { return s.id == id_b; });
      auto& edge = next.edges[merged.mode];
      std::erase_if(edge, [&](const std::string& sid) { return sid == id_a || sid == id_b; });
      edge.push_back(merged.id);

      // Pool evidence: counts add, the doubly-counted prior comes off once.
      for (auto& profile : next.profiles) {
        if (profile.mode != merged.mode) continue;
        auto ca = profile.counters.find(id_a);
        auto cb = profile.counters.find(id_b);
        if (ca == profile.counters.end() && cb == profile.counters.end()) continue;
        const BetaCounter va = ca == profile.counters.end() ? BetaCounter{} : ca->second;
        const BetaCounter vb = cb == profile.counters.end() ? BetaCounter{} : cb->second;
        BetaCounter pooled{va.alpha + vb.alpha - kPriorAlpha, va.beta + vb.beta - kPriorBeta};
        profile.counters.erase(id_a);
        profile.counters.erase(id_b);
        profile.counters[merged.id] = pooled;
      }
      touched.insert({id_a, id_b, merged.id});
      result.applied.push_back(desc + " -> " + merged.id);
    } else {
      const Skill* parent = c.targets.empty() ? nullptr : find_skill(next, c.targets[0]);
      if (!parent) {
        result.rejected.push_back(desc + ": target skill missing");
        continue;
      }
      std::string id_a = parent->id + "/" + c.suffix_a;
      std::string id_b = parent->id + "/" + c.suffix_b;
      if (decision.child_ids) {
        id_a = decision.child_ids->first;
        id_b = decision.child_ids->second;
      }
      if (find_skill(next, id_a) || find_skill(next, id_b) || id_a == id_b) {
        result.rejected.push_back(desc + ": child ids collide: " + id_a + ", " + id_b);
        continue;
      }
      const std::string parent_id = parent->id;
      auto make_child = [&](const std::string& id, const std::string& suffix,
                            const std::vector<std::string>& tokens) {
        Skill child;
        child.id = id;
        child.mode = parent->mode;
        child.parent = parent_id;
        child.description = parent->description + " (focus: " + suffix + ")";
        child.indicators = tokens.empty() ? parent->indicators : tokens;
        return child;
      };
      Skill child_a = make_child(id_a, c.suffix_a, c.tokens_a);
      Skill child_b = make_child(id_b, c.suffix_b, c.tokens_b);
      next.skills.push_back(child_a);
      next.skills.push_back(child_b);
      next.edges[child_a.mode].push_back(id_a);
      next.edges[child_b.mode].push_back(id_b);

      // The children absorb the partitioned evidence plus a fresh prior;
      // the parent's counter is retired so no observation is counted twice.
      for (auto& profile : next.profiles) {
        if (profile.mode != child_a.mode) continue;
        auto it = c.split_tallies.find(profile.agent_id);
        profile.counters.erase(parent_id);
        if (it == c.split_tallies.end()) continue;
        const auto& t = it->second;
        if (t[0] + t[1] > 0.0)
          profile.counters[id_a] = BetaCounter{kPriorAlpha + t[0], kPriorBeta + t[1]};
        if (t[2] + t[3] > 0.0)
          profile.counters[id_b] = BetaCounter{kPriorAlpha + t[2], kPriorBeta + t[3]};
      }
      touched.insert({parent_id, id_a, id_b});
      result.applied.push_back(desc + " -> " + id_a + ", " + id_b);
    }
  }

  next.version += 1;
  require_valid(next, "apply_refinements");
  result.handbook = std::move(next);
  return result;
}

}  // namespace skillbook
