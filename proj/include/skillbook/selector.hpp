#pragma once
// Handbook selection: refinement produces a space of plausible handbook
// variants — per-mode skill granularity (coarse parents, fine children, or
// both) crossed with insights on/off. Each variant is evaluated on a query
// set under paired episode seeds, reduced to (mean reward, mean cost),
// screened to the Pareto frontier, and the final handbook is the frontier
// point maximizing  J = mean_reward - lambda * mean_cost.

#include <span>
#include <map>
#include <string>
#include <vector>

#include "router.hpp"

namespace skillbook {

enum class Granularity { both, coarse, fine };

inline std::string to_string(Granularity g) {
  switch (g) {
    case Granularity::both: return "both";
    case Granularity::coarse: return "coarse";
    case Granularity::fine: return "fine";
  }
  return "?";
}

struct VariantDescriptor {
  // Only modes that actually have a parent/child hierarchy appear here;
  // other modes have no granularity choice.
  std::map<std::string, Granularity> granularity;
  bool insights_on = true;

  std::string label() const {
    std::string s;
    for (const auto& [mode, g] : granularity)
      s += (s.empty() ? "" : ",") + mode + "=" + to_string(g);
    if (s.empty()) s = "base";
    return s + "|insights=" + (insights_on ? "on" : "off");
  }

  bool operator==(const VariantDescriptor&) const = default;
};

struct HandbookVariant {
  VariantDescriptor descriptor;
  Handbook handbook;
};

// Coarse view of one mode: every child's observed evidence folds into its
// parent's counter exactly (priors are not double-counted), then the
// children disappear from the registry and edges.
inline Handbook fold_coarse(const Handbook& handbook, const std::string& mode) {
  Handbook next = handbook;
  std::map<std::string, std::string> parent_of;  // child id -> parent id
  for (const auto& s : next.skills)
    if (s.mode == mode && s.parent) parent_of[s.id] = *s.parent;
  if (parent_of.empty()) return next;

  for (auto& profile : next.profiles) {
    if (profile.mode != mode) continue;
    for (const auto& [child, parent] : parent_of) {
      auto it = profile.counters.find(child);
      if (it == profile.counters.end()) continue;
      BetaCounter& pc = profile.counters[parent];  // prior when absent
      pc.alpha += it->second.alpha - kPriorAlpha;
      pc.beta += it->second.beta - kPriorBeta;
      profile.counters.erase(child);
    }
  }
  std::erase_if(next.skills,
                [&](const Skill& s) { return parent_of.count(s.id) > 0; });
  std::erase_if(next.edges[mode],
                [&](const std::string& sid) { return parent_of.count(sid) > 0; });
  return next;
}

// Fine view of one mode: parents that have children drop out and the
// children stand alone. Evidence recorded at child level is untouched;
// residual parent-level counters (evidence that accrued on the coarse
// skill after a split) have no honest per-child partition and are
// discarded with the parent.
inline Handbook fold_fine(const Handbook& handbook, const std::string& mode) {
  Handbook next = handbook;
  std::set<std::string> parents;
  for (const auto& s : next.skills)
    if (s.mode == mode && s.parent) parents.insert(*s.parent);
  if (parents.empty()) return next;

  for (auto& s : next.skills)
    if (s.mode == mode && s.parent && parents.count(*s.parent)) s.parent.reset();
  std::erase_if(next.skills, [&](const Skill& s) {
    return s.mode == mode && parents.count(s.id) > 0;
  });
  std::erase_if(next.edges[mode],
                [&](const std::string& sid) { return parents.count(sid) > 0; });
  for (auto& profile : next.profiles) {
    if (profile.mode != mode) continue;
    for (const auto& parent : parents) profile.counters.erase(parent);
  }
  return next;
}

inline Handbook strip_insights(const Handbook& handbook) {
  Handbook next = handbook;
  for (auto& m : next.modes) m.insights.clear();
  return next;
}

// The full variant grid: per hierarchy mode {both, coarse, fine}, crossed
// with insights on/off. A handbook with no hierarchy yields two variants.
inline std::vector<HandbookVariant> enumerate_variants(const Handbook& handbook) {
  require_valid(handbook, "enumerate_variants");
  std::vector<std::string> hierarchy_modes;
  for (const auto& m : handbook.modes) {
    bool has = false;
    for (const auto& s : handbook.skills)
      if (s.mode == m.mode && s.parent) has = true;
    if (has) hierarchy_modes.push_back(m.mode);
  }

  const Granularity options[] = {Granularity::both, Granularity::coarse, Granularity::fine};
  std::vector<std::map<std::string, Granularity>> grids = {{}};
  for (const auto& mode : hierarchy_modes) {
    std::vector<std::map<std::string, Granularity>> expanded;
    for (const auto& grid : grids)
      for (Granularity g : options) {
        auto copy = grid;
        copy[mode] = g;
        expanded.push_back(std::move(copy));
      }
    grids = std::move(expanded);
  }

  std::vector<HandbookVariant> out;
  for (const auto& grid : grids) {
    for (bool insights_on : {true, false}) {
      Handbook h = handbook;
      for (const auto& [mode, g] : grid) {
        if (g == Granularity::coarse) h = fold_coarse(h, mode);
        if (g == Granularity::fine) h = fold_fine(h, mode);
      }
      if (!insights_on) h = strip_insights(h);
      out.push_back(HandbookVariant{VariantDescriptor{grid, insights_on}, std::move(h)});
    }
  }
  return out;
}

struct EvaluationPoint {
  VariantDescriptor descriptor;
  std::string label;
  double mean_reward = 0.0;
  double mean_cost = 0.0;
  double objective = 0.0;  // mean_reward - lambda * mean_cost
  int n_queries = 0;
  std::vector<std::string> notes;
};

// Runs every query once against the variant. Episode seeds derive from
// (seed, query text) only, so identical variants land on identical points
// and different variants are compared pairwise on the same draws.
inline EvaluationPoint evaluate_variant(const HandbookVariant& variant,
                                        std::span<const std::string> queries,
                                        Environment& env, const RouterConfig& router_cfg,
                                        double lambda, std::uint64_t seed) {
  EvaluationPoint point;
  point.descriptor = variant.descriptor;
  point.label = variant.descriptor.label();
  double reward_sum = 0.0, cost_sum = 0.0;
  int i = 0;
  for (const auto& query : queries) {
    RouterConfig cfg = router_cfg;
    cfg.episode_seed = derive_seed(seed, query);
    const std::string id = "sel" + std::to_string(i++);
    try {
      Trajectory t = run_episode(query, variant.handbook, env, cfg, id);
      reward_sum += t.reward;
      cost_sum += t.total_cost;
    } catch (const EnvironmentError& e) {
      // Count the episode as a zero-reward failure rather than aborting the
      // whole selection pass.
      point.notes.push_back(id + ": " + e.what());
    }
  }
  point.n_queries = static_cast<int>(queries.size());
  if (point.n_queries > 0) {
    point.mean_reward = reward_sum / point.n_queries;
    point.mean_cost = cost_sum / point.n_queries;
  }
  point.objective = point.mean_reward - lambda * point.mean_cost;
  return point;
}

inline bool dominates(const EvaluationPoint& a, const EvaluationPoint& b) {
  return a.mean_reward >= b.mean_reward && a.mean_cost <= b.mean_cost &&
         (a.mean_reward > b.mean_reward || a.mean_cost < b.mean_cost);
}

// Non-dominated points by (reward up, cost down), sorted by cost ascending.
// Sort-and-sweep; duplicates of a frontier point are all kept.
inline std::vector<EvaluationPoint> pareto_frontier(std::span<const EvaluationPoint> points) {
  std::vector<EvaluationPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.mean_cost != b.mean_cost) return a.mean_cost < b.mean_cost;
    if (a.mean_reward != b.mean_reward) return a.mean_reward > b.mean_reward;
    return a.label < b.label;
  });
  std::vector<EvaluationPoint> frontier;
  double best_reward = 0.0, best_cost = 0.0;
  bool any = false;
  for (const auto& p : sorted) {
    if (!any || p.mean_reward > best_reward ||
        (p.mean_reward == best_reward && p.mean_cost == best_cost)) {
      frontier.push_back(p);
      best_reward = p.mean_reward;
      best_cost = p.mean_cost;
      any = true;
    }
  }
  return frontier;
}

struct SelectionResult {
  HandbookVariant winner;
  std::string winner_label;
  std::vector<EvaluationPoint> points;    // enumeration order
  std::vector<EvaluationPoint> frontier;  // cost ascending
  double lambda = 0.0;
};

// Evaluates the whole grid and picks the frontier point with maximal
// objective (ties: lower cost, then label). The winning handbook gets one
// version bump over the input, like every other mutating stage.
inline SelectionResult select_handbook(const Handbook& handbook,
                                       std::span<const std::string> queries,
                                       Environment& env, const RouterConfig& router_cfg,
                                       double lambda, std::uint64_t seed) {
  if (queries.empty()) throw ConfigError("select_handbook needs at least one query");
  std::vector<HandbookVariant> variants = enumerate_variants(handbook);
  SelectionResult result;
  result.lambda = lambda;
  for (const auto& v : variants)
    result.points.push_back(evaluate_variant(v, queries, env, router_cfg, lambda, seed));
  result.frontier = pareto_frontier(result.points);

  const EvaluationPoint* best = nullptr;
  for (const auto& p : result.frontier)
    if (!best || p.objective > best->objective) best = &p;
  result.winner_label = best->label;
  for (auto& v : variants)
    if (v.descriptor == best->descriptor) {
      result.winner = std::move(v);
      break;
    }
  result.winner.handbook.version = handbook.version + 1;
  return result;
}

}  // namespace skillbook
