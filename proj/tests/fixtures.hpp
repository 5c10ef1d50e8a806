#pragma once
// Shared test fixtures: a small hand-built handbook with a skill hierarchy,
// plus random generators for handbooks and routing scenarios. The random
// generators build structures that are valid by construction so tests can
// focus on the property under test.

#include <skillbook/rng.hpp>
#include <skillbook/router.hpp>
#include <skillbook/serialize.hpp>

#include <string>
#include <vector>

namespace skillbook::testfix {

// Two-mode handbook with a parent/child hierarchy under "code" and a flat
// "answer" mode. Counter values are small integers so expected posteriors
// are easy to read off.
inline Handbook figure_handbook() {
  Handbook h;
  h.version = 3;
  h.provenance = "fixture";
  h.modes.push_back({"code", {"prefer small diffs"}, {"a1", "a2"}});
  h.modes.push_back({"answer", {}, {"a1", "a2"}});

  Skill web_nav{"web-nav", "navigate web applications", {"browser", "click"}, "code", {}};
  Skill forms{"web-nav/forms", "fill and submit forms", {"form", "submit"}, "code", "web-nav"};
  Skill scrape{"web-nav/scrape", "extract page content", {"scrape", "extract"}, "code",
               "web-nav"};
  Skill sql{"sql", "write sql queries", {"sql", "join"}, "code", {}};
  Skill compose{"compose", "compose the final answer", {"summarize"}, "answer", {}};
  h.skills = {web_nav, forms, scrape, sql, compose};
  h.edges["code"] = {"web-nav", "web-nav/forms", "web-nav/scrape", "sql"};
  h.edges["answer"] = {"compose"};

  AgentProfile a1c{"a1", "code", "forms specialist", {}, {0.4, 5}, {}};
  a1c.counters["web-nav/forms"] = {9.0, 2.0};
  a1c.counters["sql"] = {3.0, 4.0};
  AgentProfile a2c{"a2", "code", "scraper", {}, {0.2, 8}, {}};
  a2c.counters["web-nav/scrape"] = {7.0, 3.0};
  a2c.counters["sql"] = {5.0, 2.0};
  AgentProfile a1a{"a1", "answer", "", {}, {0.1, 4}, {}};
  a1a.counters["compose"] = {6.0, 2.0};
  AgentProfile a2a{"a2", "answer", "", {}, {0.3, 2}, {}};
  h.profiles = {a1c, a2c, a1a, a2a};
  return h;
}

// Random but always-valid handbook: random mode count, skill forest of
// depth <= 2, complete edges, profiles with positive counters and
// consistent cost stats.
inline Handbook random_handbook(Rng& rng) {
  Handbook h;
  h.version = rng.below(100);
  h.provenance = "gen-" + std::to_string(rng.below(1000));

  const int n_modes = 1 + static_cast<int>(rng.below(3));
  const int n_agents = 1 + static_cast<int>(rng.below(4));
  std::vector<std::string> agents;
  for (int a = 0; a < n_agents; ++a) agents.push_back("a" + std::to_string(a));

  for (int m = 0; m < n_modes; ++m) {
    const std::string mode = "m" + std::to_string(m);
    ModeMetadata meta{mode, {}, agents};
    const int n_insights = static_cast<int>(rng.below(3));
    for (int i = 0; i < n_insights; ++i)
      meta.insights.push_back("insight " + std::to_string(rng.below(50)) +
                              " with \"quotes\" and \\slashes\\");
    h.modes.push_back(meta);
    h.edges[mode] = {};

    const int n_parents = static_cast<int>(rng.below(3));
    for (int s = 0; s < n_parents; ++s) {
      Skill parent;
      parent.id = mode + "-s" + std::to_string(s);
      parent.mode = mode;
      parent.description = "skill " + std::to_string(rng.below(1000));
      const int n_ind = 1 + static_cast<int>(rng.below(3));
      for (int i = 0; i < n_ind; ++i)
        parent.indicators.push_back("tok" + std::to_string(rng.below(30)));
      h.edges[mode].push_back(parent.id);
      const int n_children = static_cast<int>(rng.below(3));
      for (int c = 0; c < n_children; ++c) {
        Skill child = parent;
        child.id = parent.id + "/c" + std::to_string(c);
        child.parent = parent.id;
        child.indicators.push_back("ctok" + std::to_string(rng.below(30)));
        h.skills.push_back(child);
        h.edges[mode].push_back(child.id);
      }
      h.skills.push_back(parent);
    }

    for (const auto& agent : agents) {
      if (rng.bernoulli(0.25)) continue;  // some (agent, mode) pairs unseen
      AgentProfile p;
      p.agent_id = agent;
      p.mode = mode;
      if (rng.bernoulli(0.5)) p.summary = "summary " + std::to_string(rng.below(100));
      for (const auto& sid : h.edges[mode])
        if (rng.bernoulli(0.6))
          p.counters[sid] = BetaCounter{1.0 + static_cast<double>(rng.below(40)),
                                        1.0 + static_cast<double>(rng.below(40))};
      if (rng.bernoulli(0.8)) {
        p.cost_stats.count = 1 + rng.below(50);
        p.cost_stats.mean = rng.uniform();  // arbitrary doubles stress printing
      }
      if (rng.bernoulli(0.3))
        p.routing_signals.push_back("signal " + std::to_string(rng.below(10)));
      h.profiles.push_back(std::move(p));
    }
  }
  return h;
}

// A single-mode routing scenario: a handbook, an active-skill set, and a
// lambda. About a third of the scenarios contain deliberate utility ties
// (cloned profiles).
struct RoutingFixture {
  Handbook handbook;
  ActiveSkillSet active;
  double lambda_c = 0.5;
};

inline RoutingFixture random_routing_fixture(Rng& rng) {
  RoutingFixture f;
  Handbook& h = f.handbook;
  h.version = 1;
  const int n_agents = 2 + static_cast<int>(rng.below(5));
  const int n_skills = 1 + static_cast<int>(rng.below(4));
  std::vector<std::string> agents;
  for (int a = 0; a < n_agents; ++a) agents.push_back("a" + std::to_string(a));
  h.modes.push_back({"m", {}, agents});
  h.edges["m"] = {};
  for (int s = 0; s < n_skills; ++s) {
    const std::string sid = "s" + std::to_string(s);
    h.skills.push_back({sid, "skill", {"tok" + std::to_string(s)}, "m", {}});
    h.edges["m"].push_back(sid);
  }
  for (const auto& agent : agents) {
    AgentProfile p;
    p.agent_id = agent;
    p.mode = "m";
    for (const auto& sid : h.edges["m"])
      if (rng.bernoulli(0.8))
        p.counters[sid] = BetaCounter{1.0 + static_cast<double>(rng.below(30)),
                                      1.0 + static_cast<double>(rng.below(30))};
    p.cost_stats.count = 1 + rng.below(20);
    p.cost_stats.mean = rng.uniform();
    h.profiles.push_back(std::move(p));
  }
  // Clone a profile onto another agent to force exact utility ties.
  if (n_agents >= 2 && rng.bernoulli(0.35)) {
    AgentProfile clone = h.profiles[0];
    clone.agent_id = agents[1];
    h.profiles[1] = clone;
  }

  double total = 0.0;
  for (int s = 0; s < n_skills; ++s) {
    if (s > 0 && !rng.bernoulli(0.7)) continue;
    const double w = 0.1 + rng.uniform();
    f.active.entries["s" + std::to_string(s)] = w;
    total += w;
  }
  for (auto& [sid, w] : f.active.entries) w /= total;
  f.lambda_c = rng.uniform() * 2.0;
  return f;
}

// Straight-line recomputation of the routing argmax over a given active
// set: utility descending, then stored mean cost ascending, then agent id
// ascending. Kept deliberately independent of the router's implementation.
inline std::string argmax_oracle(const Handbook& h, const std::string& mode,
                                 const std::map<std::string, double>& active,
                                 double lambda_c) {
  const ModeMetadata* meta = find_mode(h, mode);
  std::string best;
  double best_u = 0.0, best_cost = 0.0;
  for (const auto& agent : meta->allowed_agents) {
    const AgentProfile* p = find_profile(h, agent, mode);
    double u = 0.0;
    for (const auto& [sid, w] : active) {
      double mean = 0.5;
      if (p) {
        auto it = p->counters.find(sid);
        if (it != p->counters.end())
          mean = it->second.alpha / (it->second.alpha + it->second.beta);
      }
      u += w * mean;
    }
    const double cost = p ? p->cost_stats.mean : 0.0;
    u -= lambda_c * cost;
    const bool better =
        best.empty() || u > best_u ||
        (u == best_u && (cost < best_cost || (cost == best_cost && agent < best)));
    if (better) {
      best = agent;
      best_u = u;
      best_cost = cost;
    }
  }
  return best;
}

inline std::string argmax_oracle(const RoutingFixture& f) {
  return argmax_oracle(f.handbook, "m", f.active.entries, f.lambda_c);
}

}  // namespace skillbook::testfix
