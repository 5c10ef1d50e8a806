#pragma once
// The skill handbook: the versioned, shareable artifact everything else
// reads and writes. It bundles mode metadata, a two-level skill registry,
// per-(agent, mode) competence profiles, and mode->skill edges.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"

namespace skillbook {

// A named capability: what it is (description) and how to spot queries
// that exercise it (indicator phrases). Skills form a forest of depth at
// most two per mode: a parent may have children, children may not.
struct Skill {
  std::string id;
  std::string description;
  std::vector<std::string> indicators;
  std::string mode;
  std::optional<std::string> parent;

  bool operator==(const Skill&) const = default;
};

// Per-mode metadata: distilled procedural insights and the roster of
// agents eligible to take steps in this mode.
struct ModeMetadata {
  std::string mode;
  std::vector<std::string> insights;
  std::vector<std::string> allowed_agents;

  bool operator==(const ModeMetadata&) const = default;
};

// Beta-Bernoulli evidence for one (agent, skill) pair. The uninformative
// prior Beta(1, 1) is stored explicitly, so alpha and beta stay >= 1 and
// observed counts are (alpha - 1) successes and (beta - 1) failures.
struct BetaCounter {
  double alpha = 1.0;
  double beta = 1.0;

  bool operator==(const BetaCounter&) const = default;
};

inline constexpr double kPriorAlpha = 1.0;
inline constexpr double kPriorBeta = 1.0;

// Exact running mean of observed per-step cost for one (agent, mode).
struct CostStats {
  double mean = 0.0;
  std::uint64_t count = 0;

  bool operator==(const CostStats&) const = default;
};

// Everything routing knows about one agent in one mode.
struct AgentProfile {
  std::string agent_id;
  std::string mode;
  std::string summary;
  std::map<std::string, BetaCounter> counters;  // skill id -> evidence
  CostStats cost_stats;
  std::vector<std::string> routing_signals;

  bool operator==(const AgentProfile&) const = default;
};

struct Handbook {
  std::uint64_t version = 0;
  std::string provenance;
  std::vector<ModeMetadata> modes;
  std::vector<Skill> skills;
  std::vector<AgentProfile> profiles;
  std::map<std::string, std::vector<std::string>> edges;  // mode -> skill ids

  bool operator==(const Handbook&) const = default;
};

// One structural problem found by validate(); path locates the field.
struct Violation {
  std::string path;
  std::string message;
};

namespace detail {

template <typename T>
const T* find_by(const std::vector<T>& items, const std::string& key,
                 std::string T::* field) {
  for (const auto& item : items)
    if (item.*field == key) return &item;
  return nullptr;
}

}  // namespace detail

inline const ModeMetadata* find_mode(const Handbook& h, const std::string& mode) {
  return detail::find_by(h.modes, mode, &ModeMetadata::mode);
}

inline const Skill* find_skill(const Handbook& h, const std::string& id) {
  return detail::find_by(h.skills, id, &Skill::id);
}

inline const AgentProfile* find_profile(const Handbook& h, const std::string& agent_id,
                                        const std::string& mode) {
  for (const auto& p : h.profiles)
    if (p.agent_id == agent_id && p.mode == mode) return &p;
  return nullptr;
}

inline bool has_children(const Handbook& h, const std::string& skill_id) {
  for (const auto& s : h.skills)
    if (s.parent && *s.parent == skill_id) return true;
  return false;
}

// Structural checks. Returns every violation found (empty means valid).
inline std::vector<Violation> validate(const Handbook& h) {
  std::vector<Violation> out;
  auto flag = [&out](std::string path, std::string message) {
    out.push_back({std::move(path), std::move(message)});
  };

  std::set<std::string> mode_ids;
  for (std::size_t i = 0; i < h.modes.size(); ++i) {
    const auto& m = h.modes[i];
    const std::string path = "modes[" + std::to_string(i) + "]";
    if (m.mode.empty()) flag(path + ".mode", "empty mode id");
    if (!mode_ids.insert(m.mode).second) flag(path + ".mode", "duplicate mode id: " + m.mode);
  }

  std::set<std::string> skill_ids;
  for (std::size_t i = 0; i < h.skills.size(); ++i) {
    const auto& s = h.skills[i];
    const std::string path = "skills[" + std::to_string(i) + "]";
    if (s.id.empty()) flag(path + ".id", "empty skill id");
    if (!skill_ids.insert(s.id).second) flag(path + ".id", "duplicate skill id: " + s.id);
    if (!mode_ids.count(s.mode)) flag(path + ".mode", "unknown mode: " + s.mode);
    if (s.parent) {
      const Skill* parent = find_skill(h, *s.parent);
      if (!parent) {
        flag(path + ".parent", "unknown parent skill: " + *s.parent);
      } else {
        if (parent->mode != s.mode)
          flag(path + ".parent", "parent " + *s.parent + " belongs to mode " + parent->mode);
        if (parent->parent)
          flag(path + ".parent", "parent " + *s.parent + " is itself a child; max depth is two");
        if (*s.parent == s.id) flag(path + ".parent", "skill is its own parent");
      }
    }
  }

  // Every skill must appear in exactly one mode's edge list, and that list
  // must be keyed by the skill's own mode.
  std::map<std::string, int> edge_hits;
  for (const auto& [mode, skill_list] : h.edges) {
    if (!mode_ids.count(mode)) flag("edges." + mode, "unknown mode: " + mode);
    std::set<std::string> seen;
    for (const auto& sid : skill_list) {
      if (!seen.insert(sid).second) flag("edges." + mode, "duplicate skill id: " + sid);
      const Skill* s = find_skill(h, sid);
      if (!s) {
        flag("edges." + mode, "unknown skill id: " + sid);
        continue;
      }
      if (s->mode != mode)
        flag("edges." + mode, "skill " + sid + " belongs to mode " + s->mode);
      edge_hits[sid] += 1;
    }
  }
  for (const auto& s : h.skills) {
    auto it = edge_hits.find(s.id);
    int hits = it == edge_hits.end() ? 0 : it->second;
    if (hits != 1)
      flag("skills." + s.id, "skill appears in " + std::to_string(hits) +
                                 " edge lists; expected exactly one");
  }

  std::set<std::pair<std::string, std::string>> profile_keys;
  for (std::size_t i = 0; i < h.profiles.size(); ++i) {
    const auto& p = h.profiles[i];
    const std::string path = "profiles[" + std::to_string(i) + "]";
    if (p.agent_id.empty()) flag(path + ".agent_id", "empty agent id");
    if (!mode_ids.count(p.mode)) flag(path + ".mode", "unknown mode: " + p.mode);
    if (!profile_keys.insert({p.agent_id, p.mode}).second)
      flag(path, "duplicate profile for (" + p.agent_id + ", " + p.mode + ")");
    for (const auto& [sid, counter] : p.counters) {
      const std::string cpath = path + ".counters." + sid;
      const Skill* s = find_skill(h, sid);
      if (!s)
        flag(cpath, "counter references unknown skill");
      else if (s->mode != p.mode)
        flag(cpath, "counter references skill of mode " + s->mode);
      if (!(counter.alpha > 0.0)) flag(cpath + ".alpha", "alpha must be positive");
      if (!(counter.beta > 0.0)) flag(cpath + ".beta", "beta must be positive");
    }
    if (p.cost_stats.mean < 0.0) flag(path + ".cost_stats.mean", "negative mean cost");
    if (p.cost_stats.count == 0 && p.cost_stats.mean != 0.0)
      flag(path + ".cost_stats", "nonzero mean with zero observations");
  }

  return out;
}

inline void require_valid(const Handbook& h, const std::string& context) {
  auto violations = validate(h);
  if (violations.empty()) return;
  std::string msg = context + ": handbook failed validation";
  for (const auto& v : violations) msg += "\n  " + v.path + ": " + v.message;
  throw DataError(msg);
}

// The skills wired to a mode, sorted by id so callers see a stable order.
inline std::vector<Skill> mode_skills(const Handbook& h, const std::string& mode) {
  if (!find_mode(h, mode)) throw UnknownModeError(mode);
  std::vector<Skill> out;
  auto it = h.edges.find(mode);
  if (it != h.edges.end()) {
    for (const auto& sid : it->second) {
      const Skill* s = find_skill(h, sid);
      if (!s) throw DataError("edges." + mode + " references unknown skill: " + sid);
      out.push_back(*s);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Skill& a, const Skill& b) { return a.id < b.id; });
  return out;
}

}  // namespace skillbook
