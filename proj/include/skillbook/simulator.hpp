#pragma once
// Synthetic task worlds with known ground truth. A LatentWorld fixes a set
// of modes, latent skills with indicator tokens, and agents with true
// per-skill success probabilities and per-mode costs. Everything is derived
// from (spec, seed), so worlds are reproducible and exportable as fixtures.
//
// The default construction is deliberately heterogeneous: skills are dealt
// round-robin to specialist agents, agent 0 additionally gets a decent
// competence floor everywhere (the strong-but-pricey generalist), and per
// -mode cost grows with overall strength. No agent dominates every skill,
// so good routing has to spread work across the roster.

#include <span>
#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "competence.hpp"
#include "router.hpp"
#include "serialize.hpp"

namespace skillbook::sim {

struct WorldSpec {
  std::vector<std::string> modes = {"search", "code", "answer"};  // last is terminal
  int skills_per_mode = 4;
  int n_agents = 6;
  std::string heterogeneity = "strict";  // "strict" | "free"
  double multi_skill_prob = 0.0;         // chance a step exercises two skills
  double cost_noise = 0.02;              // relative, zero-mean observation noise
  double generalist_floor = 0.6;         // agent 0 minimum competence everywhere
  double specialist_low = 0.85;
  double specialist_high = 0.97;
  double offskill_low = 0.15;
  double offskill_high = 0.5;
  double mode_need_prob = 0.65;  // chance a query needs each non-terminal mode

  bool operator==(const WorldSpec&) const = default;
};

struct LatentSkill {
  std::string id;
  std::string mode;
  std::string description;
  std::vector<std::string> indicators;

  bool operator==(const LatentSkill&) const = default;
};

struct SimAgent {
  std::string id;
  std::map<std::string, double> cost_by_mode;  // true base cost per step
  std::map<std::string, double> p_by_skill;    // true success probability

  bool operator==(const SimAgent&) const = default;
};

struct LatentWorld {
  WorldSpec spec;
  std::uint64_t seed = 0;
  std::vector<LatentSkill> skills;
  std::vector<SimAgent> agents;

  bool operator==(const LatentWorld&) const = default;

  const std::string& terminal_mode() const { return spec.modes.back(); }

  std::vector<std::string> nonterminal_modes() const {
    return {spec.modes.begin(), spec.modes.end() - 1};
  }

  const SimAgent* find_agent(const std::string& id) const {
    for (const auto& a : agents)
      if (a.id == id) return &a;
    return nullptr;
  }

  const LatentSkill* find_skill(const std::string& id) const {
    for (const auto& s : skills)
      if (s.id == id) return &s;
    return nullptr;
  }

  // indicator token -> owning skill
  std::map<std::string, const LatentSkill*> token_index() const {
    std::map<std::string, const LatentSkill*> idx;
    for (const auto& s : skills)
      for (const auto& tok : s.indicators) idx[tok] = &s;
    return idx;
  }
};

namespace detail {

inline std::string agent_id(int i, int n) {
  int width = 1;
  for (int x = n - 1; x >= 10; x /= 10) ++width;
  std::string digits = std::to_string(i);
  return "a" + std::string(width - digits.size(), '0') + digits;
}

inline bool plain_token(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::islower(static_cast<unsigned char>(c)) &&
        !std::isdigit(static_cast<unsigned char>(c)))
      return false;
  return true;
}

}  // namespace detail

inline void validate_spec(const WorldSpec& spec) {
  if (spec.modes.size() < 2)
    throw ConfigError("world spec needs at least one working mode plus a terminal mode");
  std::set<std::string> seen;
  for (const auto& m : spec.modes) {
    if (!detail::plain_token(m))
      throw ConfigError("mode names must be lowercase alphanumeric tokens: '" + m + "'");
    if (!seen.insert(m).second) throw ConfigError("duplicate mode in world spec: " + m);
  }
  if (spec.skills_per_mode < 1) throw ConfigError("skills_per_mode must be >= 1");
  if (spec.n_agents < 1) throw ConfigError("n_agents must be >= 1");
  if (spec.heterogeneity == "strict" && spec.n_agents < 2)
    throw ConfigError("strict heterogeneity needs at least two agents");
  if (spec.heterogeneity != "strict" && spec.heterogeneity != "free")
    throw ConfigError("heterogeneity must be 'strict' or 'free'");
  auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in01(spec.multi_skill_prob) || !in01(spec.mode_need_prob) ||
      !in01(spec.specialist_low) || !in01(spec.specialist_high) ||
      !in01(spec.offskill_low) || !in01(spec.offskill_high) ||
      !in01(spec.generalist_floor))
    throw ConfigError("world spec probabilities must lie in [0, 1]");
  if (spec.specialist_low > spec.specialist_high || spec.offskill_low > spec.offskill_high)
    throw ConfigError("world spec probability ranges are inverted");
  if (spec.cost_noise < 0.0 || spec.cost_noise >= 1.0)
    throw ConfigError("cost_noise must lie in [0, 1)");
}

// True if every agent is beaten by at least 0.2 on some skill — the
// guarantee that makes single-agent routing provably suboptimal.
inline bool strictly_heterogeneous(const LatentWorld& w) {
  for (const auto& a : w.agents) {
    bool beaten = false;
    for (const auto& s : w.skills) {
      double pa = a.p_by_skill.at(s.id);
      for (const auto& b : w.agents) {
        if (b.id == a.id) continue;
        if (b.p_by_skill.at(s.id) >= pa + 0.2) beaten = true;
      }
    }
    if (!beaten) return false;
  }
  return true;
}

inline LatentWorld generate_world(const WorldSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  LatentWorld w;
  w.spec = spec;
  w.seed = seed;

  for (const auto& mode : spec.modes) {
    for (int j = 0; j < spec.skills_per_mode; ++j) {
      LatentSkill s;
      s.id = "k" + mode + std::to_string(j);
      s.mode = mode;
      // Mode names stay out of the description text; queries carry mode
      // tokens in their scaffolding and retrieval must not match on them.
      s.description = "latent capability " + std::to_string(j) + " signalled by token family " + s.id;
      for (char suffix : {'a', 'b', 'c'}) s.indicators.push_back(s.id + suffix);
      w.skills.push_back(std::move(s));
    }
  }

  Rng rng(derive_seed(seed, "world"));
  const int n_skills = static_cast<int>(w.skills.size());
  for (int i = 0; i < spec.n_agents; ++i) {
    SimAgent a;
    a.id = detail::agent_id(i, spec.n_agents);
    for (int k = 0; k < n_skills; ++k) {
      const bool specialist = (k % spec.n_agents) == i;
      double p = specialist ? rng.uniform(spec.specialist_low, spec.specialist_high)
                            : rng.uniform(spec.offskill_low, spec.offskill_high);
      if (spec.heterogeneity == "strict" && i == 0 && !specialist)
        p = std::max(p, spec.generalist_floor);
      a.p_by_skill[w.skills[k].id] = p;
    }
    w.agents.push_back(std::move(a));
  }

  // Cost grows with overall strength: strong agents are expensive, so
  // cost-blind routing overpays. Rank by mean true competence.
  std::vector<std::pair<double, int>> strength;
  for (int i = 0; i < spec.n_agents; ++i) {
    double mean = 0.0;
    for (const auto& [sid, p] : w.agents[i].p_by_skill) mean += p;
    strength.push_back({mean / n_skills, i});
  }
  std::sort(strength.begin(), strength.end());
  for (int rank = 0; rank < spec.n_agents; ++rank) {
    SimAgent& a = w.agents[strength[rank].second];
    const double base =
        spec.n_agents == 1
            ? 0.3
            : 0.15 + 0.6 * static_cast<double>(rank) / static_cast<double>(spec.n_agents - 1);
    for (const auto& mode : spec.modes) {
      double c = base + rng.uniform(-0.03, 0.03);
      a.cost_by_mode[mode] = std::max(0.05, c);
    }
  }

  if (spec.heterogeneity == "strict" && !strictly_heterogeneous(w))
    throw DataError("generated world violates strict heterogeneity");
  return w;
}

// A task drawn from the world: which modes it needs (in order, ending at
// the terminal mode) and which latent skills each mode's step exercises.
struct SimQuery {
  std::string id;
  std::string text;
  std::vector<std::string> required_modes;
  std::map<std::string, std::vector<std::string>> step_skills;  // mode -> skill ids

  bool operator==(const SimQuery&) const = default;
};

inline std::vector<SimQuery> generate_queries(const LatentWorld& w, int n,
                                              std::uint64_t seed,
                                              const std::string& tag) {
  if (n < 0) throw ConfigError("query count must be non-negative");
  std::vector<SimQuery> out;
  const auto nonterminal = w.nonterminal_modes();
  std::vector<std::vector<const LatentSkill*>> by_mode(w.spec.modes.size());
  for (const auto& s : w.skills)
    for (std::size_t m = 0; m < w.spec.modes.size(); ++m)
      if (w.spec.modes[m] == s.mode) by_mode[m].push_back(&s);

  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, tag + "/query/" + std::to_string(i)));
    SimQuery q;
    q.id = "q" + tag + std::to_string(i);

    std::vector<std::size_t> needed;
    for (std::size_t m = 0; m + 1 < w.spec.modes.size(); ++m)
      if (rng.bernoulli(w.spec.mode_need_prob)) needed.push_back(m);
    if (needed.empty())
      needed.push_back(static_cast<std::size_t>(rng.below(nonterminal.size())));
    for (std::size_t m : needed) q.required_modes.push_back(w.spec.modes[m]);
    q.required_modes.push_back(w.terminal_mode());

    // Every required mode (terminal included) exercises one latent skill,
    // occasionally two.
    std::vector<std::size_t> skill_modes = needed;
    skill_modes.push_back(w.spec.modes.size() - 1);
    for (std::size_t m : skill_modes) {
      const auto& pool = by_mode[m];
      std::size_t first = rng.below(pool.size());
      std::vector<std::string> ids = {pool[first]->id};
      if (pool.size() > 1 && rng.bernoulli(w.spec.multi_skill_prob)) {
        std::size_t second = rng.below(pool.size() - 1);
        if (second >= first) ++second;
        ids.push_back(pool[second]->id);
      }
      std::sort(ids.begin(), ids.end());
      q.step_skills[w.spec.modes[m]] = ids;
    }

    q.text = q.id;
    for (std::size_t m : needed) {
      q.text += " needs:" + w.spec.modes[m] + " phase-" + w.spec.modes[m];
    }
    for (std::size_t m : skill_modes)
      for (const auto& sid : q.step_skills[w.spec.modes[m]])
        for (const auto& tok : w.find_skill(sid)->indicators) q.text += " " + tok;
    q.text += " u" + tag + std::to_string(i);
    out.push_back(std::move(q));
  }
  return out;
}

// Recovers the structured query from its text: needs:<mode> tags give the
// required modes (in text order), indicator tokens give the step skills.
inline SimQuery parse_query(const LatentWorld& w, const std::string& text) {
  SimQuery q;
  q.text = text;
  auto tokens = tokenize(text);
  q.id = tokens.empty() ? "" : tokens.front();

  std::vector<std::pair<std::size_t, std::string>> tags;
  for (const auto& mode : w.nonterminal_modes()) {
    const std::string tag = "needs:" + mode;
    std::size_t at = text.find(tag);
    if (at != std::string::npos) tags.push_back({at, mode});
  }
  std::sort(tags.begin(), tags.end());
  for (const auto& [at, mode] : tags) q.required_modes.push_back(mode);
  q.required_modes.push_back(w.terminal_mode());

  const auto index = w.token_index();
  std::map<std::string, std::set<std::string>> found;
  for (const auto& tok : tokens) {
    auto it = index.find(tok);
    if (it != index.end()) found[it->second->mode].insert(it->second->id);
  }
  for (const auto& [mode, ids] : found)
    q.step_skills[mode] = std::vector<std::string>(ids.begin(), ids.end());
  return q;
}

enum class JudgeKind { binary, partial };

// Reward for a finished episode: walk the required modes in order and
// advance only on a successful step of the expected mode. Binary scoring
// pays 1.0 iff every required mode was satisfied; partial pays the
// satisfied fraction.
inline double judge(const LatentWorld& w, const SimQuery& q, const Trajectory& t,
                    JudgeKind kind = JudgeKind::binary) {
  std::size_t pos = 0;
  for (const auto& step : t.steps) {
    if (pos >= q.required_modes.size()) break;
    if (step.mode == q.required_modes[pos] && step.success.value_or(false)) ++pos;
  }
  (void)w;
  if (kind == JudgeKind::binary) return pos == q.required_modes.size() ? 1.0 : 0.0;
  return static_cast<double>(pos) / static_cast<double>(q.required_modes.size());
}

// True mean success probability of an agent on a step exercising `skills`;
// with no known skills, falls back to the agent's mean over the mode.
inline double step_success_prob(const LatentWorld& w, const SimAgent& agent,
                                const std::string& mode,
                                const std::vector<std::string>& skills) {
  if (!skills.empty()) {
    double p = 0.0;
    for (const auto& sid : skills) p += agent.p_by_skill.at(sid);
    return p / static_cast<double>(skills.size());
  }
  double p = 0.0;
  int n = 0;
  for (const auto& s : w.skills)
    if (s.mode == mode) {
      p += agent.p_by_skill.at(s.id);
      ++n;
    }
  return n == 0 ? 0.0 : p / n;
}

// The world as an Environment: executes steps by drawing Bernoulli success
// with the agent's true probability on the step's latent skills, and
// charges the agent's true cost plus bounded zero-mean noise. Successful
// steps reveal the skill's indicator tokens in their digests; failures
// reveal only an error marker. All draws are derived from (world seed,
// episode seed, query, turn, mode, agent), so an episode is reproducible
// in isolation.
class SimEnvironment : public Environment {
 public:
  explicit SimEnvironment(const LatentWorld& world, JudgeKind judge_kind = JudgeKind::binary)
      : world_(world), judge_kind_(judge_kind) {}

  void begin_episode(const std::string& query, std::uint64_t episode_seed) override {
    current_ = parse_query(world_, query);
    episode_seed_ = episode_seed;
  }

  StepResult execute(const InteractionState& state, const std::string& mode,
                     const std::string& agent_id) override {
    ++calls_;
    const SimAgent* agent = world_.find_agent(agent_id);
    if (!agent) throw UnknownAgentError(agent_id);
    bool known_mode = false;
    for (const auto& m : world_.spec.modes) known_mode |= (m == mode);
    if (!known_mode) throw UnknownModeError(mode);

    std::vector<std::string> skills;
    if (auto it = current_.step_skills.find(mode); it != current_.step_skills.end())
      skills = it->second;
    const double p = step_success_prob(world_, *agent, mode, skills);

    Rng rng(derive_seed(world_.seed ^ mix64(episode_seed_),
                        state.query + "|" + std::to_string(state.turn) + "|" + mode + "|" +
                            agent_id));
    StepResult r;
    const bool ok = rng.bernoulli(p);
    r.success = ok;
    const double noise = world_.spec.cost_noise * (2.0 * rng.uniform() - 1.0);
    r.cost = agent->cost_by_mode.at(mode) * (1.0 + noise);

    std::string tokens;
    if (ok)
      for (const auto& sid : skills)
        for (const auto& tok : world_.find_skill(sid)->indicators) tokens += " " + tok;
    r.trace_digest = "trace " + mode + " " + agent_id + (ok ? " ok" : " err") + tokens;
    r.observation_digest = "obs " + mode + (ok ? " ok" : " fail") + tokens;
    return r;
  }

  double judge_reward(const std::string& query, const Trajectory& t) override {
    return judge(world_, parse_query(world_, query), t, judge_kind_);
  }

  std::uint64_t calls() const { return calls_; }

 private:
  const LatentWorld& world_;
  JudgeKind judge_kind_;
  SimQuery current_;
  std::uint64_t episode_seed_ = 0;
  std::uint64_t calls_ = 0;
};

// Per-step perfect-information reference: for each required mode pick the
// agent maximizing true success minus lambda_c times true cost (ties:
// cheaper, then smaller id). This is the same decision rule the router
// uses, evaluated on ground truth instead of learned posteriors.
struct OraclePlan {
  std::vector<std::pair<std::string, std::string>> steps;  // (mode, agent)
  double expected_reward = 1.0;
  double expected_cost = 0.0;
};

inline OraclePlan oracle_route(const LatentWorld& w, const SimQuery& q, double lambda_c) {
  OraclePlan plan;
  for (const auto& mode : q.required_modes) {
    std::vector<std::string> skills;
    if (auto it = q.step_skills.find(mode); it != q.step_skills.end()) skills = it->second;
    const SimAgent* best = nullptr;
    double best_value = 0.0, best_cost = 0.0, best_p = 0.0;
    for (const auto& a : w.agents) {
      const double p = step_success_prob(w, a, mode, skills);
      const double cost = a.cost_by_mode.at(mode);
      const double value = p - lambda_c * cost;
      if (!best || value > best_value || (value == best_value && cost < best_cost)) {
        best = &a;
        best_value = value;
        best_cost = cost;
        best_p = p;
      }
    }
    plan.steps.push_back({mode, best->id});
    plan.expected_reward *= best_p;
    plan.expected_cost += best_cost;
  }
  return plan;
}

// Agent override that replays the oracle plan for the episode's query.
inline AgentOverride oracle_override(const LatentWorld& w, double lambda_c) {
  return [&w, lambda_c](const InteractionState& state,
                        const std::string& mode) -> std::optional<std::string> {
    SimQuery q = parse_query(w, state.query);
    OraclePlan plan = oracle_route(w, q, lambda_c);
    for (const auto& [m, agent] : plan.steps)
      if (m == mode) return agent;
    // Mode outside the plan (e.g. retry policies): fall back to the best
    // true performer for the mode at the same trade-off.
    const SimAgent* best = nullptr;
    double best_value = 0.0, best_cost = 0.0;
    for (const auto& a : w.agents) {
      const double p = step_success_prob(w, a, mode, {});
      const double cost = a.cost_by_mode.at(mode);
      const double value = p - lambda_c * cost;
      if (!best || value > best_value || (value == best_value && cost < best_cost)) {
        best = &a;
        best_value = value;
        best_cost = cost;
      }
    }
    return best->id;
  };
}

// Strongest agent by mean true competence — the "just use the best model
// everywhere" baseline.
inline std::string strongest_agent(const LatentWorld& w) {
  const SimAgent* best = nullptr;
  double best_mean = -1.0;
  for (const auto& a : w.agents) {
    double mean = 0.0;
    for (const auto& [sid, p] : a.p_by_skill) mean += p;
    mean /= static_cast<double>(a.p_by_skill.size());
    if (mean > best_mean) {
      best = &a;
      best_mean = mean;
    }
  }
  return best->id;
}

// Handbook a fresh deployment starts from: modes and rosters only — no
// skills, no evidence, prior profiles.
inline Handbook bootstrap_handbook(const LatentWorld& w) {
  Handbook h;
  h.version = 0;
  h.provenance = "sim-bootstrap";
  std::vector<std::string> roster;
  for (const auto& a : w.agents) roster.push_back(a.id);
  std::sort(roster.begin(), roster.end());
  for (const auto& mode : w.spec.modes) {
    h.modes.push_back({mode, {}, roster});
    h.edges[mode] = {};
    for (const auto& agent : roster) {
      AgentProfile p;
      p.agent_id = agent;
      p.mode = mode;
      h.profiles.push_back(std::move(p));
    }
  }
  return h;
}

inline json spec_to_json(const WorldSpec& s) {
  json j;
  j["modes"] = s.modes;
  j["skills_per_mode"] = s.skills_per_mode;
  j["n_agents"] = s.n_agents;
  j["heterogeneity"] = s.heterogeneity;
  j["multi_skill_prob"] = s.multi_skill_prob;
  j["cost_noise"] = s.cost_noise;
  j["generalist_floor"] = s.generalist_floor;
  j["specialist_low"] = s.specialist_low;
  j["specialist_high"] = s.specialist_high;
  j["offskill_low"] = s.offskill_low;
  j["offskill_high"] = s.offskill_high;
  j["mode_need_prob"] = s.mode_need_prob;
  return j;
}

// Partial specs are fine: absent keys keep their defaults, unknown keys are
// rejected.
inline WorldSpec spec_from_json(const json& j, const std::string& path) {
  jsonio::expect_keys(j, path, {},
                      {"modes", "skills_per_mode", "n_agents", "heterogeneity",
                       "multi_skill_prob", "cost_noise", "generalist_floor",
                       "specialist_low", "specialist_high", "offskill_low",
                       "offskill_high", "mode_need_prob", "seed"});
  WorldSpec s;
  if (j.contains("modes")) s.modes = jsonio::get_string_array(j, path, "modes");
  if (j.contains("skills_per_mode"))
    s.skills_per_mode = static_cast<int>(jsonio::get_uint(j, path, "skills_per_mode"));
  if (j.contains("n_agents"))
    s.n_agents = static_cast<int>(jsonio::get_uint(j, path, "n_agents"));
  if (j.contains("heterogeneity")) s.heterogeneity = jsonio::get_string(j, path, "heterogeneity");
  if (j.contains("multi_skill_prob"))
    s.multi_skill_prob = jsonio::get_number(j, path, "multi_skill_prob");
  if (j.contains("cost_noise")) s.cost_noise = jsonio::get_number(j, path, "cost_noise");
  if (j.contains("generalist_floor"))
    s.generalist_floor = jsonio::get_number(j, path, "generalist_floor");
  if (j.contains("specialist_low"))
    s.specialist_low = jsonio::get_number(j, path, "specialist_low");
  if (j.contains("specialist_high"))
    s.specialist_high = jsonio::get_number(j, path, "specialist_high");
  if (j.contains("offskill_low")) s.offskill_low = jsonio::get_number(j, path, "offskill_low");
  if (j.contains("offskill_high"))
    s.offskill_high = jsonio::get_number(j, path, "offskill_high");
  if (j.contains("mode_need_prob"))
    s.mode_need_prob = jsonio::get_number(j, path, "mode_need_prob");
  return s;
}

inline json world_to_json(const LatentWorld& w) {
  json j;
  j["spec"] = spec_to_json(w.spec);
  j["seed"] = w.seed;
  j["skills"] = json::array();
  for (const auto& s : w.skills)
    j["skills"].push_back(json{{"id", s.id},
                               {"mode", s.mode},
                               {"description", s.description},
                               {"indicators", s.indicators}});
  j["agents"] = json::array();
  for (const auto& a : w.agents)
    j["agents"].push_back(
        json{{"id", a.id}, {"cost_by_mode", a.cost_by_mode}, {"p_by_skill", a.p_by_skill}});
  return j;
}

inline LatentWorld world_from_json(const json& j, const std::string& path) {
  jsonio::expect_keys(j, path, {"spec", "seed", "skills", "agents"});
  LatentWorld w;
  w.spec = spec_from_json(j.at("spec"), path + ".spec");
  validate_spec(w.spec);
  w.seed = jsonio::get_uint(j, path, "seed");
  for (std::size_t i = 0; i < j.at("skills").size(); ++i) {
    const json& js = j.at("skills")[i];
    const std::string p = path + ".skills[" + std::to_string(i) + "]";
    jsonio::expect_keys(js, p, {"id", "mode", "description", "indicators"});
    LatentSkill s;
    s.id = jsonio::get_string(js, p, "id");
    s.mode = jsonio::get_string(js, p, "mode");
    s.description = jsonio::get_string(js, p, "description");
    s.indicators = jsonio::get_string_array(js, p, "indicators");
    w.skills.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < j.at("agents").size(); ++i) {
    const json& ja = j.at("agents")[i];
    const std::string p = path + ".agents[" + std::to_string(i) + "]";
    jsonio::expect_keys(ja, p, {"id", "cost_by_mode", "p_by_skill"});
    SimAgent a;
    a.id = jsonio::get_string(ja, p, "id");
    for (const auto& [mode, v] : ja.at("cost_by_mode").items()) {
      if (!v.is_number()) throw SchemaError(p + ".cost_by_mode", "expected numbers");
      a.cost_by_mode[mode] = v.get<double>();
    }
    for (const auto& [sid, v] : ja.at("p_by_skill").items()) {
      if (!v.is_number()) throw SchemaError(p + ".p_by_skill", "expected numbers");
      a.p_by_skill[sid] = v.get<double>();
    }
    w.agents.push_back(std::move(a));
  }
  return w;
}

inline void save_world(const LatentWorld& w, const std::string& path) {
  jsonio::write_file(path, world_to_json(w).dump(2) + "\n");
}

inline LatentWorld load_world(const std::string& path) {
  return world_from_json(jsonio::parse(jsonio::read_file(path), path), path);
}

// Queries travel as JSONL {"id", "text"} lines; structure is re-derived by
// parse_query against the world.
inline void save_queries(std::span<const SimQuery> queries, const std::string& path) {
  std::string out;
  for (const auto& q : queries) {
    out += json{{"id", q.id}, {"text", q.text}}.dump() + "\n";
  }
  jsonio::write_file(path, out);
}

inline std::vector<std::string> load_query_texts(const std::string& path) {
  std::vector<std::string> out;
  const std::string text = jsonio::read_file(path);
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json j = jsonio::parse(line, where);
    jsonio::expect_keys(j, where, {"id", "text"});
    out.push_back(jsonio::get_string(j, where, "text"));
  }
  return out;
}

// Rule-based mode policies over a world's tag conventions. Style "needs"
// reads needs:<mode> tags in query order; style "phase" reads phase-<mode>
// tags in a fixed table order and retries a failed mode once. They reach
// the same modes through different decision processes, which is what the
// transfer experiments need.
inline RuleModePolicy make_tag_policy(const LatentWorld& w, const std::string& style) {
  std::vector<ModeRule> rules;
  for (const auto& mode : w.nonterminal_modes()) {
    if (style == "needs")
      rules.push_back({"needs:" + mode, mode});
    else if (style == "phase")
      rules.push_back({"phase-" + mode, mode});
    else
      throw ConfigError("unknown mode policy style: " + style);
  }
  return RuleModePolicy(std::move(rules), w.terminal_mode(), w.terminal_mode(),
                        /*retry_failed=*/style == "phase",
                        /*by_query_position=*/style == "needs");
}

}  // namespace skillbook::sim
