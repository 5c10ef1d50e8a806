// Variant enumeration, the coarse/fine evidence folds, Pareto screening
// against a quadratic oracle, and final handbook selection invariants.

#include <doctest.h>

#include <skillbook/policy.hpp>
#include <skillbook/selector.hpp>

#include <map>
#include <set>

#include "fixtures.hpp"

using namespace skillbook;

namespace {

EvaluationPoint point(const std::string& label, double reward, double cost) {
  EvaluationPoint p;
  p.label = label;
  p.mean_reward = reward;
  p.mean_cost = cost;
  return p;
}

// One mode, a parent with two children, and two agents whose evidence
// disagrees across granularities: child-level evidence favours "strong",
// residual parent-level evidence favours "cheap". The environment pays off
// only for "strong", so granularity choices produce different points.
Handbook conflicted_book() {
  Handbook h;
  h.version = 7;
  h.modes.push_back({"m", {}, {"cheap", "strong"}});
  h.skills.push_back({"p", "parent skill", {"ptok"}, "m", {}});
  h.skills.push_back({"p/c1", "first child", {"c1tok"}, "m", std::string("p")});
  h.skills.push_back({"p/c2", "second child", {"c2tok"}, "m", std::string("p")});
  h.edges["m"] = {"p", "p/c1", "p/c2"};
  // Child evidence is light, so after fold_coarse the residual parent
  // counters still dominate: coarse favours "cheap", fine favours "strong".
  AgentProfile strong{"strong", "m", "", {}, {0.5, 10}, {}};
  strong.counters["p"] = {2.0, 20.0};
  strong.counters["p/c1"] = {3.0, 1.0};
  strong.counters["p/c2"] = {3.0, 1.0};
  AgentProfile cheap{"cheap", "m", "", {}, {0.1, 10}, {}};
  cheap.counters["p"] = {20.0, 2.0};
  cheap.counters["p/c1"] = {1.0, 3.0};
  cheap.counters["p/c2"] = {1.0, 3.0};
  h.profiles = {strong, cheap};
  return h;
}

// Pays out only when "strong" acts; records episode seeds for pairing
// checks; optionally throws for one query.
struct PayoffEnv : Environment {
  std::map<std::string, std::vector<std::uint64_t>>* seed_log = nullptr;
  std::string poison_query;
  std::string current_query;

  void begin_episode(const std::string& query, std::uint64_t episode_seed) override {
    current_query = query;
    if (seed_log) (*seed_log)[query].push_back(episode_seed);
  }
  StepResult execute(const InteractionState&, const std::string&,
                     const std::string& agent) override {
    if (current_query == poison_query) throw EnvironmentError("poisoned");
    StepResult r;
    r.success = agent == "strong";
    r.cost = agent == "strong" ? 0.5 : 0.1;
    r.trace_digest = "t";
    r.observation_digest = "o";
    return r;
  }
  double judge_reward(const std::string&, const Trajectory& t) override {
    for (const auto& s : t.steps)
      if (!s.success.value_or(false)) return 0.0;
    return 1.0;
  }
};

}  // namespace

TEST_CASE("variant enumeration covers the granularity-times-insights grid") {
  SUBCASE("no hierarchy: just insights on/off") {
    Handbook flat = testfix::figure_handbook();
    std::erase_if(flat.skills, [](const Skill& s) { return s.parent.has_value(); });
    std::erase_if(flat.edges["code"],
                  [](const std::string& sid) { return sid.find('/') != std::string::npos; });
    for (auto& p : flat.profiles) {
      p.counters.erase("web-nav/forms");
      p.counters.erase("web-nav/scrape");
    }
    auto variants = enumerate_variants(flat);
    REQUIRE(variants.size() == 2);
    CHECK(variants[0].descriptor.label() == "base|insights=on");
    CHECK(variants[1].descriptor.label() == "base|insights=off");
    CHECK(variants[1].handbook.modes[0].insights.empty());
  }
  SUBCASE("one hierarchy mode: three granularities times two") {
    auto variants = enumerate_variants(testfix::figure_handbook());
    REQUIRE(variants.size() == 6);
    std::set<std::string> labels;
    for (const auto& v : variants) {
      labels.insert(v.descriptor.label());
      CHECK(validate(v.handbook).empty());
    }
    CHECK(labels.size() == 6);
    CHECK(labels.count("code=both|insights=on") == 1);
    CHECK(labels.count("code=coarse|insights=off") == 1);
    CHECK(labels.count("code=fine|insights=on") == 1);
  }
  SUBCASE("two hierarchy modes: nine granularity grids times two") {
    Handbook h = testfix::figure_handbook();
    h.skills.push_back({"compose/mail", "mail", {"mail"}, "answer", std::string("compose")});
    h.edges["answer"].push_back("compose/mail");
    auto variants = enumerate_variants(h);
    CHECK(variants.size() == 18);
  }
}

TEST_CASE("fold_coarse moves child evidence into the parent exactly") {
  Handbook h = testfix::figure_handbook();
  // Give a1 a residual parent counter so the fold has to add, not replace:
  // parent (2,2) + child-forms observed (8,1) = (10,3). a2's parent slot is
  // created from the prior: (1,1) + scrape observed (6,2) = (7,3).
  h.profiles[0].counters["web-nav"] = {2.0, 2.0};
  Handbook folded = fold_coarse(h, "code");
  CHECK(validate(folded).empty());
  CHECK(find_skill(folded, "web-nav/forms") == nullptr);
  CHECK(find_skill(folded, "web-nav/scrape") == nullptr);
  CHECK(find_skill(folded, "web-nav") != nullptr);
  CHECK(find_skill(folded, "sql") != nullptr);  // leaves untouched

  const AgentProfile* a1 = find_profile(folded, "a1", "code");
  CHECK(a1->counters.at("web-nav").alpha == 10.0);
  CHECK(a1->counters.at("web-nav").beta == 3.0);
  CHECK(a1->counters.count("web-nav/forms") == 0);
  CHECK(a1->counters.at("sql").alpha == 3.0);  // non-hierarchy counter untouched
  const AgentProfile* a2 = find_profile(folded, "a2", "code");
  CHECK(a2->counters.at("web-nav").alpha == 7.0);
  CHECK(a2->counters.at("web-nav").beta == 3.0);

  // Observed mass is conserved: (2,2)+(9,2)obs(1,1)+(8,1) and so on.
  CHECK(fold_coarse(folded, "code") == folded);  // idempotent once flat
  Handbook untouched = fold_coarse(h, "answer");  // no hierarchy there
  CHECK(untouched == h);
}

TEST_CASE("fold_fine drops parents and keeps child evidence as-is") {
  Handbook h = testfix::figure_handbook();
  h.profiles[0].counters["web-nav"] = {5.0, 5.0};  // residual, must be discarded
  Handbook folded = fold_fine(h, "code");
  CHECK(validate(folded).empty());
  CHECK(find_skill(folded, "web-nav") == nullptr);
  REQUIRE(find_skill(folded, "web-nav/forms") != nullptr);
  CHECK(find_skill(folded, "web-nav/forms")->parent == std::nullopt);
  CHECK(find_skill(folded, "web-nav/scrape")->parent == std::nullopt);

  const AgentProfile* a1 = find_profile(folded, "a1", "code");
  CHECK(a1->counters.count("web-nav") == 0);  // residual discarded with the parent
  CHECK(a1->counters.at("web-nav/forms").alpha == 9.0);  // child evidence untouched
  CHECK(a1->counters.at("web-nav/forms").beta == 2.0);
  for (const auto& sid : folded.edges.at("code")) CHECK(sid != "web-nav");
}

TEST_CASE("pareto frontier keeps non-dominated points and exact duplicates") {
  std::vector<EvaluationPoint> pts{
      point("a", 0.5, 0.2),  point("b", 0.7, 0.3),  point("c", 0.4, 0.25),
      point("b2", 0.7, 0.3),  // exact duplicate of b
      point("e", 0.6, 0.4),
  };
  auto frontier = pareto_frontier(pts);
  REQUIRE(frontier.size() == 3);
  CHECK(frontier[0].label == "a");
  CHECK(frontier[1].label == "b");   // label tie-break orders the duplicates
  CHECK(frontier[2].label == "b2");
  for (std::size_t i = 1; i < frontier.size(); ++i)
    CHECK(frontier[i - 1].mean_cost <= frontier[i].mean_cost);
}

TEST_CASE("pareto frontier matches the quadratic oracle on random point sets") {
  Rng rng(31337);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(40));
    std::vector<EvaluationPoint> pts;
    for (int i = 0; i < n; ++i) {
      // Coarse grid so duplicates and ties happen often.
      const double reward = static_cast<double>(rng.below(6)) / 5.0;
      const double cost = static_cast<double>(rng.below(6)) / 5.0;
      pts.push_back(point("p" + std::to_string(i), reward, cost));
    }
    auto frontier = pareto_frontier(pts);

    std::multiset<std::string> oracle;
    for (const auto& p : pts) {
      bool dominated = false;
      for (const auto& q : pts)
        if (dominates(q, p)) dominated = true;
      if (!dominated) oracle.insert(p.label);
    }
    std::multiset<std::string> got;
    for (const auto& p : frontier) got.insert(p.label);
    CHECK(got == oracle);
    for (std::size_t i = 1; i < frontier.size(); ++i)
      CHECK(frontier[i - 1].mean_cost <= frontier[i].mean_cost);
  }
}

TEST_CASE("evaluation pairs episode seeds across variants") {
  Handbook h = conflicted_book();
  auto variants = enumerate_variants(h);
  REQUIRE(variants.size() == 6);
  std::vector<std::string> queries{"c1tok job one", "c1tok job two"};
  ScriptedModePolicy policy({"m"});
  RouterConfig cfg;
  cfg.mode_policy = &policy;
  cfg.lambda_c = 0.0;
  cfg.terminal_mode = "m";

  std::map<std::string, std::vector<std::uint64_t>> seed_log;
  PayoffEnv env;
  env.seed_log = &seed_log;
  EvaluationPoint p1 = evaluate_variant(variants[0], queries, env, cfg, 0.1, 99);
  EvaluationPoint p2 = evaluate_variant(variants[2], queries, env, cfg, 0.1, 99);
  for (const auto& q : queries) {
    REQUIRE(seed_log.at(q).size() == 2);
    CHECK(seed_log.at(q)[0] == seed_log.at(q)[1]);  // same draw for both variants
    CHECK(seed_log.at(q)[0] == derive_seed(99, q));
  }
  CHECK(p1.n_queries == 2);
  CHECK(p1.label == variants[0].descriptor.label());
  CHECK(p1.objective ==
        doctest::Approx(p1.mean_reward - 0.1 * p1.mean_cost).epsilon(1e-15));
  (void)p2;

  SUBCASE("environment failures become zero-reward notes, not aborts") {
    PayoffEnv bad;
    bad.poison_query = "c1tok job two";
    EvaluationPoint p = evaluate_variant(variants[0], queries, bad, cfg, 0.1, 99);
    REQUIRE(p.notes.size() == 1);
    CHECK(p.notes[0].find("poisoned") != std::string::npos);
    CHECK(p.n_queries == 2);
    CHECK(p.mean_reward == doctest::Approx(0.5).epsilon(1e-12));  // 1 + 0 over 2
  }
}

TEST_CASE("selection picks the frontier argmax and bumps the version once") {
  Handbook h = conflicted_book();
  std::vector<std::string> queries{"c1tok alpha", "c1tok beta", "c2tok gamma"};
  ScriptedModePolicy policy({"m"});
  RouterConfig cfg;
  cfg.mode_policy = &policy;
  cfg.lambda_c = 0.0;  // routing is competence-only; cost enters via lambda
  cfg.terminal_mode = "m";
  PayoffEnv env;

  SelectionResult r = select_handbook(h, queries, env, cfg, 0.1, 7);
  CHECK(r.points.size() == 6);
  CHECK(!r.frontier.empty());

  // Points are what the construction promises: child-level evidence routes
  // to "strong" (reward 1, cost 0.5); the coarse fold routes to "cheap"
  // (reward 0, cost 0.1).
  std::map<std::string, const EvaluationPoint*> by_label;
  for (const auto& p : r.points) by_label[p.label] = &p;
  CHECK(by_label.at("m=fine|insights=on")->mean_reward == doctest::Approx(1.0));
  CHECK(by_label.at("m=fine|insights=on")->mean_cost == doctest::Approx(0.5));
  CHECK(by_label.at("m=coarse|insights=on")->mean_reward == doctest::Approx(0.0));
  CHECK(by_label.at("m=coarse|insights=on")->mean_cost == doctest::Approx(0.1));

  // The winner is on the frontier and maximizes the objective there.
  const EvaluationPoint* winner_point = nullptr;
  for (const auto& p : r.frontier)
    if (p.label == r.winner_label) winner_point = &p;
  REQUIRE(winner_point != nullptr);
  for (const auto& p : r.frontier) CHECK(winner_point->objective >= p.objective);
  CHECK(r.winner.descriptor.label() == r.winner_label);
  CHECK(r.winner.handbook.version == h.version + 1);

  // Deterministic: the same call yields the same selection and points.
  PayoffEnv env2;
  SelectionResult r2 = select_handbook(h, queries, env2, cfg, 0.1, 7);
  CHECK(r2.winner_label == r.winner_label);
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    CHECK(r2.points[i].label == r.points[i].label);
    CHECK(r2.points[i].mean_reward == r.points[i].mean_reward);
    CHECK(r2.points[i].mean_cost == r.points[i].mean_cost);
  }

  // A harsher cost penalty never selects a more expensive handbook.
  PayoffEnv env3;
  SelectionResult pricey = select_handbook(h, queries, env3, cfg, 10.0, 7);
  const EvaluationPoint* cheap_winner = nullptr;
  for (const auto& p : pricey.frontier)
    if (p.label == pricey.winner_label) cheap_winner = &p;
  REQUIRE(cheap_winner != nullptr);
  CHECK(cheap_winner->mean_cost <= winner_point->mean_cost);

  PayoffEnv env4;
  std::vector<std::string> none;
  CHECK_THROWS_AS(select_handbook(h, none, env4, cfg, 0.1, 7), ConfigError);
}
