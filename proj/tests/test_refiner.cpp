// Phase-2 refinement: the two-proportion test against frozen reference
// values, split/merge candidate detection on engineered fixtures, and
// evidence-conserving application with reviewer and conflict paths.

#include <doctest.h>

#include <skillbook/refiner.hpp>

#include <array>
#include <cmath>

#include "fixtures.hpp"

using namespace skillbook;

namespace {

// Mode "code" with one confounded leaf skill and two agents whose success
// depends on which query family the step came from.
Handbook confounded_book() {
  Handbook h;
  h.version = 5;
  h.modes.push_back({"code", {}, {"a1", "a2"}});
  h.skills.push_back({"conf", "does two unrelated things", {"mixed"}, "code", {}});
  h.edges["code"] = {"conf"};
  AgentProfile p1{"a1", "code", "", {}, {0.2, 6}, {}};
  p1.counters["conf"] = {4.0, 4.0};
  AgentProfile p2{"a2", "code", "", {}, {0.3, 6}, {}};
  p2.counters["conf"] = {4.0, 4.0};
  h.profiles = {p1, p2};
  return h;
}

const std::vector<std::string> kFamilyA{"alpha data one", "alpha data two",
                                        "alpha data zero"};
const std::vector<std::string> kFamilyB{"beta plot one", "beta plot two",
                                        "beta plot zero"};

// a1 succeeds exactly on family A, a2 exactly on family B.
SkillOutcomeStore confounded_store() {
  std::vector<StepOutcome> outcomes;
  auto add = [&outcomes](const std::string& q, const std::string& agent, bool ok) {
    StepOutcome so;
    so.query = q;
    so.outcome = Outcome{agent, "code", {"conf"}, ok, 0.1};
    outcomes.push_back(std::move(so));
  };
  for (const auto& q : kFamilyA) {
    add(q, "a1", true);
    add(q, "a2", false);
  }
  for (const auto& q : kFamilyB) {
    add(q, "a1", false);
    add(q, "a2", true);
  }
  return SkillOutcomeStore::from_outcomes(outcomes);
}

// Two leaves under mode "m" with per-agent evidence set from (s1, n1, s2, n2).
Handbook merge_book(double s1, double n1, double s2, double n2) {
  Handbook h;
  h.version = 2;
  h.modes.push_back({"m", {}, {"a1"}});
  h.skills.push_back({"s-x", "x", {"xx"}, "m", {}});
  h.skills.push_back({"s-y", "y", {"yy"}, "m", {}});
  h.edges["m"] = {"s-x", "s-y"};
  AgentProfile p{"a1", "m", "", {}, {0.1, 4}, {}};
  p.counters["s-x"] = {1.0 + s1, 1.0 + (n1 - s1)};
  p.counters["s-y"] = {1.0 + s2, 1.0 + (n2 - s2)};
  h.profiles = {p};
  return h;
}

class RejectingReviewer : public RefinementReviewer {
 public:
  ReviewDecision review(const RefinementCandidate&, const Handbook&) override {
    ReviewDecision d;
    d.approve = false;
    d.note = "not convinced";
    return d;
  }
  std::string name() const override { return "reject-all"; }
};

double observed(const BetaCounter& c) { return c.alpha + c.beta - 2.0; }

}  // namespace

TEST_CASE("the two-proportion z-test matches frozen reference values") {
  // Reference z and p computed independently (pooled two-proportion test,
  // two-sided p via erfc).
  CHECK(two_proportion_z(15, 20, 5, 20) ==
        doctest::Approx(3.162277660168379).epsilon(1e-12));
  CHECK(two_proportion_p_value(15, 20, 5, 20) ==
        doctest::Approx(0.0015654022580025523).epsilon(1e-9));
  CHECK(two_proportion_z(12, 20, 8, 20) ==
        doctest::Approx(1.2649110640673513).epsilon(1e-12));
  CHECK(two_proportion_p_value(12, 20, 8, 20) ==
        doctest::Approx(0.20590321073206846).epsilon(1e-9));
  CHECK(two_proportion_z(18, 20, 2, 20) ==
        doctest::Approx(5.059644256269407).epsilon(1e-12));
  CHECK(two_proportion_p_value(18, 20, 2, 20) ==
        doctest::Approx(4.200393976022014e-07).epsilon(1e-6));
  CHECK(two_proportion_z(10, 20, 10, 20) == 0.0);
  CHECK(two_proportion_p_value(10, 20, 10, 20) == 1.0);

  // Degenerate inputs answer "no evidence" rather than exploding.
  CHECK(two_proportion_p_value(0, 0, 5, 20) == 1.0);
  CHECK(two_proportion_z(0, 0, 5, 20) == 0.0);
  CHECK(two_proportion_p_value(20, 20, 20, 20) == 1.0);  // pooled rate 1: denom 0
  CHECK(two_proportion_p_value(0, 20, 0, 20) == 1.0);
}

TEST_CASE("skill outcome stores group observations by skill") {
  SkillOutcomeStore store = confounded_store();
  REQUIRE(store.find("conf") != nullptr);
  CHECK(store.find("conf")->size() == 12);
  CHECK(store.find("other") == nullptr);
  CHECK(store.total() == 12);
}

TEST_CASE("a confounded skill is flagged for splitting") {
  Handbook h = confounded_book();
  SkillOutcomeStore store = confounded_store();
  auto candidates = find_split_candidates(h, store, {});
  REQUIRE(candidates.size() == 1);
  const RefinementCandidate& c = candidates[0];
  CHECK(c.kind == RefinementCandidate::Kind::split);
  CHECK(c.targets == std::vector<std::string>{"conf"});
  CHECK(c.mode == "code");
  // Opposite perfect performance in the two groups: mean gap exactly 1.
  CHECK(c.statistic == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.group_a_queries.size() + c.group_b_queries.size() == 6);
  // The query families separate cleanly.
  for (const auto& q : c.group_a_queries) CHECK(q.find("alpha") != std::string::npos);
  for (const auto& q : c.group_b_queries) CHECK(q.find("beta") != std::string::npos);
  // Distinctive tokens rank by count difference, ties lexicographic.
  REQUIRE(!c.tokens_a.empty());
  CHECK(c.tokens_a[0] == "alpha");
  CHECK(c.tokens_b[0] == "beta");
  CHECK(c.suffix_a == "alpha");
  CHECK(c.suffix_b == "beta");
  // Tallies: a1 perfect on A (3 of 3), zero on B.
  const auto& t1 = c.split_tallies.at("a1");
  CHECK(t1 == std::array<double, 4>{3.0, 0.0, 0.0, 3.0});
  CHECK(c.split_tallies.at("a2") == std::array<double, 4>{0.0, 3.0, 3.0, 0.0});

  SUBCASE("uniform performance produces no candidate") {
    std::vector<StepOutcome> outcomes;
    for (const auto& q : kFamilyA)
      for (const auto& agent : {"a1", "a2"}) {
        StepOutcome so;
        so.query = q;
        so.outcome = Outcome{agent, "code", {"conf"}, true, 0.1};
        outcomes.push_back(so);
      }
    for (const auto& q : kFamilyB)
      for (const auto& agent : {"a1", "a2"}) {
        StepOutcome so;
        so.query = q;
        so.outcome = Outcome{agent, "code", {"conf"}, true, 0.1};
        outcomes.push_back(so);
      }
    auto flat = SkillOutcomeStore::from_outcomes(outcomes);
    CHECK(find_split_candidates(h, flat, {}).empty());
  }
  SUBCASE("too few distinct queries produces no candidate") {
    SplitConfig cfg;
    cfg.min_queries = 7;  // store has exactly 6 distinct queries
    CHECK(find_split_candidates(h, store, cfg).empty());
  }
  SUBCASE("skills with children are not split again") {
    Handbook deep = h;
    deep.skills.push_back({"conf/done", "d", {"alpha"}, "code", std::string("conf")});
    deep.edges["code"].push_back("conf/done");
    CHECK(find_split_candidates(deep, store, {}).empty());
  }
}

TEST_CASE("merge candidates require indistinguishability with real evidence") {
  SUBCASE("12/20 versus 8/20 cannot be told apart at the 5% level") {
    Handbook h = merge_book(12, 20, 8, 20);
    auto candidates = find_merge_candidates(h, {});
    REQUIRE(candidates.size() == 1);
    CHECK(candidates[0].kind == RefinementCandidate::Kind::merge);
    CHECK(candidates[0].targets == std::vector<std::string>{"s-x", "s-y"});
    CHECK(candidates[0].statistic == doctest::Approx(1.2649110640673513).epsilon(1e-12));
  }
  SUBCASE("18/20 versus 2/20 is clearly distinguishable") {
    Handbook h = merge_book(18, 20, 2, 20);
    CHECK(find_merge_candidates(h, {}).empty());
  }
  SUBCASE("insufficient per-skill evidence keeps the pair out of the test") {
    Handbook h = merge_book(5, 9, 4, 9);  // 9 < min_obs = 10
    CHECK(find_merge_candidates(h, {}).empty());
  }
  SUBCASE("skills in different modes or parent slots never pair") {
    Handbook h = merge_book(12, 20, 8, 20);
    h.modes.push_back({"other", {}, {"a1"}});
    h.skills.push_back({"s-z", "z", {"zz"}, "other", {}});
    h.edges["other"] = {"s-z"};
    auto candidates = find_merge_candidates(h, {});
    REQUIRE(candidates.size() == 1);  // still only the (s-x, s-y) pair

    Handbook nested = merge_book(12, 20, 8, 20);
    nested.skills.push_back({"s-p", "p", {"pp"}, "m", {}});
    nested.edges["m"].push_back("s-p");
    nested.skills[0].parent = "s-p";  // s-x becomes a child, s-y stays top-level
    auto c2 = find_merge_candidates(nested, {});
    CHECK(c2.empty());
  }
  SUBCASE("one distinguishing agent vetoes the merge") {
    Handbook h = merge_book(12, 20, 8, 20);
    h.modes[0].allowed_agents.push_back("a2");
    AgentProfile sharp{"a2", "m", "", {}, {0.1, 4}, {}};
    sharp.counters["s-x"] = {19.0, 3.0};  // 18/20
    sharp.counters["s-y"] = {3.0, 19.0};  // 2/20
    h.profiles.push_back(sharp);
    CHECK(find_merge_candidates(h, {}).empty());
  }
}

TEST_CASE("merges pool evidence minus the duplicated prior") {
  Handbook h = merge_book(3, 5, 3, 5);  // s-x Beta(4,3), s-y Beta(4,3)
  RefinementCandidate c;
  c.kind = RefinementCandidate::Kind::merge;
  c.mode = "m";
  c.targets = {"s-x", "s-y"};
  AutoApproveReviewer auto_ok;
  std::vector<RefinementCandidate> cs{c};
  RefinementResult r = apply_refinements(h, cs, auto_ok);
  REQUIRE(r.applied.size() == 1);
  CHECK(r.rejected.empty());
  CHECK(r.handbook.version == h.version + 1);
  CHECK(validate(r.handbook).empty());
  CHECK(find_skill(r.handbook, "s-y") == nullptr);
  const Skill* merged = find_skill(r.handbook, "s-x");  // min id survives
  REQUIRE(merged != nullptr);
  CHECK(merged->indicators == std::vector<std::string>{"xx", "yy"});
  const AgentProfile* p = find_profile(r.handbook, "a1", "m");
  CHECK(p->counters.at("s-x").alpha == 7.0);  // 4 + 4 - 1
  CHECK(p->counters.at("s-x").beta == 5.0);   // 3 + 3 - 1
  // Observed count is conserved exactly: 5 + 5 = 10.
  CHECK(observed(p->counters.at("s-x")) == 10.0);
  CHECK(p->counters.count("s-y") == 0);

  SUBCASE("a reviewer can rename the merged skill") {
    class Renamer : public RefinementReviewer {
     public:
      ReviewDecision review(const RefinementCandidate&, const Handbook&) override {
        ReviewDecision d;
        d.merged_id = "s-pooled";
        return d;
      }
      std::string name() const override { return "renamer"; }
    } renamer;
    std::vector<RefinementCandidate> again{c};
    RefinementResult r2 = apply_refinements(h, again, renamer);
    REQUIRE(r2.applied.size() == 1);
    CHECK(find_skill(r2.handbook, "s-pooled") != nullptr);
    CHECK(find_skill(r2.handbook, "s-x") == nullptr);
    CHECK(find_skill(r2.handbook, "s-y") == nullptr);
  }
  SUBCASE("agents holding only one of the two skills still pool correctly") {
    Handbook h2 = h;
    h2.modes[0].allowed_agents.push_back("a2");
    AgentProfile half{"a2", "m", "", {}, {0.1, 1}, {}};
    half.counters["s-y"] = {6.0, 2.0};  // only the dropped skill
    h2.profiles.push_back(half);
    std::vector<RefinementCandidate> once{c};
    RefinementResult r3 = apply_refinements(h2, once, auto_ok);
    const AgentProfile* pa2 = find_profile(r3.handbook, "a2", "m");
    // Pooled with the absent skill's implicit prior: (6+1-1, 2+1-1).
    CHECK(pa2->counters.at("s-x").alpha == 6.0);
    CHECK(pa2->counters.at("s-x").beta == 2.0);
    CHECK(observed(pa2->counters.at("s-x")) == 6.0);
  }
  SUBCASE("a rejecting reviewer leaves the handbook unchanged except the version") {
    RejectingReviewer nope;
    std::vector<RefinementCandidate> once{c};
    RefinementResult r4 = apply_refinements(h, once, nope);
    CHECK(r4.applied.empty());
    REQUIRE(r4.rejected.size() == 1);
    CHECK(r4.rejected[0].find("not convinced") != std::string::npos);
    CHECK(find_skill(r4.handbook, "s-y") != nullptr);
    CHECK(r4.handbook.version == h.version + 1);
  }
  SUBCASE("missing targets are rejected with a diagnostic") {
    RefinementCandidate ghost = c;
    ghost.targets = {"s-x", "s-ghost"};
    std::vector<RefinementCandidate> once{ghost};
    RefinementResult r5 = apply_refinements(h, once, auto_ok);
    CHECK(r5.applied.empty());
    REQUIRE(r5.rejected.size() == 1);
    CHECK(r5.rejected[0].find("target skill missing") != std::string::npos);
  }
}

TEST_CASE("splits hand each child its partition's evidence plus a fresh prior") {
  Handbook h = confounded_book();
  SkillOutcomeStore store = confounded_store();
  auto candidates = find_split_candidates(h, store, {});
  REQUIRE(candidates.size() == 1);
  AutoApproveReviewer auto_ok;
  RefinementResult r = apply_refinements(h, candidates, auto_ok);
  REQUIRE(r.applied.size() == 1);
  CHECK(r.handbook.version == h.version + 1);
  CHECK(validate(r.handbook).empty());

  const Skill* child_a = find_skill(r.handbook, "conf/alpha");
  const Skill* child_b = find_skill(r.handbook, "conf/beta");
  REQUIRE(child_a != nullptr);
  REQUIRE(child_b != nullptr);
  CHECK(child_a->parent == std::optional<std::string>("conf"));
  CHECK(child_a->indicators.front() == "alpha");
  CHECK(child_b->indicators.front() == "beta");
  CHECK(find_skill(r.handbook, "conf") != nullptr);  // parent skill remains

  const AgentProfile* p1 = find_profile(r.handbook, "a1", "code");
  CHECK(p1->counters.count("conf") == 0);  // parent evidence retired
  CHECK(p1->counters.at("conf/alpha").alpha == 4.0);  // prior + 3 successes
  CHECK(p1->counters.at("conf/alpha").beta == 1.0);
  CHECK(p1->counters.at("conf/beta").alpha == 1.0);
  CHECK(p1->counters.at("conf/beta").beta == 4.0);  // prior + 3 failures
  const AgentProfile* p2 = find_profile(r.handbook, "a2", "code");
  CHECK(p2->counters.at("conf/alpha").beta == 4.0);
  CHECK(p2->counters.at("conf/beta").alpha == 4.0);
  // Observed counts conserved: each agent had 6 observations on the parent.
  for (const AgentProfile* p : {p1, p2})
    CHECK(observed(p->counters.at("conf/alpha")) +
              observed(p->counters.at("conf/beta")) ==
          6.0);

  SUBCASE("the children are then eligible merge partners (same parent)") {
    // With identical tallies they'd be indistinguishable; here they are
    // maximally different, so no merge fires — checking the pairing rule.
    auto merges = find_merge_candidates(r.handbook, MergeConfig{0.05, 3});
    CHECK(merges.empty());  // distinguishable (perfect vs zero)
  }
  SUBCASE("conflicting candidates in one pass are rejected, not misapplied") {
    std::vector<RefinementCandidate> twice{candidates[0], candidates[0]};
    RefinementResult r2 = apply_refinements(h, twice, auto_ok);
    CHECK(r2.applied.size() == 1);
    REQUIRE(r2.rejected.size() == 1);
    CHECK(r2.rejected[0].find("conflicts") != std::string::npos);
    CHECK(r2.handbook.version == h.version + 1);  // still one bump
  }
  SUBCASE("a reviewer can rename the children") {
    class ChildNamer : public RefinementReviewer {
     public:
      ReviewDecision review(const RefinementCandidate&, const Handbook&) override {
        ReviewDecision d;
        d.child_ids = {std::string("conf/tables"), std::string("conf/plots")};
        return d;
      }
      std::string name() const override { return "namer"; }
    } namer;
    RefinementResult r3 = apply_refinements(h, candidates, namer);
    CHECK(find_skill(r3.handbook, "conf/tables") != nullptr);
    CHECK(find_skill(r3.handbook, "conf/plots") != nullptr);
  }
  SUBCASE("child id collisions are rejected") {
    Handbook taken = h;
    taken.skills.push_back({"conf/alpha", "d", {"alpha"}, "code", std::string("conf")});
    taken.edges["code"].push_back("conf/alpha");
    RefinementResult r4 = apply_refinements(taken, candidates, auto_ok);
    CHECK(r4.applied.empty());
    REQUIRE(r4.rejected.size() == 1);
    CHECK(r4.rejected[0].find("collide") != std::string::npos);
  }
}
