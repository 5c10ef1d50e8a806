#pragma once
// Mode policies: who decides which mode the next step runs in. Routing is
// deliberately factored so the mode decision is pluggable — a rule table, a
// fixed script, or an external service — while agent selection stays the
// same cost-aware argmax underneath.

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"
#include "handbook.hpp"
#include "trajectory.hpp"

namespace skillbook {

struct ModePolicyContext {
  int max_turns = 4;
  std::uint64_t episode_seed = 0;
};

class ModePolicy {
 public:
  virtual ~ModePolicy() = default;
  virtual std::string select(const InteractionState& state, const Handbook& handbook,
                             const ModePolicyContext& ctx) = 0;
  virtual std::string name() const = 0;
};

struct ModeRule {
  std::string pattern;  // literal substring of the query text
  std::string mode;
};

// Picks the first still-unserved rule — by default in the order the
// patterns occur in the query text, or in table order when
// `by_query_position` is off. On the last turn it forces the terminal mode
// so every episode can end with an answer; when nothing applies it falls
// back to the default mode. With `retry_failed`, a rule whose step just
// failed is retried once before moving on.
class RuleModePolicy : public ModePolicy {
 public:
  RuleModePolicy(std::vector<ModeRule> rules, std::string default_mode,
                 std::string terminal_mode, bool retry_failed = false,
                 bool by_query_position = true)
      : rules_(std::move(rules)),
        default_mode_(std::move(default_mode)),
        terminal_mode_(std::move(terminal_mode)),
        retry_failed_(retry_failed),
        by_query_position_(by_query_position) {}

  std::string select(const InteractionState& state, const Handbook& handbook,
                     const ModePolicyContext& ctx) override {
    if (!terminal_mode_.empty() && ctx.max_turns > 0 && state.turn >= ctx.max_turns - 1)
      return terminal_mode_;

    if (retry_failed_ && !state.history.empty()) {
      const HistoryEntry& last = state.history.back();
      const bool last_ok = !last.failed && last.success.value_or(true);
      const bool already_retried =
          state.history.size() >= 2 &&
          state.history[state.history.size() - 2].mode == last.mode;
      if (!last_ok && last.mode != terminal_mode_ && !already_retried) return last.mode;
    }

    std::vector<std::pair<std::size_t, const ModeRule*>> matches;
    for (const auto& rule : rules_) {
      std::size_t at = state.query.find(rule.pattern);
      if (at != std::string::npos) matches.push_back({at, &rule});
    }
    if (by_query_position_)
      std::stable_sort(matches.begin(), matches.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [at, rule] : matches) {
      bool served = false;
      for (const auto& entry : state.history)
        if (entry.mode == rule->mode) served = true;
      if (!served) return rule->mode;
    }
    if (!default_mode_.empty()) return default_mode_;
    if (handbook.modes.empty()) throw DataError("mode policy: handbook has no modes");
    return handbook.modes.front().mode;
  }

  std::string name() const override { return "rules"; }

 private:
  std::vector<ModeRule> rules_;
  std::string default_mode_;
  std::string terminal_mode_;
  bool retry_failed_;
  bool by_query_position_;
};

// Replays a fixed mode schedule; past the end it repeats the last entry.
// Useful for fixtures and for forcing degenerate episodes in tests.
class ScriptedModePolicy : public ModePolicy {
 public:
  explicit ScriptedModePolicy(std::vector<std::string> schedule)
      : schedule_(std::move(schedule)) {
    if (schedule_.empty()) throw ConfigError("scripted mode policy needs a schedule");
  }

  std::string select(const InteractionState& state, const Handbook&,
                     const ModePolicyContext&) override {
    std::size_t i = std::min<std::size_t>(state.turn, schedule_.size() - 1);
    return schedule_[i];
  }

  std::string name() const override { return "scripted"; }

 private:
  std::vector<std::string> schedule_;
};

}  // namespace skillbook
