#pragma once
// HTTP gateway: run steps against real agent endpoints, and source mode
// decisions, skill proposals, and refinement reviews from external
// services. Three rules hold everywhere:
//
//   1. Costs normalize to reference units (raw cost / reference_cost), so
//      heterogeneous providers land on one scale.
//   2. Remote failures are typed — timeout, transport, malformed — and
//      surface as failed steps with a penalty cost. Never silent success.
//   3. External decision services get a bounded retry budget; exhausting
//      it falls back to the deterministic local implementation, logged.

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>

#include "learner.hpp"
#include "refiner.hpp"
#include "router.hpp"

namespace skillbook {

struct AgentEndpoint {
  std::string agent_id;
  std::string base_url;          // e.g. "http://127.0.0.1:8700"
  std::string path = "/execute";
  int timeout_ms = 1000;
  double reference_cost = 1.0;   // raw units worth one normalized unit
  std::string auth_env;          // env var holding a bearer token, if any
};

enum class CallStatus { ok, timeout, transport, malformed };

inline std::string to_string(CallStatus s) {
  switch (s) {
    case CallStatus::ok: return "ok";
    case CallStatus::timeout: return "timeout";
    case CallStatus::transport: return "transport";
    case CallStatus::malformed: return "malformed";
  }
  return "?";
}

struct AgentCallResult {
  CallStatus status = CallStatus::ok;
  std::string trace;
  std::string observation;
  double normalized_cost = 0.0;
  std::optional<bool> success;
  std::string detail;  // diagnostic for non-ok statuses
};

namespace gateway_detail {

inline void apply_auth(httplib::Client& cli, const std::string& auth_env) {
  if (auth_env.empty()) return;
  const char* token = std::getenv(auth_env.c_str());
  if (token && *token)
    cli.set_default_headers({{"Authorization", std::string("Bearer ") + token}});
}

inline void apply_timeouts(httplib::Client& cli, int timeout_ms) {
  const time_t sec = timeout_ms / 1000;
  const time_t usec = (timeout_ms % 1000) * 1000;
  cli.set_connection_timeout(sec, usec);
  cli.set_read_timeout(sec, usec);
  cli.set_write_timeout(sec, usec);
}

inline bool is_timeout(httplib::Error e) {
  return e == httplib::Error::ConnectionTimeout || e == httplib::Error::Read ||
         e == httplib::Error::Write;
}

inline json state_to_json(const InteractionState& state) {
  json js;
  js["query"] = state.query;
  js["turn"] = state.turn;
  js["history"] = json::array();
  for (const auto& h : state.history)
    js["history"].push_back(json{{"mode", h.mode},
                                 {"agent", h.agent},
                                 {"trace_digest", h.trace_digest},
                                 {"observation_digest", h.observation_digest}});
  return js;
}

}  // namespace gateway_detail

// One step against one remote agent. The response contract is
//   {"trace": str, "observation": str, "cost": number >= 0, "success": bool|null}
// with cost in the provider's raw units. Anything else is a typed failure.
inline AgentCallResult call_agent(const AgentEndpoint& endpoint, const std::string& mode,
                                  const InteractionState& state,
                                  const std::string& request_id,
                                  std::uint64_t episode_seed = 0) {
  if (endpoint.reference_cost <= 0.0)
    throw ConfigError("agent " + endpoint.agent_id + ": reference_cost must be positive");
  httplib::Client cli(endpoint.base_url);
  gateway_detail::apply_timeouts(cli, endpoint.timeout_ms);
  gateway_detail::apply_auth(cli, endpoint.auth_env);

  json req;
  req["request_id"] = request_id;
  req["agent_id"] = endpoint.agent_id;
  req["mode"] = mode;
  req["state"] = gateway_detail::state_to_json(state);
  req["episode_seed"] = episode_seed;  // replay token; agents may ignore

  AgentCallResult out;
  httplib::Result res = cli.Post(endpoint.path, req.dump(), "application/json");
  if (!res) {
    out.status = gateway_detail::is_timeout(res.error()) ? CallStatus::timeout
                                                         : CallStatus::transport;
    out.detail = httplib::to_string(res.error());
    return out;
  }
  if (res->status != 200) {
    out.status = CallStatus::transport;
    out.detail = "http status " + std::to_string(res->status);
    return out;
  }
  json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    out.status = CallStatus::malformed;
    out.detail = "response body is not a JSON object";
    return out;
  }
  try {
    jsonio::expect_keys(body, "response", {"trace", "observation", "cost"}, {"success"});
    out.trace = jsonio::get_string(body, "response", "trace");
    out.observation = jsonio::get_string(body, "response", "observation");
    const double raw = jsonio::get_number(body, "response", "cost");
    if (raw < 0.0) throw SchemaError("response.cost", "negative cost");
    out.normalized_cost = raw / endpoint.reference_cost;
    if (body.contains("success")) {
      if (body["success"].is_boolean())
        out.success = body["success"].get<bool>();
      else if (!body["success"].is_null())
        throw SchemaError("response.success", "expected a boolean or null");
    }
  } catch (const SchemaError& e) {
    out = AgentCallResult{};
    out.status = CallStatus::malformed;
    out.detail = e.what();
  }
  return out;
}

// Environment whose agents live behind HTTP. Failed calls become failed
// steps carrying `penalty_cost` normalized units, flagged in the step
// notes; rewards come from the optional judge endpoint (absent: 0 until
// judged offline).
class HttpEnvironment : public Environment {
 public:
  struct JudgeEndpoint {
    std::string base_url;
    std::string path = "/judge";
    int timeout_ms = 1000;
    std::string auth_env;
  };

  explicit HttpEnvironment(std::vector<AgentEndpoint> endpoints,
                           std::optional<JudgeEndpoint> judge = std::nullopt,
                           double penalty_cost = 1.0)
      : judge_(std::move(judge)), penalty_cost_(penalty_cost) {
    for (auto& e : endpoints) endpoints_.emplace(e.agent_id, std::move(e));
  }

  void begin_episode(const std::string& query, std::uint64_t episode_seed) override {
    (void)query;
    episode_seed_ = episode_seed;
  }

  StepResult execute(const InteractionState& state, const std::string& mode,
                     const std::string& agent_id) override {
    auto it = endpoints_.find(agent_id);
    if (it == endpoints_.end()) throw UnknownAgentError(agent_id);
    const std::string request_id =
        "req" + std::to_string(fnv1a(state.query + "|" + std::to_string(state.turn) + "|" +
                                     mode + "|" + agent_id));
    AgentCallResult r = call_agent(it->second, mode, state, request_id, episode_seed_);

    StepResult step;
    if (r.status == CallStatus::ok) {
      step.trace_digest = r.trace;
      step.observation_digest = r.observation;
      step.success = r.success;
      step.cost = r.normalized_cost;
      return step;
    }
    step.failed = true;
    step.failure_kind = to_string(r.status);
    step.success = false;
    step.cost = penalty_cost_;
    step.trace_digest = "gateway " + to_string(r.status) + " agent " + agent_id;
    step.observation_digest = "gateway " + to_string(r.status);
    event_log_.push_back("agent " + agent_id + " " + to_string(r.status) +
                         (r.detail.empty() ? "" : ": " + r.detail));
    return step;
  }

  double judge_reward(const std::string& query, const Trajectory& t) override {
    if (!judge_) return 0.0;
    httplib::Client cli(judge_->base_url);
    gateway_detail::apply_timeouts(cli, judge_->timeout_ms);
    gateway_detail::apply_auth(cli, judge_->auth_env);
    json req;
    req["query"] = query;
    req["steps"] = json::array();
    for (const auto& s : t.steps)
      req["steps"].push_back(json{{"mode", s.mode},
                                  {"agent", s.agent},
                                  {"success", s.success ? json(*s.success) : json(nullptr)},
                                  {"trace_digest", s.trace_digest}});
    httplib::Result res = cli.Post(judge_->path, req.dump(), "application/json");
    if (!res || res->status != 200)
      throw EnvironmentError("judge endpoint failed: " +
                             (res ? "http status " + std::to_string(res->status)
                                  : httplib::to_string(res.error())));
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("reward") ||
        !body["reward"].is_number())
      throw EnvironmentError("judge endpoint returned a malformed body");
    return body["reward"].get<double>();
  }

  const std::vector<std::string>& event_log() const { return event_log_; }

 private:
  std::map<std::string, AgentEndpoint> endpoints_;
  std::optional<JudgeEndpoint> judge_;
  double penalty_cost_;
  std::uint64_t episode_seed_ = 0;
  std::vector<std::string> event_log_;
};

// External decision services (mode policy, proposer, reviewer) share one
// call shape: POST a JSON payload, expect a JSON object back, retry up to
// `retries` extra times on any failure, then give up (caller falls back).
struct ExternalServiceConfig {
  std::string base_url;
  std::string path;
  int timeout_ms = 1000;
  int retries = 2;
  std::string auth_env;
};

inline std::optional<json> call_external(const ExternalServiceConfig& cfg,
                                         const json& payload,
                                         std::vector<std::string>* event_log) {
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    httplib::Client cli(cfg.base_url);
    gateway_detail::apply_timeouts(cli, cfg.timeout_ms);
    gateway_detail::apply_auth(cli, cfg.auth_env);
    httplib::Result res = cli.Post(cfg.path, payload.dump(), "application/json");
    std::string detail;
    if (res && res->status == 200) {
      json body = json::parse(res->body, nullptr, false);
      if (body.is_object()) return body;
      detail = "malformed body";
    } else {
      detail = res ? "http status " + std::to_string(res->status)
                   : httplib::to_string(res.error());
    }
    if (event_log)
      event_log->push_back(cfg.path + " attempt " + std::to_string(attempt + 1) +
                           " failed: " + detail);
  }
  return std::nullopt;
}

// Mode policy served over HTTP; falls back to the wrapped local policy
// when the service misbehaves past its retry budget or names an unknown
// mode.
class ExternalModePolicy : public ModePolicy {
 public:
  ExternalModePolicy(ExternalServiceConfig cfg, ModePolicy& fallback)
      : cfg_(std::move(cfg)), fallback_(fallback) {}

  std::string select(const InteractionState& state, const Handbook& handbook,
                     const ModePolicyContext& ctx) override {
    json payload;
    payload["role"] = "mode_policy";
    payload["state"] = gateway_detail::state_to_json(state);
    payload["max_turns"] = ctx.max_turns;
    payload["modes"] = json::array();
    for (const auto& m : handbook.modes)
      payload["modes"].push_back(json{{"mode", m.mode}, {"insights", m.insights}});
    auto body = call_external(cfg_, payload, &event_log_);
    if (body && body->contains("mode") && (*body)["mode"].is_string()) {
      const std::string mode = (*body)["mode"].get<std::string>();
      if (find_mode(handbook, mode)) return mode;
      event_log_.push_back("mode_policy returned unknown mode: " + mode);
    }
    event_log_.push_back("mode_policy fell back to " + fallback_.name());
    return fallback_.select(state, handbook, ctx);
  }

  std::string name() const override { return "external+" + fallback_.name(); }

  const std::vector<std::string>& event_log() const { return event_log_; }

 private:
  ExternalServiceConfig cfg_;
  ModePolicy& fallback_;
  std::vector<std::string> event_log_;
};

// Skill proposer served over HTTP, falling back to the deterministic
// baseline proposer. The response contract mirrors the Skill schema:
//   {"id", "description", "indicators", "mode", optional "parent"}.
class ExternalProposer : public SkillProposer {
 public:
  explicit ExternalProposer(ExternalServiceConfig cfg, int max_indicators = 8)
      : cfg_(std::move(cfg)), fallback_(max_indicators) {}

  std::optional<Skill> propose(const DiffCluster& cluster) override {
    json payload;
    payload["role"] = "proposer";
    payload["mode"] = cluster.mode;
    payload["tokens"] = std::vector<std::string>(cluster.tokens.begin(), cluster.tokens.end());
    payload["diffs"] = json::array();
    for (const auto& d : cluster.diffs)
      payload["diffs"].push_back(json{{"query", d.query},
                                      {"trace_pos", d.trace_pos},
                                      {"trace_neg", d.trace_neg},
                                      {"agent_pos", d.agent_pos},
                                      {"agent_neg", d.agent_neg}});
    auto body = call_external(cfg_, payload, &event_log_);
    if (body) {
      try {
        jsonio::expect_keys(*body, "proposal", {"id", "description", "indicators", "mode"},
                            {"parent"});
        Skill s;
        s.id = jsonio::get_string(*body, "proposal", "id");
        s.description = jsonio::get_string(*body, "proposal", "description");
        s.indicators = jsonio::get_string_array(*body, "proposal", "indicators");
        s.mode = jsonio::get_string(*body, "proposal", "mode");
        if (body->contains("parent") && (*body)["parent"].is_string())
          s.parent = (*body)["parent"].get<std::string>();
        if (s.id.empty() || s.indicators.empty())
          throw SchemaError("proposal", "empty id or indicators");
        return s;
      } catch (const SchemaError& e) {
        event_log_.push_back(std::string("proposer response rejected: ") + e.what());
      }
    }
    event_log_.push_back("proposer fell back to " + fallback_.name());
    return fallback_.propose(cluster);
  }

  std::string name() const override { return "external+baseline"; }

  const std::vector<std::string>& event_log() const { return event_log_; }

 private:
  ExternalServiceConfig cfg_;
  BaselineProposer fallback_;
  std::vector<std::string> event_log_;
};

// Refinement reviewer served over HTTP, falling back to auto-approve.
// Response contract: {"approve": bool, optional "note", "merged_id",
// "child_ids": [a, b]}.
class ExternalReviewer : public RefinementReviewer {
 public:
  explicit ExternalReviewer(ExternalServiceConfig cfg) : cfg_(std::move(cfg)) {}

  ReviewDecision review(const RefinementCandidate& candidate,
                        const Handbook& handbook) override {
    (void)handbook;
    json payload;
    payload["role"] = "reviewer";
    payload["kind"] =
        candidate.kind == RefinementCandidate::Kind::split ? "split" : "merge";
    payload["mode"] = candidate.mode;
    payload["targets"] = candidate.targets;
    payload["statistic"] = candidate.statistic;
    payload["note"] = candidate.note;
    auto body = call_external(cfg_, payload, &event_log_);
    if (body && body->contains("approve") && (*body)["approve"].is_boolean()) {
      ReviewDecision d;
      d.approve = (*body)["approve"].get<bool>();
      if (body->contains("note") && (*body)["note"].is_string())
        d.note = (*body)["note"].get<std::string>();
      if (body->contains("merged_id") && (*body)["merged_id"].is_string())
        d.merged_id = (*body)["merged_id"].get<std::string>();
      if (body->contains("child_ids") && (*body)["child_ids"].is_array() &&
          (*body)["child_ids"].size() == 2 && (*body)["child_ids"][0].is_string() &&
          (*body)["child_ids"][1].is_string())
        d.child_ids = {{(*body)["child_ids"][0].get<std::string>(),
                        (*body)["child_ids"][1].get<std::string>()}};
      return d;
    }
    event_log_.push_back("reviewer fell back to auto-approve");
    ReviewDecision d;
    d.note = "auto-approved after reviewer fallback";
    return d;
  }

  std::string name() const override { return "external+auto"; }

  const std::vector<std::string>& event_log() const { return event_log_; }

 private:
  ExternalServiceConfig cfg_;
  std::vector<std::string> event_log_;
};

}  // namespace skillbook
