#pragma once
// Trajectory records and their JSONL encoding, plus the in-flight
// interaction state the router and mode policies read. One trajectory is
// one episode: an ordered list of step records followed by a terminal
// record carrying the judged reward and the summed cost.

#include <span>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "serialize.hpp"

namespace skillbook {

// What a finished step looks like in the log. `active_skills` and
// `utilities` preserve the routing inputs so decisions can be audited and
// replayed; `notes` flags anything unusual (overrides, gateway failures).
struct StepRecord {
  int turn = 0;
  std::string mode;
  std::string agent;
  std::map<std::string, double> active_skills;  // skill id -> weight
  std::map<std::string, double> utilities;      // agent id -> score
  double cost = 0.0;
  std::string trace_digest;
  std::string observation_digest;
  std::optional<bool> success;
  std::optional<std::string> tie_break;
  std::vector<std::string> notes;
  std::uint64_t handbook_version = 0;

  bool operator==(const StepRecord&) const = default;
};

struct Trajectory {
  std::string id;
  std::string query;
  std::vector<StepRecord> steps;
  double reward = 0.0;
  double total_cost = 0.0;

  bool operator==(const Trajectory&) const = default;
};

// All trajectories sampled for one query; phase-1 learning diffs within a
// bundle so positives and negatives share the same task.
struct TrajectoryBundle {
  std::string query;
  std::vector<Trajectory> trajectories;

  bool operator==(const TrajectoryBundle&) const = default;
};

// What earlier steps left behind, as seen by mode policies and retrieval.
struct HistoryEntry {
  std::string mode;
  std::string agent;
  std::string trace_digest;
  std::string observation_digest;
  std::optional<bool> success;
  bool failed = false;  // infrastructure failure, distinct from task failure
};

struct InteractionState {
  std::string query;
  std::vector<HistoryEntry> history;
  int turn = 0;
};

inline json step_to_json(const Trajectory& t, const StepRecord& s) {
  json j;
  j["trajectory_id"] = t.id;
  j["turn"] = s.turn;
  j["mode"] = s.mode;
  j["agent"] = s.agent;
  j["active_skills"] = s.active_skills;
  j["utilities"] = s.utilities;
  j["cost"] = s.cost;
  j["trace_digest"] = s.trace_digest;
  j["observation_digest"] = s.observation_digest;
  j["success"] = s.success ? json(*s.success) : json(nullptr);
  j["tie_break"] = s.tie_break ? json(*s.tie_break) : json(nullptr);
  j["notes"] = s.notes;
  j["handbook_version"] = s.handbook_version;
  return j;
}

// JSONL encoding: one JSON object per line; a trajectory is its step lines
// in turn order followed by a terminal line (the one carrying "reward").
inline std::string dump_trajectories(std::span<const Trajectory> trajectories) {
  std::string out;
  std::set<std::string> seen;
  for (const auto& t : trajectories) {
    if (t.id.empty()) throw DataError("trajectory with empty id");
    if (!seen.insert(t.id).second) throw DataError("duplicate trajectory id: " + t.id);
    for (const auto& s : t.steps) out += step_to_json(t, s).dump() + "\n";
    json terminal;
    terminal["trajectory_id"] = t.id;
    terminal["query"] = t.query;
    terminal["reward"] = t.reward;
    terminal["total_cost"] = t.total_cost;
    out += terminal.dump() + "\n";
  }
  return out;
}

inline void write_trajectories(std::span<const Trajectory> trajectories,
                               const std::string& path) {
  jsonio::write_file(path, dump_trajectories(trajectories));
}

inline std::vector<Trajectory> parse_trajectories(const std::string& text,
                                                  const std::string& origin) {
  std::vector<Trajectory> out;
  std::map<std::string, std::size_t> index;  // id -> slot in `out`
  std::set<std::string> closed;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    json j = jsonio::parse(line, where);
    jsonio::expect_object(j, where);
    const std::string id = jsonio::get_string(j, where, "trajectory_id");
    if (j.contains("reward")) {
      jsonio::expect_keys(j, where, {"trajectory_id", "query", "reward", "total_cost"});
      auto it = index.find(id);
      if (it == index.end()) {
        index[id] = out.size();
        out.push_back(Trajectory{id, "", {}, 0.0, 0.0});
        it = index.find(id);
      }
      if (!closed.insert(id).second)
        throw SchemaError(where, "duplicate terminal record for trajectory " + id);
      Trajectory& t = out[it->second];
      t.query = jsonio::get_string(j, where, "query");
      t.reward = jsonio::get_number(j, where, "reward");
      t.total_cost = jsonio::get_number(j, where, "total_cost");
      continue;
    }
    jsonio::expect_keys(j, where,
                        {"trajectory_id", "turn", "mode", "agent", "active_skills",
                         "utilities", "cost", "trace_digest", "observation_digest",
                         "success", "tie_break", "notes", "handbook_version"});
    if (closed.count(id))
      throw SchemaError(where, "step after terminal record for trajectory " + id);
    auto it = index.find(id);
    if (it == index.end()) {
      index[id] = out.size();
      out.push_back(Trajectory{id, "", {}, 0.0, 0.0});
      it = index.find(id);
    }
    Trajectory& t = out[it->second];
    StepRecord s;
    s.turn = static_cast<int>(jsonio::get_uint(j, where, "turn"));
    if (s.turn != static_cast<int>(t.steps.size()))
      throw SchemaError(where, "steps of trajectory " + id + " out of order");
    s.mode = jsonio::get_string(j, where, "mode");
    s.agent = jsonio::get_string(j, where, "agent");
    for (const auto& [k, v] : j.at("active_skills").items()) {
      if (!v.is_number()) throw SchemaError(where + ".active_skills", "expected numbers");
      s.active_skills[k] = v.get<double>();
    }
    for (const auto& [k, v] : j.at("utilities").items()) {
      if (!v.is_number()) throw SchemaError(where + ".utilities", "expected numbers");
      s.utilities[k] = v.get<double>();
    }
    s.cost = jsonio::get_number(j, where, "cost");
    s.trace_digest = jsonio::get_string(j, where, "trace_digest");
    s.observation_digest = jsonio::get_string(j, where, "observation_digest");
    if (j.at("success").is_boolean())
      s.success = j.at("success").get<bool>();
    else if (!j.at("success").is_null())
      throw SchemaError(where + ".success", "expected a boolean or null");
    if (j.at("tie_break").is_string())
      s.tie_break = j.at("tie_break").get<std::string>();
    else if (!j.at("tie_break").is_null())
      throw SchemaError(where + ".tie_break", "expected a string or null");
    s.notes = jsonio::get_string_array(j, where, "notes");
    s.handbook_version = jsonio::get_uint(j, where, "handbook_version");
    t.steps.push_back(std::move(s));
  }
  for (const auto& t : out)
    if (!closed.count(t.id))
      throw SchemaError(origin, "trajectory " + t.id + " has no terminal record");
  return out;
}

inline std::vector<Trajectory> read_trajectories(const std::string& path) {
  return parse_trajectories(jsonio::read_file(path), path);
}

// Bundle index file: one {"query", "trajectory_ids"} object per line,
// joined against a trajectory log on read.
inline std::string dump_bundle_index(std::span<const TrajectoryBundle> bundles) {
  std::string out;
  for (const auto& b : bundles) {
    json j;
    j["query"] = b.query;
    std::vector<std::string> ids;
    for (const auto& t : b.trajectories) ids.push_back(t.id);
    j["trajectory_ids"] = ids;
    out += j.dump() + "\n";
  }
  return out;
}

inline void write_bundles(std::span<const TrajectoryBundle> bundles,
                          const std::string& bundles_path,
                          const std::string& trajectories_path) {
  std::vector<Trajectory> flat;
  for (const auto& b : bundles)
    for (const auto& t : b.trajectories) flat.push_back(t);
  write_trajectories(flat, trajectories_path);
  jsonio::write_file(bundles_path, dump_bundle_index(bundles));
}

inline std::vector<TrajectoryBundle> read_bundles(const std::string& bundles_path,
                                                  const std::string& trajectories_path) {
  std::vector<Trajectory> flat = read_trajectories(trajectories_path);
  std::map<std::string, const Trajectory*> by_id;
  for (const auto& t : flat) by_id[t.id] = &t;

  std::vector<TrajectoryBundle> out;
  const std::string text = jsonio::read_file(bundles_path);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::string where = bundles_path + ":" + std::to_string(line_no);
    json j = jsonio::parse(line, where);
    jsonio::expect_keys(j, where, {"query", "trajectory_ids"});
    TrajectoryBundle b;
    b.query = jsonio::get_string(j, where, "query");
    for (const auto& id : jsonio::get_string_array(j, where, "trajectory_ids")) {
      auto it = by_id.find(id);
      if (it == by_id.end())
        throw DataError(where + ": bundle references unknown trajectory " + id);
      b.trajectories.push_back(*it->second);
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace skillbook
