#pragma once
// Canonical JSON persistence for handbooks, plus the strict field helpers
// shared by every reader in the project. Canonical means: UTF-8, keys
// sorted, two-space indent, trailing newline, floats printed with the
// shortest round-trip representation. Equal handbooks serialize to equal
// bytes, so files can be diffed and content-hashed.

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "handbook.hpp"

namespace skillbook {

using json = nlohmann::json;

namespace jsonio {

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
}

// Strict key policy: every required key present, nothing outside
// required + optional tolerated. Unknown fields are data errors, not noise.
inline void expect_keys(const json& j, const std::string& path,
                        std::initializer_list<const char*> required,
                        std::initializer_list<const char*> optional = {}) {
  expect_object(j, path);
  std::set<std::string> allowed;
  for (const char* k : required) {
    if (!j.contains(k)) throw SchemaError(path, std::string("missing key: ") + k);
    allowed.insert(k);
  }
  for (const char* k : optional) allowed.insert(k);
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw SchemaError(path + "." + key, "unknown key");
}

inline std::string get_string(const json& j, const std::string& path, const char* key) {
  const json& v = j.at(key);
  if (!v.is_string()) throw SchemaError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

inline double get_number(const json& j, const std::string& path, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number()) throw SchemaError(path + "." + key, "expected a number");
  return v.get<double>();
}

inline std::uint64_t get_uint(const json& j, const std::string& path, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw SchemaError(path + "." + key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline bool get_bool(const json& j, const std::string& path, const char* key) {
  const json& v = j.at(key);
  if (!v.is_boolean()) throw SchemaError(path + "." + key, "expected a boolean");
  return v.get<bool>();
}

inline std::vector<std::string> get_string_array(const json& j, const std::string& path,
                                                 const char* key) {
  const json& v = j.at(key);
  if (!v.is_array()) throw SchemaError(path + "." + key, "expected an array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string())
      throw SchemaError(path + "." + key + "[" + std::to_string(i) + "]",
                        "expected a string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

inline json parse(const std::string& text, const std::string& path) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw SchemaError(path, "malformed JSON");
  return j;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EnvironmentError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EnvironmentError("cannot write file: " + path);
  out << bytes;
  if (!out) throw EnvironmentError("short write: " + path);
}

}  // namespace jsonio

inline json handbook_to_json(const Handbook& h) {
  json j;
  j["version"] = h.version;
  j["provenance"] = h.provenance;
  j["modes"] = json::array();
  for (const auto& m : h.modes) {
    json jm;
    jm["mode"] = m.mode;
    jm["insights"] = m.insights;
    jm["allowed_agents"] = m.allowed_agents;
    j["modes"].push_back(jm);
  }
  j["skills"] = json::array();
  for (const auto& s : h.skills) {
    json js;
    js["id"] = s.id;
    js["description"] = s.description;
    js["indicators"] = s.indicators;
    js["mode"] = s.mode;
    js["parent"] = s.parent ? json(*s.parent) : json(nullptr);
    j["skills"].push_back(js);
  }
  j["profiles"] = json::array();
  for (const auto& p : h.profiles) {
    json jp;
    jp["agent_id"] = p.agent_id;
    jp["mode"] = p.mode;
    jp["summary"] = p.summary;
    jp["counters"] = json::object();
    for (const auto& [sid, c] : p.counters)
      jp["counters"][sid] = json{{"alpha", c.alpha}, {"beta", c.beta}};
    jp["cost_stats"] = json{{"count", p.cost_stats.count}, {"mean", p.cost_stats.mean}};
    jp["routing_signals"] = p.routing_signals;
    j["profiles"].push_back(jp);
  }
  j["edges"] = json::object();
  for (const auto& [mode, skill_list] : h.edges) j["edges"][mode] = skill_list;
  return j;
}

inline Handbook handbook_from_json(const json& j) {
  jsonio::expect_keys(j, "$",
                      {"version", "provenance", "modes", "skills", "profiles", "edges"});
  Handbook h;
  h.version = jsonio::get_uint(j, "$", "version");
  h.provenance = jsonio::get_string(j, "$", "provenance");

  if (!j.at("modes").is_array()) throw SchemaError("$.modes", "expected an array");
  for (std::size_t i = 0; i < j["modes"].size(); ++i) {
    const json& jm = j["modes"][i];
    const std::string path = "$.modes[" + std::to_string(i) + "]";
    jsonio::expect_keys(jm, path, {"mode", "insights", "allowed_agents"});
    ModeMetadata m;
    m.mode = jsonio::get_string(jm, path, "mode");
    m.insights = jsonio::get_string_array(jm, path, "insights");
    m.allowed_agents = jsonio::get_string_array(jm, path, "allowed_agents");
    h.modes.push_back(std::move(m));
  }

  if (!j.at("skills").is_array()) throw SchemaError("$.skills", "expected an array");
  for (std::size_t i = 0; i < j["skills"].size(); ++i) {
    const json& js = j["skills"][i];
    const std::string path = "$.skills[" + std::to_string(i) + "]";
    jsonio::expect_keys(js, path, {"id", "description", "indicators", "mode", "parent"});
    Skill s;
    s.id = jsonio::get_string(js, path, "id");
    s.description = jsonio::get_string(js, path, "description");
    s.indicators = jsonio::get_string_array(js, path, "indicators");
    s.mode = jsonio::get_string(js, path, "mode");
    const json& parent = js.at("parent");
    if (parent.is_string())
      s.parent = parent.get<std::string>();
    else if (!parent.is_null())
      throw SchemaError(path + ".parent", "expected a string or null");
    h.skills.push_back(std::move(s));
  }

  if (!j.at("profiles").is_array()) throw SchemaError("$.profiles", "expected an array");
  for (std::size_t i = 0; i < j["profiles"].size(); ++i) {
    const json& jp = j["profiles"][i];
    const std::string path = "$.profiles[" + std::to_string(i) + "]";
    jsonio::expect_keys(
        jp, path,
        {"agent_id", "mode", "summary", "counters", "cost_stats", "routing_signals"});
    AgentProfile p;
    p.agent_id = jsonio::get_string(jp, path, "agent_id");
    p.mode = jsonio::get_string(jp, path, "mode");
    p.summary = jsonio::get_string(jp, path, "summary");
    jsonio::expect_object(jp.at("counters"), path + ".counters");
    for (const auto& [sid, jc] : jp.at("counters").items()) {
      const std::string cpath = path + ".counters." + sid;
      jsonio::expect_keys(jc, cpath, {"alpha", "beta"});
      BetaCounter c;
      c.alpha = jsonio::get_number(jc, cpath, "alpha");
      c.beta = jsonio::get_number(jc, cpath, "beta");
      p.counters.emplace(sid, c);
    }
    const std::string spath = path + ".cost_stats";
    jsonio::expect_keys(jp.at("cost_stats"), spath, {"count", "mean"});
    p.cost_stats.count = jsonio::get_uint(jp.at("cost_stats"), spath, "count");
    p.cost_stats.mean = jsonio::get_number(jp.at("cost_stats"), spath, "mean");
    p.routing_signals = jsonio::get_string_array(jp, path, "routing_signals");
    h.profiles.push_back(std::move(p));
  }

  jsonio::expect_object(j.at("edges"), "$.edges");
  for (const auto& [mode, jlist] : j.at("edges").items()) {
    if (!jlist.is_array()) throw SchemaError("$.edges." + mode, "expected an array");
    std::vector<std::string> skill_list;
    for (const auto& jid : jlist) {
      if (!jid.is_string()) throw SchemaError("$.edges." + mode, "expected string ids");
      skill_list.push_back(jid.get<std::string>());
    }
    h.edges.emplace(mode, std::move(skill_list));
  }

  auto violations = validate(h);
  if (!violations.empty()) {
    std::string msg = "handbook failed validation";
    for (const auto& v : violations) msg += "\n  " + v.path + ": " + v.message;
    throw DataError(msg);
  }
  return h;
}

// Canonical byte encoding of a handbook.
inline std::string dump_handbook(const Handbook& h) {
  require_valid(h, "dump_handbook");
  return handbook_to_json(h).dump(2) + "\n";
}

inline void save_handbook(const Handbook& h, const std::string& path) {
  jsonio::write_file(path, dump_handbook(h));
}

inline Handbook load_handbook(const std::string& path) {
  return handbook_from_json(jsonio::parse(jsonio::read_file(path), path));
}

}  // namespace skillbook
