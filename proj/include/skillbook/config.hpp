#pragma once
// Run configuration: defaults, overlaid by an optional config file (JSON,
// or a small TOML subset), overlaid by CLI flags. Unknown sections or keys
// are configuration errors — silent typos in experiment configs are worse
// than loud ones. The resolved configuration is content-hashed so reports
// can state exactly what they ran with.
//
// Supported TOML subset: comments, [section] headers, and key = value
// lines where value is a quoted string, integer, float, boolean, or a
// flat array of those. That covers experiment configs; anything fancier
// belongs in JSON.

#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "learner.hpp"
#include "refiner.hpp"
#include "router.hpp"

namespace skillbook {

namespace tomllite {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline json parse_scalar(const std::string& raw, const std::string& where) {
  const std::string v = trim(raw);
  if (v.empty()) throw ConfigError(where + ": empty value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw ConfigError(where + ": unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      char c = v[i];
      if (c == '\\') {
        if (i + 2 >= v.size()) throw ConfigError(where + ": dangling escape");
        char e = v[++i];
        if (e == '"' || e == '\\')
          out.push_back(e);
        else if (e == 'n')
          out.push_back('\n');
        else if (e == 't')
          out.push_back('\t');
        else
          throw ConfigError(where + ": unsupported escape \\" + std::string(1, e));
      } else {
        out.push_back(c);
      }
    }
    return json(out);
  }
  if (v == "true") return json(true);
  if (v == "false") return json(false);
  const bool floaty = v.find_first_of(".eE") != std::string::npos;
  try {
    std::size_t used = 0;
    if (floaty) {
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return json(d);
    }
    long long n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return json(n);
  } catch (const std::exception&) {
    throw ConfigError(where + ": cannot parse value '" + v + "'");
  }
}

// Splits a flat array body on commas that are outside quotes.
inline json parse_array(const std::string& body, const std::string& where) {
  json arr = json::array();
  std::string cur;
  bool in_string = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c == '"' && (i == 0 || body[i - 1] != '\\')) in_string = !in_string;
    if (c == ',' && !in_string) {
      if (!trim(cur).empty()) arr.push_back(parse_scalar(cur, where));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (in_string) throw ConfigError(where + ": unterminated string in array");
  if (!trim(cur).empty()) arr.push_back(parse_scalar(cur, where));
  return arr;
}

// Strips a trailing comment, respecting quoted strings.
inline std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

inline json parse(const std::string& text, const std::string& origin) {
  json root = json::object();
  json* section = &root;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = trim(strip_comment(text.substr(pos, eol - pos)));
    pos = eol + 1;
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line.empty()) {
      if (pos > text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty() || name.find('.') != std::string::npos)
        throw ConfigError(where + ": only flat [section] headers are supported");
      section = &root[name];
      if (!section->is_object()) *section = json::object();
      continue;
    }
    std::size_t eq = std::string::npos;
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_string = !in_string;
      if (line[i] == '=' && !in_string) {
        eq = i;
        break;
      }
    }
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (section->contains(key)) throw ConfigError(where + ": duplicate key " + key);
    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']') throw ConfigError(where + ": unterminated array");
      (*section)[key] = parse_array(value.substr(1, value.size() - 2), where);
    } else {
      (*section)[key] = parse_scalar(value, where);
    }
    if (pos > text.size()) break;
  }
  return root;
}

}  // namespace tomllite

// Everything a pipeline run reads, resolved and hashable.
struct RunConfig {
  RouterConfig router;
  LearnConfig learn;
  SplitConfig split;
  MergeConfig merge;
  InsightConfig insights;
  std::string config_hash;

  json to_json() const {
    json j;
    j["router"] = {{"lambda_c", router.lambda_c},
                   {"retrieval_k", router.retrieval_k},
                   {"retrieval_threshold", router.retrieval_threshold},
                   {"max_turns", router.max_turns}};
    j["learn"] = {{"success_threshold", learn.success_threshold},
                  {"cluster_jaccard", learn.cluster_jaccard},
                  {"dedup_jaccard", learn.dedup_jaccard},
                  {"max_indicators", learn.max_indicators},
                  {"labels",
                   learn.labels == LearnConfig::Labels::step ? "step" : "trajectory"}};
    j["refine"] = {{"split_min_queries", split.min_queries},
                   {"split_gap_threshold", split.gap_threshold},
                   {"merge_alpha", merge.alpha},
                   {"merge_min_obs", merge.min_obs}};
    j["insights"] = {{"min_support", insights.min_support},
                     {"min_frequency", insights.min_frequency}};
    return j;
  }
};

namespace config_detail {

inline double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

inline int as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return static_cast<int>(v.get<long long>());
}

inline std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected a string");
  return v.get<std::string>();
}

inline void apply_section(RunConfig& cfg, const std::string& name, const json& body) {
  auto unknown = [&](const std::string& key) {
    throw ConfigError("config: unknown key " + name + "." + key);
  };
  if (!body.is_object()) throw ConfigError("config: section " + name + " must be a table");
  if (name == "router") {
    for (const auto& [key, v] : body.items()) {
      const std::string where = "config: router." + key;
      if (key == "lambda_c")
        cfg.router.lambda_c = as_number(v, where);
      else if (key == "retrieval_k")
        cfg.router.retrieval_k = as_int(v, where);
      else if (key == "retrieval_threshold")
        cfg.router.retrieval_threshold = as_number(v, where);
      else if (key == "max_turns")
        cfg.router.max_turns = as_int(v, where);
      else
        unknown(key);
    }
  } else if (name == "learn") {
    for (const auto& [key, v] : body.items()) {
      const std::string where = "config: learn." + key;
      if (key == "success_threshold")
        cfg.learn.success_threshold = as_number(v, where);
      else if (key == "cluster_jaccard")
        cfg.learn.cluster_jaccard = as_number(v, where);
      else if (key == "dedup_jaccard")
        cfg.learn.dedup_jaccard = as_number(v, where);
      else if (key == "max_indicators")
        cfg.learn.max_indicators = as_int(v, where);
      else if (key == "labels") {
        const std::string labels = as_string(v, where);
        if (labels == "trajectory")
          cfg.learn.labels = LearnConfig::Labels::trajectory;
        else if (labels == "step")
          cfg.learn.labels = LearnConfig::Labels::step;
        else
          throw ConfigError(where + ": expected 'trajectory' or 'step'");
      } else
        unknown(key);
    }
  } else if (name == "refine") {
    for (const auto& [key, v] : body.items()) {
      const std::string where = "config: refine." + key;
      if (key == "split_min_queries")
        cfg.split.min_queries = as_int(v, where);
      else if (key == "split_gap_threshold")
        cfg.split.gap_threshold = as_number(v, where);
      else if (key == "merge_alpha")
        cfg.merge.alpha = as_number(v, where);
      else if (key == "merge_min_obs")
        cfg.merge.min_obs = as_number(v, where);
      else
        unknown(key);
    }
  } else if (name == "insights") {
    for (const auto& [key, v] : body.items()) {
      const std::string where = "config: insights." + key;
      if (key == "min_support")
        cfg.insights.min_support = as_int(v, where);
      else if (key == "min_frequency")
        cfg.insights.min_frequency = as_number(v, where);
      else
        unknown(key);
    }
  } else {
    throw ConfigError("config: unknown section [" + name + "]");
  }
}

}  // namespace config_detail

inline std::string config_hash_of(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(cfg.to_json().dump())));
  return buf;
}

// Loads a config file (TOML subset or JSON, by extension or content) onto
// the defaults. Empty path: pure defaults. The retrieval/learning knobs are
// kept in sync where both layers read them.
inline RunConfig load_run_config(const std::string& path) {
  RunConfig cfg;
  if (!path.empty()) {
    const std::string text = jsonio::read_file(path);
    json root;
    const bool looks_json = path.size() > 5 && path.substr(path.size() - 5) == ".json";
    if (looks_json || (!text.empty() && tomllite::trim(text).front() == '{'))
      root = jsonio::parse(text, path);
    else
      root = tomllite::parse(text, path);
    if (!root.is_object()) throw ConfigError("config: top level must be a table");
    for (const auto& [name, body] : root.items())
      config_detail::apply_section(cfg, name, body);
  }
  cfg.learn.retrieval_k = cfg.router.retrieval_k;
  cfg.learn.retrieval_threshold = cfg.router.retrieval_threshold;
  cfg.config_hash = config_hash_of(cfg);
  return cfg;
}

}  // namespace skillbook
