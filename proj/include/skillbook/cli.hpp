#pragma once
// Command implementations behind the `skillbook` binary. Each command is a
// plain function over an Options struct so tests drive them in-process;
// the binary only parses flags and maps exceptions to exit codes:
//
//   0 success     2 configuration error     3 data error     4 environment error
//
// Every command writes deterministic artifacts under --out (reports never
// embed timestamps) and a machine-readable error.json + one stderr JSON
// line on failure.

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "metrics.hpp"
#include "selector.hpp"
#include "simulator.hpp"

namespace skillbook::cli {

struct Options {
  std::string out_dir;
  std::string config_path;
  std::string world_path;
  std::string handbook_path;
  std::string bundles_path;
  std::string trajectories_path;
  std::string queries_path;
  std::vector<std::string> eval_inputs;  // label=path pairs for `eval`
  std::uint64_t seed = 7;
  std::vector<double> lambdas;           // objective lambda(s); first is primary
  std::optional<double> lambda_c;        // overrides config
  std::optional<int> max_turns;          // overrides config
  int n_queries = 300;
  int samples = 4;       // trajectories per query during simulate
  int gen_queries = 0;   // synthesize queries instead of --queries
  std::string tag = "train";
  std::string policy = "needs";         // needs | phase
  std::string proposer = "baseline";    // baseline | oracle
  std::string baseline = "none";        // none | random | best
  std::string explore = "round_robin";  // round_robin | route
  bool dry_run = false;
};

namespace detail {

inline std::filesystem::path out_dir(const Options& opts) {
  if (opts.out_dir.empty()) throw ConfigError("--out is required");
  std::filesystem::path dir(opts.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw EnvironmentError("cannot create output directory: " + opts.out_dir);
  return dir;
}

inline RunConfig resolve_config(const Options& opts) {
  RunConfig cfg = load_run_config(opts.config_path);
  if (opts.lambda_c) cfg.router.lambda_c = *opts.lambda_c;
  if (opts.max_turns) cfg.router.max_turns = *opts.max_turns;
  cfg.learn.retrieval_k = cfg.router.retrieval_k;
  cfg.learn.retrieval_threshold = cfg.router.retrieval_threshold;
  cfg.config_hash = config_hash_of(cfg);
  return cfg;
}

inline sim::LatentWorld load_world_file(const Options& opts) {
  if (opts.world_path.empty()) throw ConfigError("--world is required for this command");
  json j = jsonio::parse(jsonio::read_file(opts.world_path), opts.world_path);
  if (j.is_object() && j.contains("agents"))
    return sim::world_from_json(j, opts.world_path);
  sim::WorldSpec spec = sim::spec_from_json(j, opts.world_path);
  const std::uint64_t seed = j.is_object() && j.contains("seed")
                                 ? jsonio::get_uint(j, opts.world_path, "seed")
                                 : derive_seed(opts.seed, "world");
  return sim::generate_world(spec, seed);
}

inline std::vector<double> lambdas(const Options& opts) {
  return opts.lambdas.empty() ? std::vector<double>{0.5} : opts.lambdas;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  jsonio::write_file(path.string(), j.dump(2) + "\n");
}

inline std::string num(double x) { return json(x).dump(); }

inline json summary_to_json(const EvalSummary& s) {
  json j;
  j["n_trajectories"] = s.n_trajectories;
  j["n_steps"] = s.n_steps;
  j["mean_reward"] = s.mean_reward;
  j["mean_total_cost"] = s.mean_total_cost;
  j["entropy_bits"] = s.entropy_bits;
  j["objective_by_lambda"] = json::object();
  for (const auto& [lambda, obj] : s.objective_by_lambda)
    j["objective_by_lambda"][num(lambda)] = obj;
  j["selection_share"] = s.selection_share;
  return j;
}

// Query texts for routing/selection: an explicit file wins; otherwise
// synthesize --gen-queries many from the world and record them next to the
// other artifacts so the run can be replayed.
inline std::vector<std::string> resolve_queries(const Options& opts,
                                                const sim::LatentWorld& world,
                                                const std::filesystem::path& dir) {
  if (!opts.queries_path.empty()) return sim::load_query_texts(opts.queries_path);
  if (opts.gen_queries > 0) {
    auto queries = sim::generate_queries(world, opts.gen_queries,
                                         derive_seed(opts.seed, "genq/" + opts.tag),
                                         opts.tag);
    sim::save_queries(queries, (dir / "queries.jsonl").string());
    std::vector<std::string> texts;
    for (const auto& q : queries) texts.push_back(q.text);
    return texts;
  }
  throw ConfigError("provide --queries FILE or --gen-queries N");
}

inline json base_report(const Options& opts, const std::string& command,
                        const RunConfig& cfg) {
  json j;
  j["command"] = command;
  j["seed"] = opts.seed;
  j["dry_run"] = opts.dry_run;
  j["config"] = cfg.to_json();
  j["config_hash"] = cfg.config_hash;
  return j;
}

}  // namespace detail

// simulate: generate a world (or load one), synthesize training queries,
// and — unless --dry-run — roll exploration episodes into trajectory
// bundles plus a bootstrap (version 0) handbook.
inline void run_simulate(const Options& opts) {
  const auto dir = detail::out_dir(opts);
  const RunConfig cfg = detail::resolve_config(opts);
  const sim::LatentWorld world = detail::load_world_file(opts);
  const Handbook handbook = sim::bootstrap_handbook(world);

  auto queries = sim::generate_queries(world, opts.n_queries,
                                       derive_seed(opts.seed, "queries/" + opts.tag),
                                       opts.tag);
  sim::save_world(world, (dir / "world.json").string());
  sim::save_queries(queries, (dir / "queries.jsonl").string());
  save_handbook(handbook, (dir / "handbook.json").string());

  json report = detail::base_report(opts, "simulate", cfg);
  report["world"] = {{"n_agents", world.agents.size()},
                     {"n_skills", world.skills.size()},
                     {"modes", world.spec.modes}};
  report["n_queries"] = opts.n_queries;
  report["samples"] = opts.samples;
  report["policy"] = opts.policy;
  report["explore"] = opts.explore;
  report["handbook_version_out"] = handbook.version;

  if (!opts.dry_run) {
    if (opts.samples < 1) throw ConfigError("--samples must be >= 1");
    sim::SimEnvironment env(world);
    RuleModePolicy policy = sim::make_tag_policy(world, opts.policy);
    RouterConfig rcfg = cfg.router;
    rcfg.mode_policy = &policy;
    rcfg.terminal_mode = world.terminal_mode();

    RoundRobinExplorer explorer(handbook);
    AgentOverride override;
    if (opts.explore == "round_robin")
      override = explorer.override();
    else if (opts.explore != "route")
      throw ConfigError("--explore must be round_robin or route");

    std::vector<TrajectoryBundle> bundles;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      TrajectoryBundle bundle;
      bundle.query = queries[i].text;
      for (int s = 0; s < opts.samples; ++s) {
        RouterConfig ecfg = rcfg;
        ecfg.episode_seed = derive_seed(
            opts.seed, "sim/" + opts.tag + "/" + std::to_string(i) + "/" + std::to_string(s));
        const std::string id =
            "t" + opts.tag + std::to_string(i) + "x" + std::to_string(s);
        bundle.trajectories.push_back(
            run_episode(queries[i].text, handbook, env, ecfg, id, override));
      }
      bundles.push_back(std::move(bundle));
    }
    write_bundles(bundles, (dir / "bundles.jsonl").string(),
                  (dir / "trajectories.jsonl").string());

    std::vector<Trajectory> flat;
    for (const auto& b : bundles)
      for (const auto& t : b.trajectories) flat.push_back(t);
    report["summary"] = detail::summary_to_json(summarize(flat, detail::lambdas(opts)));
  }
  detail::write_json(dir / "report.json", report);
}

// learn: mine contrastive diffs from bundles, propose and insert skills,
// rebuild competence profiles, distill insights. One version bump.
inline void run_learn(const Options& opts) {
  const auto dir = detail::out_dir(opts);
  const RunConfig cfg = detail::resolve_config(opts);
  if (opts.handbook_path.empty()) throw ConfigError("--handbook is required");
  if (opts.bundles_path.empty() || opts.trajectories_path.empty())
    throw ConfigError("--bundles and --trajectories are required");
  const Handbook handbook = load_handbook(opts.handbook_path);
  const auto bundles = read_bundles(opts.bundles_path, opts.trajectories_path);

  std::optional<sim::LatentWorld> world;
  std::unique_ptr<SkillProposer> proposer;
  if (opts.proposer == "oracle") {
    world = detail::load_world_file(opts);
    proposer = std::make_unique<OracleProposer>(*world);
  } else if (opts.proposer == "baseline") {
    proposer = std::make_unique<BaselineProposer>(cfg.learn.max_indicators);
  } else {
    throw ConfigError("--proposer must be oracle or baseline");
  }

  const auto diffs = mine_diffs(bundles, cfg.learn.success_threshold);
  const ProposalResult proposals = propose_skills(handbook, diffs, *proposer, cfg.learn);

  json report = detail::base_report(opts, "learn", cfg);
  report["proposer"] = proposer->name();
  report["n_bundles"] = bundles.size();
  report["n_diffs"] = diffs.size();
  report["proposals"] = json::array();
  for (const auto& s : proposals.proposals) report["proposals"].push_back(s.id);
  report["proposer_errors"] = proposals.errors;
  report["handbook_version_in"] = handbook.version;

  if (!opts.dry_run) {
    Handbook next = apply_proposals(handbook, proposals.proposals);
    next = build_profiles(next, bundles, cfg.learn);
    next = distill_insights(next, bundles, cfg.insights);
    // The pipeline is one stage from the outside: exactly one bump.
    next.version = handbook.version + 1;
    next.provenance = "learn(proposer=" + proposer->name() +
                      ", skills+=" + std::to_string(proposals.proposals.size()) +
                      ")@cfg:" + cfg.config_hash;
    save_handbook(next, (dir / "handbook.json").string());
    report["handbook_version_out"] = next.version;
    report["n_skills_total"] = next.skills.size();
  }
  detail::write_json(dir / "report.json", report);
}

// refine: detect split/merge candidates from outcome evidence, review, and
// apply them conservatively. One version bump.
inline void run_refine(const Options& opts) {
  const auto dir = detail::out_dir(opts);
  const RunConfig cfg = detail::resolve_config(opts);
  if (opts.handbook_path.empty()) throw ConfigError("--handbook is required");
  if (opts.bundles_path.empty() || opts.trajectories_path.empty())
    throw ConfigError("--bundles and --trajectories are required");
  const Handbook handbook = load_handbook(opts.handbook_path);
  const auto bundles = read_bundles(opts.bundles_path, opts.trajectories_path);

  const auto outcomes = extract_outcomes(handbook, bundles, cfg.learn);
  const auto store = SkillOutcomeStore::from_outcomes(outcomes);
  auto candidates = find_split_candidates(handbook, store, cfg.split);
  auto merges = find_merge_candidates(handbook, cfg.merge);
  candidates.insert(candidates.end(), merges.begin(), merges.end());

  json report = detail::base_report(opts, "refine", cfg);
  report["n_outcomes"] = outcomes.size();
  report["candidates"] = json::array();
  for (const auto& c : candidates)
    report["candidates"].push_back(
        json{{"kind", c.kind == RefinementCandidate::Kind::split ? "split" : "merge"},
             {"mode", c.mode},
             {"targets", c.targets},
             {"statistic", c.statistic},
             {"note", c.note}});
  report["handbook_version_in"] = handbook.version;

  if (!opts.dry_run) {
    AutoApproveReviewer reviewer;
    RefinementResult result = apply_refinements(handbook, candidates, reviewer);
    result.handbook.version = handbook.version + 1;
    result.handbook.provenance =
        "refine(applied=" + std::to_string(result.applied.size()) +
        ")@cfg:" + cfg.config_hash;
    save_handbook(result.handbook, (dir / "handbook.json").string());
    report["applied"] = result.applied;
    report["rejected"] = result.rejected;
    report["handbook_version_out"] = result.handbook.version;
  }
  detail::write_json(dir / "report.json", report);
}

// select: evaluate the variant grid on a query set, keep the Pareto
// frontier, pick the objective argmax at the primary lambda, and sweep the
// remaining lambdas over the frontier. One version bump on the winner.
inline void run_select(const Options& opts) {
  const auto dir = detail::out_dir(opts);
  const RunConfig cfg = detail::resolve_config(opts);
  if (opts.handbook_path.empty()) throw ConfigError("--handbook is required");
  const Handbook handbook = load_handbook(opts.handbook_path);
  const sim::LatentWorld world = detail::load_world_file(opts);
  const auto all_lambdas = detail::lambdas(opts);
  const double primary = all_lambdas.front();

  json report = detail::base_report(opts, "select", cfg);
  report["lambda"] = primary;
  report["handbook_version_in"] = handbook.version;

  if (opts.dry_run) {
    report["variants"] = json::array();
    for (const auto& v : enumerate_variants(handbook))
      report["variants"].push_back(v.descriptor.label());
    detail::write_json(dir / "report.json", report);
    return;
  }

  const auto queries = detail::resolve_queries(opts, world, dir);
  sim::SimEnvironment env(world);
  RuleModePolicy policy = sim::make_tag_policy(world, opts.policy);
  RouterConfig rcfg = cfg.router;
  rcfg.mode_policy = &policy;
  rcfg.terminal_mode = world.terminal_mode();

  SelectionResult result = select_handbook(handbook, queries, env, rcfg, primary,
                                           derive_seed(opts.seed, "select"));
  result.winner.handbook.provenance =
      "select(" + result.winner_label + ")@cfg:" + cfg.config_hash;
  save_handbook(result.winner.handbook, (dir / "handbook.json").string());

  std::set<std::string> frontier_labels;
  for (const auto& p : result.frontier) frontier_labels.insert(p.label);
  report["points"] = json::array();
  for (const auto& p : result.points)
    report["points"].push_back(json{{"label", p.label},
                                    {"mean_reward", p.mean_reward},
                                    {"mean_cost", p.mean_cost},
                                    {"objective", p.objective},
                                    {"on_frontier", frontier_labels.count(p.label) > 0}});
  report["frontier"] = json::array();
  for (const auto& p : result.frontier) report["frontier"].push_back(p.label);
  report["winner"] = result.winner_label;
  report["handbook_version_out"] = result.winner.handbook.version;

  // Frontier sweep: how the winner moves as cost pressure grows.
  report["sweep"] = json::array();
  for (double lambda : all_lambdas) {
    const EvaluationPoint* best = nullptr;
    for (const auto& p : result.frontier) {
      const double obj = p.mean_reward - lambda * p.mean_cost;
      if (!best || obj > best->mean_reward - lambda * best->mean_cost) best = &p;
    }
    report["sweep"].push_back(json{{"lambda", lambda},
                                   {"winner", best->label},
                                   {"mean_reward", best->mean_reward},
                                   {"mean_cost", best->mean_cost}});
  }
  detail::write_json(dir / "report.json", report);

  std::string csv = "label,mean_reward,mean_cost,objective,on_frontier,winner\n";
  for (const auto& p : result.points) {
    csv += p.label + "," + detail::num(p.mean_reward) + "," + detail::num(p.mean_cost) +
           "," + detail::num(p.objective) + "," +
           (frontier_labels.count(p.label) ? "1" : "0") + "," +
           (p.label == result.winner_label ? "1" : "0") + "\n";
  }
  jsonio::write_file((dir / "report.csv").string(), csv);
}

// route: run the router over a query set against the simulated world.
// --dry-run records the first routing decision per query without touching
// the environment; --baseline forces random / strongest-agent overrides
// for comparison logs.
inline void run_route(const Options& opts) {
  const auto dir = detail::out_dir(opts);
  const RunConfig cfg = detail::resolve_config(opts);
  if (opts.handbook_path.empty()) throw ConfigError("--handbook is required");
  const Handbook handbook = load_handbook(opts.handbook_path);
  const sim::LatentWorld world = detail::load_world_file(opts);
  const auto queries = detail::resolve_queries(opts, world, dir);

  RuleModePolicy policy = sim::make_tag_policy(world, opts.policy);
  RouterConfig rcfg = cfg.router;
  rcfg.mode_policy = &policy;
  rcfg.terminal_mode = world.terminal_mode();

  json report = detail::base_report(opts, "route", cfg);
  report["n_queries"] = queries.size();
  report["policy"] = opts.policy;
  report["baseline"] = opts.baseline;
  report["handbook_version"] = handbook.version;

  if (opts.dry_run) {
    std::string lines;
    for (const auto& query : queries) {
      InteractionState state{query, {}, 0};
      RoutingDecision d = route_step(state, handbook, rcfg);
      json j;
      j["query"] = query;
      j["mode"] = d.mode;
      j["active_skills"] = d.active_skills.entries;
      j["utilities"] = d.utilities;
      j["chosen"] = d.chosen;
      j["tie_break"] = d.tie_break ? json(*d.tie_break) : json(nullptr);
      j["notes"] = d.notes;
      lines += j.dump() + "\n";
    }
    jsonio::write_file((dir / "decisions.jsonl").string(), lines);
    detail::write_json(dir / "report.json", report);
    return;
  }

  sim::SimEnvironment env(world);
  AgentOverride override;
  if (opts.baseline == "best")
    override = fixed_agent_override(sim::strongest_agent(world));
  else if (opts.baseline == "random")
    override = random_agent_override(handbook, derive_seed(opts.seed, "baseline-random"));
  else if (opts.baseline != "none")
    throw ConfigError("--baseline must be none, random, or best");

  std::vector<Trajectory> trajectories;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    RouterConfig ecfg = rcfg;
    ecfg.episode_seed = derive_seed(opts.seed, "route/" + queries[i]);
    trajectories.push_back(run_episode(queries[i], handbook, env, ecfg,
                                       "r" + std::to_string(i), override));
  }
  write_trajectories(trajectories, (dir / "trajectories.jsonl").string());
  report["summary"] =
      detail::summary_to_json(summarize(trajectories, detail::lambdas(opts)));
  detail::write_json(dir / "report.json", report);
}

// eval: pure file-to-file measurement over labelled trajectory logs —
// summaries per set, paired-objective bootstrap comparisons where sets
// align, and a set-level Pareto CSV.
inline void run_eval(const Options& opts) {
  const auto dir = detail::out_dir(opts);
  const RunConfig cfg = detail::resolve_config(opts);
  if (opts.eval_inputs.empty())
    throw ConfigError("eval needs at least one --in label=path");
  const auto all_lambdas = detail::lambdas(opts);

  std::vector<std::pair<std::string, std::vector<Trajectory>>> sets;
  for (const auto& input : opts.eval_inputs) {
    const std::size_t eq = input.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= input.size())
      throw ConfigError("--in expects label=path, got: " + input);
    const std::string label = input.substr(0, eq);
    for (const auto& [existing, unused] : sets)
      if (existing == label) throw ConfigError("duplicate eval label: " + label);
    sets.push_back({label, read_trajectories(input.substr(eq + 1))});
  }

  json report = detail::base_report(opts, "eval", cfg);
  report["sets"] = json::object();
  for (const auto& [label, trajs] : sets)
    report["sets"][label] = detail::summary_to_json(summarize(trajs, all_lambdas));

  // Paired comparisons (by query order) whenever two sets are the same size.
  report["comparisons"] = json::array();
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      if (sets[i].second.size() != sets[j].second.size() || sets[i].second.empty())
        continue;
      json cmp;
      cmp["a"] = sets[i].first;
      cmp["b"] = sets[j].first;
      cmp["by_lambda"] = json::object();
      for (double lambda : all_lambdas) {
        auto ja = objective_samples(sets[i].second, lambda);
        auto jb = objective_samples(sets[j].second, lambda);
        std::vector<double> diff(ja.size());
        double mean = 0.0;
        for (std::size_t k = 0; k < ja.size(); ++k) {
          diff[k] = ja[k] - jb[k];
          mean += diff[k];
        }
        mean /= static_cast<double>(diff.size());
        auto [lo, hi] = bootstrap_ci_mean(
            diff, 2000, 0.95,
            derive_seed(opts.seed, "eval/" + sets[i].first + "/" + sets[j].first + "/" +
                                       detail::num(lambda)));
        cmp["by_lambda"][detail::num(lambda)] =
            json{{"mean_diff", mean}, {"ci95", json::array({lo, hi})}};
      }
      report["comparisons"].push_back(cmp);
    }
  }
  detail::write_json(dir / "metrics.json", report);

  // Set-level Pareto frontier over (mean cost, mean reward).
  std::vector<EvaluationPoint> points;
  for (const auto& [label, trajs] : sets) {
    EvalSummary s = summarize(trajs, all_lambdas);
    EvaluationPoint p;
    p.label = label;
    p.mean_reward = s.mean_reward;
    p.mean_cost = s.mean_total_cost;
    p.objective = s.mean_reward - all_lambdas.front() * s.mean_total_cost;
    p.n_queries = static_cast<int>(s.n_trajectories);
    points.push_back(std::move(p));
  }
  auto frontier = pareto_frontier(points);
  std::set<std::string> on;
  for (const auto& p : frontier) on.insert(p.label);
  std::string csv = "label,mean_reward,mean_cost,objective,on_frontier\n";
  for (const auto& p : points)
    csv += p.label + "," + detail::num(p.mean_reward) + "," + detail::num(p.mean_cost) +
           "," + detail::num(p.objective) + "," + (on.count(p.label) ? "1" : "0") + "\n";
  jsonio::write_file((dir / "pareto.csv").string(), csv);
}

// Dispatch + exit-code mapping. Writes {"command", "error": {kind, message}}
// to stderr (one line) and to <out>/error.json when the directory is usable.
inline void dispatch(const std::string& command, const Options& opts) {
  if (command == "simulate")
    run_simulate(opts);
  else if (command == "learn")
    run_learn(opts);
  else if (command == "refine")
    run_refine(opts);
  else if (command == "select")
    run_select(opts);
  else if (command == "route")
    run_route(opts);
  else if (command == "eval")
    run_eval(opts);
  else
    throw ConfigError("unknown command: " + command);
}

inline int guarded_run(const std::string& command, const Options& opts) {
  auto emit = [&](const std::string& kind, const std::string& message, int code) {
    json j;
    j["command"] = command;
    j["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
    std::cerr << j.dump() << "\n";
    if (!opts.out_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(opts.out_dir, ec);
      if (!ec) {
        try {
          detail::write_json(std::filesystem::path(opts.out_dir) / "error.json", j);
        } catch (const std::exception&) {
          // Reporting must never mask the original failure.
        }
      }
    }
    return code;
  };
  try {
    dispatch(command, opts);
    if (!opts.out_dir.empty()) {
      // A successful run clears any stale failure marker from an earlier
      // attempt that wrote into the same output directory.
      std::error_code ec;
      std::filesystem::remove(std::filesystem::path(opts.out_dir) / "error.json", ec);
    }
    return 0;
  } catch (const ConfigError& e) {
    return emit("config", e.what(), 2);
  } catch (const DataError& e) {
    return emit("data", e.what(), 3);
  } catch (const EnvironmentError& e) {
    return emit("environment", e.what(), 4);
  } catch (const std::exception& e) {
    return emit("internal", e.what(), 4);
  }
}

}  // namespace skillbook::cli
