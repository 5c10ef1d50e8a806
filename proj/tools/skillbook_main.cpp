// The skillbook command-line tool: simulate worlds, learn and refine a
// skill handbook from trajectory logs, select a handbook variant on the
// reward/cost frontier, route queries, and evaluate trajectory logs.

#include <CLI11.hpp>

#include <skillbook/cli.hpp>

namespace {

using skillbook::cli::Options;

void add_common(CLI::App* cmd, Options& opts) {
  cmd->add_option("--out", opts.out_dir, "output directory (created if missing)")
      ->required();
  cmd->add_option("--config", opts.config_path, "config file (TOML subset or JSON)");
  cmd->add_option("--seed", opts.seed, "base seed for all derived randomness");
  cmd->add_option("--lambda", opts.lambdas,
                  "objective cost weight(s) J = reward - lambda * cost; repeatable");
  cmd->add_option("--lambda-c", opts.lambda_c, "router per-step cost weight");
  cmd->add_option("--max-turns", opts.max_turns, "episode turn budget");
  cmd->add_flag("--dry-run", opts.dry_run, "plan and report without side effects");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skill-aware, cost-aware multi-agent orchestration"};
  app.require_subcommand(1);
  Options opts;

  CLI::App* simulate = app.add_subcommand(
      "simulate", "generate a world and exploration trajectory bundles");
  add_common(simulate, opts);
  simulate->add_option("--world", opts.world_path, "world spec or exported world (JSON)")
      ->required();
  simulate->add_option("--n-queries", opts.n_queries, "training queries to synthesize");
  simulate->add_option("--samples", opts.samples, "trajectories per query");
  simulate->add_option("--tag", opts.tag, "query id tag");
  simulate->add_option("--policy", opts.policy, "mode policy style: needs | phase");
  simulate->add_option("--explore", opts.explore,
                       "agent exploration: round_robin | route");

  CLI::App* learn =
      app.add_subcommand("learn", "mine skills and profiles from trajectory bundles");
  add_common(learn, opts);
  learn->add_option("--handbook", opts.handbook_path, "input handbook JSON")->required();
  learn->add_option("--bundles", opts.bundles_path, "bundle index JSONL")->required();
  learn->add_option("--trajectories", opts.trajectories_path, "trajectory JSONL")
      ->required();
  learn->add_option("--proposer", opts.proposer, "skill proposer: baseline | oracle");
  learn->add_option("--world", opts.world_path, "world JSON (needed by --proposer oracle)");

  CLI::App* refine =
      app.add_subcommand("refine", "split/merge skills based on outcome evidence");
  add_common(refine, opts);
  refine->add_option("--handbook", opts.handbook_path, "input handbook JSON")->required();
  refine->add_option("--bundles", opts.bundles_path, "bundle index JSONL")->required();
  refine->add_option("--trajectories", opts.trajectories_path, "trajectory JSONL")
      ->required();

  CLI::App* select = app.add_subcommand(
      "select", "evaluate handbook variants and pick the frontier argmax");
  add_common(select, opts);
  select->add_option("--handbook", opts.handbook_path, "input handbook JSON")->required();
  select->add_option("--world", opts.world_path, "world JSON")->required();
  select->add_option("--queries", opts.queries_path, "query JSONL file");
  select->add_option("--gen-queries", opts.gen_queries, "synthesize N queries instead");
  select->add_option("--tag", opts.tag, "tag for synthesized queries");
  select->add_option("--policy", opts.policy, "mode policy style: needs | phase");

  CLI::App* route = app.add_subcommand("route", "route queries against a world");
  add_common(route, opts);
  route->add_option("--handbook", opts.handbook_path, "input handbook JSON")->required();
  route->add_option("--world", opts.world_path, "world JSON")->required();
  route->add_option("--queries", opts.queries_path, "query JSONL file");
  route->add_option("--gen-queries", opts.gen_queries, "synthesize N queries instead");
  route->add_option("--tag", opts.tag, "tag for synthesized queries");
  route->add_option("--policy", opts.policy, "mode policy style: needs | phase");
  route->add_option("--baseline", opts.baseline,
                    "override agent choice: none | random | best");

  CLI::App* eval =
      app.add_subcommand("eval", "summarize and compare trajectory logs");
  add_common(eval, opts);
  eval->add_option("--in", opts.eval_inputs, "label=path trajectory log; repeatable")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // CLI11 exits 0 for --help; anything else is a configuration error.
    return code == 0 ? 0 : 2;
  }
  return skillbook::cli::guarded_run(app.get_subcommands().front()->get_name(), opts);
}
