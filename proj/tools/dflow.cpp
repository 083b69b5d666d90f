// Command-line entry point: benchmarks and table inspection over a
// self-contained cluster (simulated or localhost processes-as-threads).
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dflow/bench.hpp"
#include "dflow/inspect.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct CommonOpts {
  std::string config_path;
  std::string mode;
  std::optional<uint64_t> seed;
  std::string format = "text";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "cluster config file (key = value lines)");
  cmd->add_option("--mode", o.mode, "sim or proc (overrides config)")
      ->check(CLI::IsMember({"sim", "proc"}));
  cmd->add_option("--seed", o.seed, "workload seed (overrides config)");
  cmd->add_option("--format", o.format, "text or csv")
      ->check(CLI::IsMember({"text", "csv"}));
}

dflow::ClusterConfig build_config(const CommonOpts& o) {
  dflow::ClusterConfig cfg;
  if (!o.config_path.empty()) {
    cfg = dflow::ClusterConfig::from_file(o.config_path);
  } else {
    cfg.num_nodes = 2;
    cfg.workers_per_node = 2;
    cfg.num_shards = 2;
    cfg.num_globals = 1;
    cfg.default_node = {4, 0};
  }
  if (o.mode == "sim") cfg.mode = dflow::ClusterConfig::Mode::SIM;
  if (o.mode == "proc") cfg.mode = dflow::ClusterConfig::Mode::PROC;
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dflow: futures-based distributed dataflow runtime"};
  app.require_subcommand(1);

  auto* bench = app.add_subcommand("bench", "run a workload and report metrics");
  bench->require_subcommand(1);

  CommonOpts micro_o;
  int micro_iters = 50;
  auto* micro = bench->add_subcommand("micro", "primitive-operation latencies");
  add_common(micro, micro_o);
  micro->add_option("--iters", micro_iters, "samples per metric")->check(CLI::PositiveNumber);

  CommonOpts rl_o;
  dflow::RlParams rlp;
  auto* rl = bench->add_subcommand("rl", "iterative rollout/update loop");
  add_common(rl, rl_o);
  rl->add_option("--iters", rlp.iters)->check(CLI::PositiveNumber);
  rl->add_option("--sims", rlp.sims, "rollouts per iteration")->check(CLI::PositiveNumber);
  rl->add_option("--batch", rlp.batch, "rollouts consumed per policy step")
      ->check(CLI::PositiveNumber);
  rl->add_option("--policy-us", rlp.policy_us)->check(CLI::PositiveNumber);
  rl->add_option("--kill-node", rlp.kill_node,
                 "kill this node mid-run (must be > 0; node 0 hosts the driver)");
  rl->add_option("--kill-iter", rlp.kill_iter, "iteration at which to kill");

  CommonOpts tree_o;
  dflow::TreeParams treep;
  auto* tree = bench->add_subcommand("tree", "recursive tree-search fan-out");
  add_common(tree, tree_o);
  tree->add_option("--branching", treep.branching)->check(CLI::PositiveNumber);
  tree->add_option("--depth", treep.depth)->check(CLI::PositiveNumber);

  auto* inspect = app.add_subcommand("inspect", "run a small workload, dump a table");
  inspect->require_subcommand(1);
  CommonOpts ins_o;
  std::string ins_workload = "flood";
  std::string ins_task_hex;
  auto add_inspect_opts = [&](CLI::App* cmd) {
    add_common(cmd, ins_o);
    cmd->add_option("--workload", ins_workload, "flood, rl, or tree")
        ->check(CLI::IsMember({"flood", "rl", "tree"}));
  };
  auto* ins_tasks = inspect->add_subcommand("tasks", "task table");
  add_inspect_opts(ins_tasks);
  auto* ins_objects = inspect->add_subcommand("objects", "object table");
  add_inspect_opts(ins_objects);
  auto* ins_timeline = inspect->add_subcommand("timeline", "event log");
  add_inspect_opts(ins_timeline);
  ins_timeline->add_option("--task", ins_task_hex, "filter to one task id (32 hex chars)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (micro->parsed()) {
      auto cfg = build_config(micro_o);
      dflow::Cluster c(cfg);
      c.start();
      auto rep = dflow::bench_micro(c, micro_iters);
      std::cout << (micro_o.format == "csv" ? rep.to_csv() : rep.to_text());
    } else if (rl->parsed()) {
      auto cfg = build_config(rl_o);
      if (rlp.kill_node == 0 || rlp.kill_node >= static_cast<int>(cfg.num_nodes)) {
        if (rlp.kill_node != -1) {
          std::cerr << "error: --kill-node must name a non-driver node\n";
          return kExitUsage;
        }
      }
      rlp.seed = cfg.seed ? cfg.seed : rlp.seed;
      dflow::Cluster c(cfg);
      c.start();
      auto res = dflow::bench_rl(c, rlp);
      if (rl_o.format == "csv") {
        std::cout << "metric,value\nwall_us," << res.wall_us << "\naggregate,"
                  << res.aggregate << "\n";
      } else {
        std::cout << "wall: " << res.wall_us << " us\naggregate: " << res.aggregate
                  << "\n";
      }
    } else if (tree->parsed()) {
      auto cfg = build_config(tree_o);
      treep.seed = cfg.seed ? cfg.seed : treep.seed;
      dflow::Cluster c(cfg);
      c.start();
      auto res = dflow::bench_tree(c, treep);
      if (tree_o.format == "csv") {
        std::cout << "metric,value\nwall_us," << res.wall_us << "\nexpand_tasks,"
                  << res.tasks_executed << "\nleaves," << res.leaves << "\nbest_score,"
                  << res.best_score << "\n";
      } else {
        std::cout << "wall: " << res.wall_us << " us\nexpand tasks: "
                  << res.tasks_executed << "\nleaves: " << res.leaves
                  << "\nbest score: " << res.best_score << "\n";
      }
    } else {
      // inspect: run the chosen workload, then dump the requested table.
      std::optional<dflow::TaskID> filter;
      if (!ins_task_hex.empty()) {
        try {
          filter = dflow::TaskID::from_hex(ins_task_hex);
        } catch (const std::exception&) {
          std::cerr << "error: --task expects 32 hex characters\n";
          return kExitUsage;
        }
      }
      auto cfg = build_config(ins_o);
      dflow::Cluster c(cfg);
      c.start();
      if (ins_workload == "flood") {
        dflow::bench_flood_us(c, 20);
      } else if (ins_workload == "rl") {
        dflow::RlParams p;
        p.iters = 2;
        p.sims = 8;
        p.seed = cfg.seed ? cfg.seed : p.seed;
        dflow::bench_rl(c, p);
      } else {
        dflow::TreeParams p;
        p.depth = 3;
        p.seed = cfg.seed ? cfg.seed : p.seed;
        dflow::bench_tree(c, p);
      }
      bool csv = ins_o.format == "csv";
      if (ins_tasks->parsed())
        std::cout << dflow::format_tasks(c.scan_tasks(), csv);
      else if (ins_objects->parsed())
        std::cout << dflow::format_objects(c.scan_objects(), csv);
      else
        std::cout << dflow::format_timeline(c.scan_events(), filter, csv);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
