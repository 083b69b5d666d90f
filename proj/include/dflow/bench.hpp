#pragma once

#include <string>
#include <vector>

#include "dflow/cluster.hpp"

namespace dflow {

struct MetricStats {
  double p50 = 0, p90 = 0, p99 = 0, mean = 0;
  uint64_t count = 0;
};

MetricStats compute_stats(std::vector<int64_t> samples);

struct BenchReport {
  std::vector<std::pair<std::string, MetricStats>> latencies;  // microseconds
  std::vector<std::pair<std::string, double>> scalars;
  std::string to_text() const;
  std::string to_csv() const;
};

// Primitive operation latencies plus a task-flood throughput figure.
BenchReport bench_micro(Cluster& cluster, int iters);

// Submits `tasks` no-op tasks and blocks until all results are back.
// Returns elapsed wall time in microseconds (virtual time in sim mode).
int64_t bench_flood_us(Cluster& cluster, int tasks);

// Iterative rollout/update loop: each iteration launches `sims` timed
// rollouts, consumes them in completion batches of `batch` through a policy
// task, and folds the policy outputs into an order-insensitive aggregate.
// Rollout durations are drawn driver-side from `seed`, so the aggregate is
// identical in both modes and across runs.
struct RlParams {
  int iters = 20;
  int sims = 32;
  int batch = 8;
  int64_t policy_us = 10000;
  int64_t sim_min_us = 5000;
  int64_t sim_max_us = 9000;
  uint64_t seed = 1;
  // Fault injection: kill this node once iteration kill_iter's submissions
  // have been acknowledged (-1 disables). Node 0 hosts the driver's home
  // scheduler and must stay up.
  int kill_node = -1;
  int kill_iter = 1;
};
struct RlResult {
  int64_t wall_us = 0;
  int64_t aggregate = 0;
};
int64_t rl_rollout_duration(const RlParams& p, int iter, int sim_index);
RlResult bench_rl(Cluster& cluster, const RlParams& p);

// Recursive fan-out: workers submit their own children; the driver harvests
// the whole tree and reports the best leaf score.
struct TreeParams {
  int branching = 3;
  int depth = 5;
  uint64_t seed = 1;
};
struct TreeResult {
  int64_t wall_us = 0;
  uint64_t tasks_executed = 0;  // expand tasks recorded in the task table
  uint64_t leaves = 0;
  int64_t best_score = 0;
};
TreeResult bench_tree(Cluster& cluster, const TreeParams& p);

}  // namespace dflow
