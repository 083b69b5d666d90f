#include "dflow/bench.hpp"

#include <algorithm>
#include <sstream>

namespace dflow {

MetricStats compute_stats(std::vector<int64_t> samples) {
  MetricStats s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  auto pct = [&](double p) {
    size_t idx = static_cast<size_t>(p * (samples.size() - 1) + 0.5);
    return static_cast<double>(samples[std::min(idx, samples.size() - 1)]);
  };
  s.p50 = pct(0.50);
  s.p90 = pct(0.90);
  s.p99 = pct(0.99);
  double sum = 0;
  for (int64_t v : samples) sum += static_cast<double>(v);
  s.mean = sum / static_cast<double>(samples.size());
  return s;
}

std::string BenchReport::to_text() const {
  std::ostringstream out;
  for (const auto& [name, st] : latencies) {
    out << name << ": p50=" << st.p50 << "us p90=" << st.p90 << "us p99=" << st.p99
        << "us mean=" << st.mean << "us (n=" << st.count << ")\n";
  }
  for (const auto& [name, v] : scalars) out << name << ": " << v << '\n';
  return out.str();
}

std::string BenchReport::to_csv() const {
  std::ostringstream out;
  out << "metric,p50_us,p90_us,p99_us,mean_us,count\n";
  for (const auto& [name, st] : latencies)
    out << name << ',' << st.p50 << ',' << st.p90 << ',' << st.p99 << ',' << st.mean
        << ',' << st.count << '\n';
  for (const auto& [name, v] : scalars) out << name << ',' << v << ",,,,\n";
  return out.str();
}

namespace {

int64_t to_us(Cluster& c, int64_t units) {
  return c.config().mode == ClusterConfig::Mode::SIM ? units : units / 1000;
}

}  // namespace

int64_t bench_flood_us(Cluster& cluster, int tasks) {
  int64_t elapsed_units = 0;
  cluster.run_driver([&](Driver& d) {
    int64_t t0 = d.now();
    std::vector<ObjectID> futures;
    futures.reserve(tasks);
    for (int i = 0; i < tasks; ++i) futures.push_back(d.remote("noop", {})[0]);
    for (const auto& f : futures) d.get(f);
    elapsed_units = d.now() - t0;
  });
  return to_us(cluster, elapsed_units);
}

BenchReport bench_micro(Cluster& cluster, int iters) {
  BenchReport rep;
  std::vector<int64_t> submit_us, put_get_us, roundtrip_us;
  cluster.run_driver([&](Driver& d) {
    for (int i = 0; i < iters; ++i) {
      int64_t t0 = d.now();
      d.remote("noop", {});
      d.barrier();
      submit_us.push_back(to_us(cluster, d.now() - t0));
    }
    for (int i = 0; i < iters; ++i) {
      int64_t t0 = d.now();
      ObjectID id = d.put(Value::Int(i));
      d.get(id);
      put_get_us.push_back(to_us(cluster, d.now() - t0));
    }
    for (int i = 0; i < iters; ++i) {
      int64_t t0 = d.now();
      auto f = d.remote("noop", {});
      d.get(f[0]);
      roundtrip_us.push_back(to_us(cluster, d.now() - t0));
    }
  });
  rep.latencies.emplace_back("submit_ack", compute_stats(std::move(submit_us)));
  rep.latencies.emplace_back("put_get", compute_stats(std::move(put_get_us)));
  rep.latencies.emplace_back("task_roundtrip", compute_stats(std::move(roundtrip_us)));
  int flood_n = 200;
  int64_t flood = bench_flood_us(cluster, flood_n);
  rep.scalars.emplace_back("flood_tasks", flood_n);
  rep.scalars.emplace_back("flood_elapsed_us", static_cast<double>(flood));
  if (flood > 0)
    rep.scalars.emplace_back("flood_tasks_per_sec", 1e6 * flood_n / static_cast<double>(flood));
  return rep;
}

int64_t rl_rollout_duration(const RlParams& p, int iter, int sim_index) {
  uint64_t span = static_cast<uint64_t>(p.sim_max_us - p.sim_min_us + 1);
  uint64_t h = splitmix64(p.seed ^ (static_cast<uint64_t>(iter) * 0x10001ULL +
                                    static_cast<uint64_t>(sim_index)));
  return p.sim_min_us + static_cast<int64_t>(h % span);
}

RlResult bench_rl(Cluster& cluster, const RlParams& p) {
  RlResult res;
  cluster.run_driver([&](Driver& d) {
    int64_t t0 = d.now();
    uint64_t aggregate = 0;  // wrapping sum; only equality across runs matters
    bool killed = false;
    for (int iter = 0; iter < p.iters; ++iter) {
      std::vector<ObjectID> outstanding;
      for (int j = 0; j < p.sims; ++j) {
        int64_t dur = rl_rollout_duration(p, iter, j);
        int64_t payload = static_cast<int64_t>(iter) * p.sims + j;
        outstanding.push_back(d.remote("simulate",
                                       {Arg::inline_value(Value::Int(dur)),
                                        Arg::inline_value(Value::Int(payload))})[0]);
      }
      if (p.kill_node > 0 && !killed && iter == p.kill_iter) {
        // Only after every submission is acknowledged, so nothing is lost
        // before the control plane has a record to replay from.
        d.barrier();
        cluster.kill_node(static_cast<uint32_t>(p.kill_node));
        killed = true;
      }
      std::vector<ObjectID> policy_outs;
      while (!outstanding.empty()) {
        size_t k = std::min<size_t>(p.batch, outstanding.size());
        WaitResult w = d.wait(outstanding, k);
        std::vector<Arg> args{Arg::inline_value(Value::Int(p.policy_us))};
        for (const auto& id : w.ready) args.push_back(Arg::future(id));
        policy_outs.push_back(d.remote("policy_step", std::move(args))[0]);
        outstanding = std::move(w.not_ready);
      }
      for (const auto& id : policy_outs) {
        Value v = d.get(id);
        if (v.is_int()) aggregate += static_cast<uint64_t>(v.as_int());
      }
    }
    res.aggregate = static_cast<int64_t>(aggregate);
    res.wall_us = to_us(cluster, d.now() - t0);
  });
  return res;
}

TreeResult bench_tree(Cluster& cluster, const TreeParams& p) {
  TreeResult res;
  cluster.run_driver([&](Driver& d) {
    int64_t t0 = d.now();
    auto root = d.remote("expand", {Arg::inline_value(Value::Int(p.branching)),
                                    Arg::inline_value(Value::Int(p.depth)),
                                    Arg::inline_value(Value::Int(
                                        static_cast<int64_t>(p.seed)))})[0];
    uint64_t leaves = 0;
    int64_t best = 0;
    // Harvest depth-first: interior nodes return a list of child refs,
    // leaves return their score.
    std::vector<ObjectID> stack{root};
    while (!stack.empty()) {
      ObjectID id = stack.back();
      stack.pop_back();
      Value v = d.get(id);
      if (v.is_int()) {
        ++leaves;
        best = std::max(best, v.as_int());
      } else if (v.is_list()) {
        for (const Value& child : v.as_list())
          if (child.is_ref()) stack.push_back(child.as_ref());
      }
    }
    res.leaves = leaves;
    res.best_score = best;
    res.wall_us = to_us(cluster, d.now() - t0);
  });
  for (const auto& t : cluster.scan_tasks()) {
    try {
      if (TaskSpec::decode(t.snap.spec_bytes).function_name == "expand")
        ++res.tasks_executed;
    } catch (const MalformedEncoding&) {
    }
  }
  return res;
}

}  // namespace dflow
