#pragma once

#include <map>
#include <memory>
#include <vector>

#include "dflow/control.hpp"
#include "dflow/driver.hpp"
#include "dflow/global_scheduler.hpp"
#include "dflow/kernels.hpp"
#include "dflow/local_scheduler.hpp"
#include "dflow/proc_runtime.hpp"
#include "dflow/sim_runtime.hpp"
#include "dflow/store.hpp"
#include "dflow/worker.hpp"

namespace dflow {

struct ClusterConfig {
  enum class Mode { SIM, PROC };
  Mode mode = Mode::SIM;
  uint32_t num_nodes = 1;
  uint32_t workers_per_node = 1;
  uint32_t num_shards = 1;
  uint32_t num_globals = 1;
  Resources default_node{4, 0};
  std::map<uint32_t, Resources> node_overrides;
  uint32_t theta = 0;  // 0 -> 2 * workers_per_node
  uint64_t seed = 0;
  uint64_t store_capacity = 512ull << 20;
  uint16_t base_port = 45100;
  SimParams sim;
  // All periods in microseconds; 0 picks a per-mode default.
  int64_t heartbeat_period_us = 0;
  int64_t heartbeat_timeout_us = 0;
  int64_t gs_tick_us = 0;
  int64_t store_retry_us = 0;

  Resources node_resources(uint32_t i) const {
    auto it = node_overrides.find(i);
    return it == node_overrides.end() ? default_node : it->second;
  }

  // Flat "key = value" text; '#' starts a comment.
  static ClusterConfig parse(const std::string& text);
  static ClusterConfig from_file(const std::string& path);
};

// Owns the runtime and every component; wires endpoints, runs driver
// programs, injects faults, and offers blocking table scans for inspection.
class Cluster {
 public:
  explicit Cluster(ClusterConfig cfg);
  ~Cluster();

  // Extra kernels may be added before start().
  FunctionRegistry& registry() { return registry_; }

  void start();
  void shutdown();

  Runtime& runtime() { return *rt_; }
  SimRuntime* sim() { return sim_; }
  Driver& driver() { return *driver_; }
  const ClusterConfig& config() const { return cfg_; }

  // Runs fn against the driver. Simulated mode: fn becomes an activity and
  // the event loop runs until it returns. Process mode: fn runs inline.
  void run_driver(const std::function<void(Driver&)>& fn);

  // Advances time: runs the event loop for that long (sim) or sleeps (proc).
  void settle(int64_t duration_units);

  // Fault injection. Safe to call from inside a driver program or, in
  // simulated mode, from the controller between run_driver calls.
  void kill_node(uint32_t i);
  void restart_ls(uint32_t i);
  void restart_gs(uint32_t i);
  void restart_worker(uint32_t node, uint32_t w);
  void drop_object(const ObjectID& id);

  // Blocking whole-table reads (controller context in sim mode).
  std::vector<ScannedTask> scan_tasks();
  std::vector<ScannedObject> scan_objects();
  std::vector<EventRecord> scan_events();  // ordered by (timestamp, shard, seq)

  int64_t units_from_us(int64_t us) const {
    return cfg_.mode == ClusterConfig::Mode::SIM ? us : us * 1000;
  }

 private:
  void make_ls(uint32_t i, bool reconcile);
  void make_gs(uint32_t i, bool reconcile);
  void make_worker(uint32_t node, uint32_t w);
  void make_store(uint32_t node);
  void make_driver_store();
  std::map<EndpointId, uint16_t> port_map() const;
  std::vector<std::string> scan_bodies(Table t);
  GlobalSchedulerParams gs_params(uint32_t index) const;

  ClusterConfig cfg_;
  uint32_t theta_ = 0;
  int64_t hb_period_ = 0;
  int64_t hb_timeout_ = 0;
  int64_t gs_tick_ = 0;
  int64_t store_retry_ = 0;

  std::unique_ptr<Runtime> rt_;
  SimRuntime* sim_ = nullptr;
  FunctionRegistry registry_;

  std::vector<std::unique_ptr<ControlShard>> shards_;
  std::vector<std::unique_ptr<ObjectStore>> stores_;  // per node
  std::unique_ptr<ObjectStore> driver_store_;
  std::vector<std::unique_ptr<LocalScheduler>> ls_;
  std::vector<std::unique_ptr<GlobalScheduler>> gs_;
  std::vector<std::vector<std::unique_ptr<Worker>>> workers_;
  std::unique_ptr<Driver> driver_;
  uint64_t scan_seq_ = 0;
  bool started_ = false;
};

}  // namespace dflow
