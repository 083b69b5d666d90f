#pragma once

#include <map>
#include <set>
#include <vector>

#include "dflow/control.hpp"
#include "dflow/runtime.hpp"
#include "dflow/wire.hpp"

namespace dflow {

struct GlobalSchedulerParams {
  uint32_t index = 0;
  uint32_t num_globals = 1;
  uint32_t num_shards = 1;
  // node id -> (total resources, ls endpoint)
  std::vector<std::pair<std::string, Resources>> nodes;
  int64_t tick_period = 100;
  int64_t heartbeat_timeout = 500;  // declared dead after this silence
  bool monitor_enabled = true;
};

// Returns which global scheduler owns failure monitoring (and task routing)
// for a node id.
uint32_t gs_owner_of_node(const std::string& node_id, uint32_t num_globals);

// Receives spilled tasks and places them: most dependency bytes already
// local wins, then shortest queue, then lexicographically smallest node id.
// Also monitors heartbeats for the nodes it owns and drives lineage replay
// for lost objects routed to it.
class GlobalScheduler {
 public:
  GlobalScheduler(Runtime* rt, GlobalSchedulerParams params);

  // reconcile=true re-reads the task table for SPILLED tasks it owns.
  void start(bool reconcile = false);
  void handle(Frame f);

 private:
  struct NodeInfo {
    Resources total;
    Resources available;
    uint32_t queue_length = 0;
    int64_t last_heartbeat = 0;
    bool dead = false;
  };

  EndpointId ls_endpoint(const std::string& node_id) const;
  std::optional<std::string> place(const TaskSpec& spec) const;
  void place_or_park(const TaskSpec& spec);
  void retry_parked();
  void on_reconstruct(const ObjectID& obj);
  void resubmit_task(const TaskID& task);
  void on_node_death(const std::string& node_id);
  void check_heartbeats();

  Runtime* rt_;
  GlobalSchedulerParams params_;
  EndpointId self_;
  ControlClient control_;

  std::map<std::string, NodeInfo> nodes_;
  // Dependency locations learned from the object table subscription.
  std::map<ObjectID, std::pair<std::set<std::string>, uint64_t>> obj_cache_;
  std::vector<TaskSpec> parked_;  // currently infeasible everywhere
  std::map<TaskID, std::string> placed_to_;
  std::map<ObjectID, int64_t> recon_started_;
  int64_t recon_coalesce_;
};

}  // namespace dflow
