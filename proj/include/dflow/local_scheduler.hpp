#pragma once

#include <deque>
#include <map>
#include <set>
#include <vector>

#include "dflow/control.hpp"
#include "dflow/runtime.hpp"
#include "dflow/wire.hpp"

namespace dflow {

struct LocalSchedulerParams {
  std::string node_id;  // "n0"
  uint32_t node_index = 0;
  uint32_t num_workers = 1;
  Resources total;
  uint32_t theta = 2;  // ready-queue length beyond which spillable tasks spill
  uint32_t num_shards = 1;
  uint32_t num_globals = 1;
  int64_t heartbeat_period = 100;
};

// Per-node scheduler. Tracks dependencies of locally submitted tasks, keeps a
// FIFO ready queue, assigns ready tasks to idle workers, and spills to a
// global scheduler when the node is overloaded or the demand can never fit.
//
// Dispatch work is incremental: a full queue scan happens only when a worker
// frees up; a newly ready task is evaluated once, in isolation.
class LocalScheduler {
 public:
  LocalScheduler(Runtime* rt, LocalSchedulerParams params);

  // reconcile=true re-reads the task table to rebuild state after a restart.
  void start(bool reconcile = false);
  void handle(Frame f);

  EndpointId endpoint() const { return self_; }

 private:
  struct TrackedTask {
    TaskSpec spec;
    std::set<ObjectID> missing;
    bool non_spillable = false;
    bool in_queue = false;
    bool dispatched = false;
  };
  struct ObjState {
    bool located = false;
    std::set<TaskID> waiters;
  };
  struct WorkerSlot {
    bool alive = true;
    bool busy = false;
    TaskID task;
  };

  EndpointId worker_endpoint(uint32_t j) const;
  EndpointId gs_for_task(const TaskID& t) const;

  void admit(TaskSpec spec, bool non_spillable, uint64_t ack_req, const EndpointId& ack_to);
  void register_deps(const TaskID& id);
  void on_object_located(const ObjectID& obj);
  void on_ready(const TaskID& id);
  bool try_assign(const TaskID& id);
  void scan_queue();
  void spill(const TaskID& id);
  void on_task_finished(const Frame& f);
  void on_worker_failed(uint32_t j);
  void on_status_resp(const Frame& f);
  void send_heartbeats();
  void maybe_finish_reconcile();
  void release_deps_interest(const TaskSpec& spec);

  Runtime* rt_;
  LocalSchedulerParams params_;
  EndpointId self_;
  ControlClient control_;

  std::map<TaskID, TrackedTask> tasks_;
  std::map<ObjectID, ObjState> objects_;
  std::deque<TaskID> ready_;
  std::vector<WorkerSlot> workers_;
  Resources avail_;

  bool reconciling_ = false;
  uint32_t status_reports_waited_ = 0;
  std::set<TaskID> unclaimed_dispatched_;
};

}  // namespace dflow
