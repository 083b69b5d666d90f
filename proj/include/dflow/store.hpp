#pragma once

#include <map>
#include <vector>

#include "dflow/control.hpp"
#include "dflow/runtime.hpp"
#include "dflow/wire.hpp"

namespace dflow {

// Maps a node id ("n3" or "driver") to its store endpoint.
EndpointId store_endpoint_for_node(const std::string& node_id);

// Per-node in-memory object store. Sealed objects are immutable byte strings.
// ENSURE_LOCAL drives a small state machine per missing object: subscribe to
// the object's directory entry, look it up, fetch from a peer when a location
// exists, or ask the owning global scheduler to reconstruct when the object
// is lost. A periodic tick retries and expires waiter deadlines.
class ObjectStore {
 public:
  ObjectStore(Runtime* rt, EndpointId self, std::string node_id, uint32_t num_shards,
              uint32_t num_globals, uint64_t capacity, int64_t retry_interval);

  void handle(Frame f);

  uint64_t used() const { return used_; }
  size_t object_count() const { return sealed_.size(); }

 private:
  struct Waiter {
    uint64_t req_id = 0;
    EndpointId reply_to;
    std::optional<int64_t> deadline;
    bool local_only = false;
  };
  struct Pending {
    std::vector<Waiter> waiters;
    std::optional<ObjectSnap> snap;
    bool subscribed = false;
    bool fetch_in_flight = false;
    bool tick_scheduled = false;
    int64_t last_reconstruct = -1;
    uint64_t gen = 0;
  };

  void on_put_obj(const Frame& f);
  void on_ensure_local(const Frame& f);
  void on_obj_req(const Frame& f);
  void on_obj_resp(const Frame& f);
  void on_tick(const Frame& f);
  void on_notify(const Frame& f);
  void on_drop(const Frame& f);

  // Seals the object locally and publishes the location. Returns the status
  // the caller should report (OK, DUPLICATE_CONFLICT, CAPACITY_EXCEEDED).
  Status seal_local(const ObjectID& obj, const std::string& payload,
                    std::optional<TaskID> creating);
  void drive(const ObjectID& obj);
  void fulfill(const ObjectID& obj, Status st, const std::string& payload);
  void ensure_tick(const ObjectID& obj, Pending& p);
  void reply_waiter(const Waiter& w, Status st, const std::string& payload);

  Runtime* rt_;
  EndpointId self_;
  std::string node_id_;
  uint32_t num_globals_;
  uint64_t capacity_;
  int64_t retry_interval_;
  ControlClient control_;

  std::map<ObjectID, std::string> sealed_;
  uint64_t used_ = 0;
  std::map<ObjectID, Pending> pending_;
  uint64_t next_gen_ = 1;
  uint64_t next_fetch_req_ = 1;
  std::map<uint64_t, ObjectID> outstanding_fetch_;
};

}  // namespace dflow
