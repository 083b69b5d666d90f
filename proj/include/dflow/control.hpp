#pragma once

#include <functional>
#include <map>
#include <set>
#include <vector>

#include "dflow/runtime.hpp"
#include "dflow/wire.hpp"

namespace dflow {

// One control-plane shard: tables (task, object, function, event) plus
// publish/subscribe. Requests take effect in arrival order, which gives the
// per-shard serializable order every consumer relies on.
class ControlShard {
 public:
  ControlShard(Runtime* rt, uint32_t index, uint32_t num_shards, EndpointId self);

  void handle(Frame f);

  EndpointId endpoint() const { return self_; }

 private:
  struct ObjectRec {
    std::set<std::string> locations;
    std::optional<TaskID> creating;
    uint64_t size = 0;
    bool lost = false;
  };
  struct TaskRec {
    std::string spec_bytes;
    TaskState state = TaskState::SUBMITTED;
    std::string node;
  };

  void reply(const Frame& req, uint64_t req_id, Status st, std::string body = {});
  void notify(Table t, const std::string& key, NotifyKind kind, const std::string& snap);
  void append_event(const std::string& subject, const std::string& transition,
                    const std::string& node);
  ObjectSnap snap_of(const ObjectRec& r) const;

  void on_put_record(const Frame& f);
  void on_get_record(const Frame& f);
  void on_update_state(const Frame& f);
  void on_add_location(const Frame& f);
  void on_remove_location(const Frame& f);
  void on_subscribe(const Frame& f, bool unsubscribe);
  void on_scan(const Frame& f);

  Runtime* rt_;
  uint32_t index_;
  uint32_t num_shards_;
  EndpointId self_;

  std::map<std::string, ObjectRec> objects_;
  std::map<std::string, TaskRec> tasks_;
  std::map<std::string, std::string> functions_;
  std::vector<EventRecord> events_;
  uint64_t next_event_seq_ = 0;

  // channel key -> subscribers; ordered so notification fan-out order is
  // deterministic.
  std::map<std::string, std::set<EndpointId>> key_subs_;
  std::map<uint8_t, std::set<EndpointId>> table_subs_;
};

// Client-side helper: routes keyed requests to the right shard, correlates
// replies, and decodes snapshots. Completion callbacks run on the owning
// component's endpoint when it forwards REPLY frames to handle_reply().
class ControlClient {
 public:
  using ReplyCb = std::function<void(const MsgReply&)>;
  using ObjectCb = std::function<void(Status, std::optional<ObjectSnap>)>;
  using TaskCb = std::function<void(Status, std::optional<TaskSnap>)>;

  ControlClient(Runtime* rt, EndpointId self, uint32_t num_shards);

  static EndpointId shard_endpoint(uint32_t index);

  void put_task_spec(const TaskSpec& spec, const std::string& origin_node,
                     ReplyCb cb = nullptr);
  void put_function(const std::string& name);
  void update_state(const TaskID& task, TaskState state, const std::string& node,
                    ReplyCb cb = nullptr);
  void add_location(const ObjectID& object, const std::string& node, uint64_t size,
                    std::optional<TaskID> creating, ReplyCb cb = nullptr);
  void remove_location(const ObjectID& object, const std::string& node,
                       ReplyCb cb = nullptr);
  void get_object(const ObjectID& object, ObjectCb cb);
  void get_task(const TaskID& task, TaskCb cb);
  void subscribe_object(const ObjectID& object);
  void unsubscribe_object(const ObjectID& object);
  void subscribe_task(const TaskID& task);
  void subscribe_table(Table t);
  void append_event(const std::string& subject16, const std::string& transition,
                    const std::string& node);
  void publish_fail(const ObjectID& object);
  void scan_shard(Table t, uint32_t shard, ReplyCb cb);

  // Returns true when the frame was a REPLY consumed by a pending callback.
  bool handle_reply(const Frame& f);

  uint32_t num_shards() const { return num_shards_; }

 private:
  uint64_t track(ReplyCb cb);
  void send_keyed(MsgType type, std::string_view key16, std::string payload);

  Runtime* rt_;
  EndpointId self_;
  uint32_t num_shards_;
  uint64_t next_req_ = 1;
  std::map<uint64_t, ReplyCb> pending_;
};

// Decoded scan results.
struct ScannedObject {
  ObjectID id;
  ObjectSnap snap;
};
struct ScannedTask {
  TaskID id;
  TaskSnap snap;
};

std::vector<ScannedObject> decode_object_scan(const std::string& body);
std::vector<ScannedTask> decode_task_scan(const std::string& body);
std::vector<EventRecord> decode_event_scan(const std::string& body);
std::vector<std::pair<std::string, std::string>> decode_function_scan(const std::string& body);

}  // namespace dflow
