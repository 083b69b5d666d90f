#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dflow/ids.hpp"
#include "dflow/value.hpp"

namespace dflow {

// Counting resources only; "gpu" is a declared token, not a device.
struct Resources {
  uint32_t cpu = 0;
  uint32_t gpu = 0;

  bool fits_in(const Resources& o) const { return cpu <= o.cpu && gpu <= o.gpu; }
  Resources& operator+=(const Resources& o) {
    cpu += o.cpu;
    gpu += o.gpu;
    return *this;
  }
  Resources& operator-=(const Resources& o) {
    cpu -= o.cpu;
    gpu -= o.gpu;
    return *this;
  }
  bool operator==(const Resources&) const = default;
};

// A task argument is either an inline value or a future (dependency edge).
struct Arg {
  static Arg inline_value(Value v) { return Arg{std::move(v), std::nullopt}; }
  static Arg future(ObjectID id) { return Arg{Value(), id}; }

  bool is_future() const { return ref.has_value(); }

  Value value;                  // meaningful iff !is_future()
  std::optional<ObjectID> ref;  // meaningful iff is_future()
};

// Immutable description of one task. Encoding is canonical: identical specs
// encode identically, which backs the control plane's write-once check.
struct TaskSpec {
  TaskID task_id;
  std::string function_name;
  std::vector<Arg> args;
  uint32_t num_returns = 1;
  Resources demand;
  uint64_t rng_seed = 0;  // always low 8 bytes of task_id

  static TaskSpec make(const TaskID& parent, uint32_t submission_index,
                       std::string function_name, std::vector<Arg> args,
                       uint32_t num_returns, Resources demand);

  std::vector<ObjectID> return_ids() const;
  std::vector<ObjectID> future_args() const;

  std::string encode() const;
  static TaskSpec decode(std::string_view bytes);
};

enum class TaskState : uint8_t {
  SUBMITTED = 0,
  QUEUED_LOCAL = 1,
  SPILLED = 2,
  ASSIGNED = 3,
  RUNNING = 4,
  DONE = 5,
  LOST = 6,
};

const char* task_state_name(TaskState s);

// Legal transitions:
//   SUBMITTED -> QUEUED_LOCAL -> {ASSIGNED, SPILLED}
//   SPILLED -> ASSIGNED
//   ASSIGNED -> RUNNING -> DONE
//   {ASSIGNED, RUNNING} -> LOST -> QUEUED_LOCAL
//   DONE -> LOST   (outputs of a finished task lost; reconstruction path)
bool task_transition_legal(TaskState from, TaskState to);

// Timestamped state-transition log entry; powers the timeline/inspection
// tooling. seq is assigned per shard at append time.
struct EventRecord {
  int64_t timestamp = 0;
  std::string subject;  // 16 raw bytes: TaskID or ObjectID
  std::string transition;
  std::string node_id;
  uint64_t seq = 0;

  std::string encode() const;
  static EventRecord decode(std::string_view bytes);
  static EventRecord decode(ByteReader& r);
  void encode(ByteWriter& w) const;
};

}  // namespace dflow
