#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace dflow {

// Endpoint naming convention:
//   shard/<i>        control-plane shard
//   node/<i>/ls      local scheduler
//   node/<i>/store   object store
//   node/<i>/w/<j>   worker
//   gs/<i>           global scheduler
//   driver           driver mailbox
//   driver/store     driver-side object store (holds driver puts durably)
using EndpointId = std::string;

enum class MsgType : uint8_t {
  // Control plane.
  PUT_RECORD = 0x10,
  GET_RECORD = 0x11,
  UPDATE_STATE = 0x12,
  ADD_LOCATION = 0x13,
  REMOVE_LOCATION = 0x14,
  SUBSCRIBE = 0x15,
  UNSUBSCRIBE = 0x16,
  SCAN = 0x17,
  NOTIFY = 0x18,
  REPLY = 0x19,
  APPEND_EVENT = 0x1A,
  PUBLISH_FAIL = 0x1B,
  // Object store.
  OBJ_REQ = 0x20,
  OBJ_RESP = 0x21,
  PUT_OBJ = 0x22,
  ENSURE_LOCAL = 0x23,
  STORE_TICK = 0x24,
  DROP_OBJ = 0x25,
  // Scheduling and execution.
  SPILL = 0x30,
  HEARTBEAT = 0x31,
  PLACE = 0x32,
  ASSIGN = 0x33,
  TASK_FINISHED = 0x34,
  SUBMIT = 0x35,
  RECONSTRUCT = 0x36,
  RESUBMIT_LOST = 0x37,
  STATUS_REQ = 0x38,
  STATUS_RESP = 0x39,
  LS_TICK = 0x3A,
  GS_TICK = 0x3B,
  WORKER_FAILED = 0x3C,
};

struct Frame {
  MsgType type{};
  EndpointId src;
  EndpointId dst;
  std::string payload;
};

// Thrown inside a blocking activity when its endpoint is killed.
struct ActivityKilled {};

// Blocking receive endpoint owned by an activity (worker or driver).
class Mailbox {
 public:
  virtual ~Mailbox() = default;
  // Blocks until a frame arrives. A deadline is absolute, in clock units
  // (ticks in simulated mode, nanoseconds in process mode); returns nullopt
  // on timeout. Throws ActivityKilled when the owner is killed.
  virtual std::optional<Frame> receive(std::optional<int64_t> deadline) = 0;
};

// The transport/clock seam. Everything above it (control plane, stores,
// schedulers, workers, driver) is identical in simulated and process mode.
class Runtime {
 public:
  virtual ~Runtime() = default;

  virtual int64_t now() const = 0;
  virtual bool simulated() const = 0;

  // Fire-and-forget delivery. Frames to dead endpoints are dropped.
  virtual void send(Frame f) = 0;

  // Timer: deliver f to dst after delay clock units.
  virtual void schedule(const EndpointId& dst, Frame f, int64_t delay) = 0;

  // Non-blocking component: frames are handled serially per endpoint.
  virtual void register_handler(const EndpointId& ep, std::function<void(Frame)> h) = 0;

  // Blocking component: frames queue in a mailbox.
  virtual Mailbox* register_mailbox(const EndpointId& ep) = 0;

  // Runs body as a blocking-capable activity associated with owner's mailbox.
  virtual void spawn_activity(const EndpointId& owner, std::function<void()> body) = 0;

  // Callable only from inside an activity.
  virtual void sleep_until(int64_t deadline) = 0;

  // Kills every endpoint and activity whose id starts with prefix; later
  // frames to them are dropped.
  virtual void kill_prefix(const std::string& prefix) = 0;
  virtual bool is_dead(const EndpointId& ep) const = 0;

  virtual void shutdown() = 0;
};

// Serialize a frame with the external framing: 4-byte big-endian length,
// 1-byte message type, payload (the payload embeds src and dst).
std::string frame_to_bytes(const Frame& f);
Frame frame_from_bytes(std::string_view body);  // body excludes the length word

}  // namespace dflow
