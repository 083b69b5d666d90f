#pragma once

#include <mutex>
#include <set>

#include "dflow/control.hpp"
#include "dflow/kernels.hpp"
#include "dflow/runtime.hpp"
#include "dflow/wire.hpp"

namespace dflow {

struct DriverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GetTimeout : DriverError {
  GetTimeout() : DriverError("get timed out") {}
};
struct ObjectUnavailable : DriverError {
  explicit ObjectUnavailable(const std::string& why) : DriverError(why) {}
};
struct UnknownFunctionError : DriverError {
  explicit UnknownFunctionError(const std::string& name)
      : DriverError("unknown function: " + name) {}
};
struct BadWaitArgs : DriverError {
  explicit BadWaitArgs(const std::string& why) : DriverError(why) {}
};

struct WaitResult {
  std::vector<ObjectID> ready;      // input order, first k to complete
  std::vector<ObjectID> not_ready;  // input order, the rest
};

// The program-facing futures API. Lives on the "driver" mailbox; submissions
// go to a home local scheduler, values come from the driver-side store (which
// also keeps driver puts durable while the cluster is up).
class Driver {
 public:
  Driver(Runtime* rt, uint32_t num_shards, uint32_t num_globals,
         EndpointId home_ls, const FunctionRegistry* registry);

  // Non-blocking: returns the future ids immediately.
  std::vector<ObjectID> remote(const std::string& function_name, std::vector<Arg> args,
                               uint32_t num_returns = 1, Resources demand = {1, 0});

  // Blocks until the value is local; timeout is in microseconds.
  Value get(const ObjectID& id, std::optional<int64_t> timeout_us = std::nullopt);

  // Blocks until k of the futures are sealed or the timeout elapses.
  WaitResult wait(const std::vector<ObjectID>& ids, size_t k,
                  std::optional<int64_t> timeout_us = std::nullopt);

  // Stores a value with no lineage; unrecoverable if every copy is dropped.
  ObjectID put(const Value& v);

  // Blocks until every submission so far has been acknowledged.
  void barrier();

  int64_t now() const { return rt_->now(); }
  Runtime* runtime() const { return rt_; }

 private:
  void dispatch(Frame& f);
  // Returns the reply matching req_id, or nullopt on deadline.
  std::optional<MsgReply> pump_for_reply(uint64_t req_id, std::optional<int64_t> deadline);

  Runtime* rt_;
  EndpointId self_;
  EndpointId home_ls_;
  EndpointId store_;
  const FunctionRegistry* registry_;
  ControlClient control_;
  Mailbox* mailbox_ = nullptr;
  std::mutex api_m_;

  TaskID root_;      // zero id: driver-submitted task ids derive from it
  TaskID put_root_;  // distinct namespace for driver puts
  uint32_t task_counter_ = 0;
  uint32_t put_counter_ = 0;
  uint64_t next_req_ = 2;  // even ids; ControlClient owns the odd ones
  std::set<uint64_t> outstanding_acks_;
  std::function<void(const MsgNotify&)> notify_sink_;
};

}  // namespace dflow
