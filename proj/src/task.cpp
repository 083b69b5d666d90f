#include "dflow/task.hpp"

namespace dflow {

TaskSpec TaskSpec::make(const TaskID& parent, uint32_t submission_index,
                        std::string function_name, std::vector<Arg> args,
                        uint32_t num_returns, Resources demand) {
  TaskSpec spec;
  spec.task_id = derive_task_id(parent, submission_index);
  spec.function_name = std::move(function_name);
  spec.args = std::move(args);
  spec.num_returns = num_returns;
  spec.demand = demand;
  spec.rng_seed = spec.task_id.low64();
  return spec;
}

std::vector<ObjectID> TaskSpec::return_ids() const {
  std::vector<ObjectID> ids;
  ids.reserve(num_returns);
  for (uint32_t i = 0; i < num_returns; ++i) ids.push_back(derive_object_id(task_id, i));
  return ids;
}

std::vector<ObjectID> TaskSpec::future_args() const {
  std::vector<ObjectID> ids;
  for (const auto& a : args)
    if (a.is_future()) ids.push_back(*a.ref);
  return ids;
}

std::string TaskSpec::encode() const {
  ByteWriter w;
  w.raw(task_id.bytes());
  w.lp_bytes(function_name);
  w.u32(static_cast<uint32_t>(args.size()));
  for (const auto& a : args) {
    if (a.is_future()) {
      w.u8(1);
      w.raw(a.ref->bytes());
    } else {
      w.u8(0);
      encode_value(a.value, w);
    }
  }
  w.u32(num_returns);
  w.u32(demand.cpu);
  w.u32(demand.gpu);
  w.u64(rng_seed);
  return w.take();
}

TaskSpec TaskSpec::decode(std::string_view bytes) {
  ByteReader r(bytes);
  TaskSpec spec;
  spec.task_id = TaskID::from_bytes(r.raw(kIdSize));
  spec.function_name = std::string(r.lp_bytes());
  uint32_t nargs = r.u32();
  for (uint32_t i = 0; i < nargs; ++i) {
    uint8_t tag = r.u8();
    if (tag == 1)
      spec.args.push_back(Arg::future(ObjectID::from_bytes(r.raw(kIdSize))));
    else if (tag == 0)
      spec.args.push_back(Arg::inline_value(decode_value(r)));
    else
      throw MalformedEncoding("bad arg tag");
  }
  spec.num_returns = r.u32();
  if (spec.num_returns < 1) throw MalformedEncoding("num_returns must be >= 1");
  spec.demand.cpu = r.u32();
  spec.demand.gpu = r.u32();
  spec.rng_seed = r.u64();
  r.expect_end();
  return spec;
}

const char* task_state_name(TaskState s) {
  switch (s) {
    case TaskState::SUBMITTED: return "SUBMITTED";
    case TaskState::QUEUED_LOCAL: return "QUEUED_LOCAL";
    case TaskState::SPILLED: return "SPILLED";
    case TaskState::ASSIGNED: return "ASSIGNED";
    case TaskState::RUNNING: return "RUNNING";
    case TaskState::DONE: return "DONE";
    case TaskState::LOST: return "LOST";
  }
  return "?";
}

bool task_transition_legal(TaskState from, TaskState to) {
  switch (from) {
    case TaskState::SUBMITTED:
      return to == TaskState::QUEUED_LOCAL;
    case TaskState::QUEUED_LOCAL:
      return to == TaskState::ASSIGNED || to == TaskState::SPILLED;
    case TaskState::SPILLED:
      return to == TaskState::ASSIGNED;
    case TaskState::ASSIGNED:
      return to == TaskState::RUNNING || to == TaskState::LOST;
    case TaskState::RUNNING:
      return to == TaskState::DONE || to == TaskState::LOST;
    case TaskState::DONE:
      return to == TaskState::LOST;
    case TaskState::LOST:
      return to == TaskState::QUEUED_LOCAL;
  }
  return false;
}

void EventRecord::encode(ByteWriter& w) const {
  w.i64(timestamp);
  w.lp_bytes(subject);
  w.lp_bytes(transition);
  w.lp_bytes(node_id);
  w.u64(seq);
}

std::string EventRecord::encode() const {
  ByteWriter w;
  encode(w);
  return w.take();
}

EventRecord EventRecord::decode(ByteReader& r) {
  EventRecord e;
  e.timestamp = r.i64();
  e.subject = std::string(r.lp_bytes());
  e.transition = std::string(r.lp_bytes());
  e.node_id = std::string(r.lp_bytes());
  e.seq = r.u64();
  return e;
}

EventRecord EventRecord::decode(std::string_view bytes) {
  ByteReader r(bytes);
  EventRecord e = decode(r);
  r.expect_end();
  return e;
}

}  // namespace dflow
