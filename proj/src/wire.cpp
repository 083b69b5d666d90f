#include "dflow/wire.hpp"

namespace dflow {

const char* table_name(Table t) {
  switch (t) {
    case Table::TASK: return "task";
    case Table::OBJECT: return "object";
    case Table::FUNCTION: return "function";
    case Table::EVENT: return "event";
  }
  return "?";
}

std::optional<Table> table_from_name(std::string_view name) {
  if (name == "task") return Table::TASK;
  if (name == "object") return Table::OBJECT;
  if (name == "function") return Table::FUNCTION;
  if (name == "event") return Table::EVENT;
  return std::nullopt;
}

std::string channel_name(Table t, std::string_view key) {
  std::string s(table_name(t));
  s.push_back('\0');
  s.append(key);
  return s;
}

const char* status_name(Status s) {
  switch (s) {
    case Status::OK: return "OK";
    case Status::WRONG_SHARD: return "WrongShard";
    case Status::IMMUTABLE_FIELD_CONFLICT: return "ImmutableFieldConflict";
    case Status::ILLEGAL_TRANSITION: return "IllegalTransition";
    case Status::TIMEOUT: return "Timeout";
    case Status::DUPLICATE_CONFLICT: return "DuplicateConflict";
    case Status::CAPACITY_EXCEEDED: return "CapacityExceeded";
    case Status::SOURCE_GONE: return "SourceGone";
    case Status::UNKNOWN_FUNCTION: return "UnknownFunction";
    case Status::RECONSTRUCTION_FAILED: return "ReconstructionFailed";
    case Status::INFEASIBLE: return "Infeasible";
    case Status::SHARD_UNAVAILABLE: return "ShardUnavailable";
    case Status::INVALID_PARAMETER: return "InvalidParameter";
    case Status::NOT_FOUND: return "NotFound";
  }
  return "?";
}

namespace {

void put_opt_id(ByteWriter& w, const std::optional<TaskID>& id) {
  if (id) {
    w.u8(1);
    w.raw(id->bytes());
  } else {
    w.u8(0);
  }
}

std::optional<TaskID> get_opt_id(ByteReader& r) {
  if (r.u8() == 0) return std::nullopt;
  return TaskID::from_bytes(r.raw(kIdSize));
}

}  // namespace

void ObjectSnap::encode(ByteWriter& w) const {
  w.u32(static_cast<uint32_t>(locations.size()));
  for (const auto& n : locations) w.lp_bytes(n);
  put_opt_id(w, creating_task);
  w.u64(size);
  w.u8(lost ? 1 : 0);
}

ObjectSnap ObjectSnap::decode(ByteReader& r) {
  ObjectSnap s;
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) s.locations.emplace_back(r.lp_bytes());
  s.creating_task = get_opt_id(r);
  s.size = r.u64();
  s.lost = r.u8() != 0;
  return s;
}

void TaskSnap::encode(ByteWriter& w) const {
  w.u8(static_cast<uint8_t>(state));
  w.lp_bytes(node);
  w.lp_bytes(spec_bytes);
}

TaskSnap TaskSnap::decode(ByteReader& r) {
  TaskSnap s;
  s.state = static_cast<TaskState>(r.u8());
  s.node = std::string(r.lp_bytes());
  s.spec_bytes = std::string(r.lp_bytes());
  return s;
}

// ---------------------------------------------------------------------------

std::string MsgPutRecord::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.u8(static_cast<uint8_t>(table));
  w.raw(key);
  w.raw(body);
  return w.take();
}
MsgPutRecord MsgPutRecord::decode(std::string_view p) {
  ByteReader r(p);
  MsgPutRecord m;
  m.req_id = r.u64();
  m.table = static_cast<Table>(r.u8());
  m.key = std::string(r.raw(kIdSize));
  m.body = std::string(r.rest());
  return m;
}

std::string MsgGetRecord::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.u8(static_cast<uint8_t>(table));
  w.raw(key);
  return w.take();
}
MsgGetRecord MsgGetRecord::decode(std::string_view p) {
  ByteReader r(p);
  MsgGetRecord m;
  m.req_id = r.u64();
  m.table = static_cast<Table>(r.u8());
  m.key = std::string(r.raw(kIdSize));
  r.expect_end();
  return m;
}

std::string MsgUpdateState::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.raw(task.bytes());
  w.u8(static_cast<uint8_t>(state));
  w.lp_bytes(node);
  return w.take();
}
MsgUpdateState MsgUpdateState::decode(std::string_view p) {
  ByteReader r(p);
  MsgUpdateState m;
  m.req_id = r.u64();
  m.task = TaskID::from_bytes(r.raw(kIdSize));
  m.state = static_cast<TaskState>(r.u8());
  m.node = std::string(r.lp_bytes());
  r.expect_end();
  return m;
}

std::string MsgAddLocation::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.raw(object.bytes());
  w.lp_bytes(node);
  w.u64(size);
  put_opt_id(w, creating_task);
  return w.take();
}
MsgAddLocation MsgAddLocation::decode(std::string_view p) {
  ByteReader r(p);
  MsgAddLocation m;
  m.req_id = r.u64();
  m.object = ObjectID::from_bytes(r.raw(kIdSize));
  m.node = std::string(r.lp_bytes());
  m.size = r.u64();
  m.creating_task = get_opt_id(r);
  r.expect_end();
  return m;
}

std::string MsgRemoveLocation::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.raw(object.bytes());
  w.lp_bytes(node);
  return w.take();
}
MsgRemoveLocation MsgRemoveLocation::decode(std::string_view p) {
  ByteReader r(p);
  MsgRemoveLocation m;
  m.req_id = r.u64();
  m.object = ObjectID::from_bytes(r.raw(kIdSize));
  m.node = std::string(r.lp_bytes());
  r.expect_end();
  return m;
}

std::string MsgSubscribe::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.u8(static_cast<uint8_t>(table));
  w.u8(whole_table ? 1 : 0);
  w.raw(whole_table ? std::string(kIdSize, '\0') : key);
  w.lp_bytes(subscriber);
  return w.take();
}
MsgSubscribe MsgSubscribe::decode(std::string_view p) {
  ByteReader r(p);
  MsgSubscribe m;
  m.req_id = r.u64();
  m.table = static_cast<Table>(r.u8());
  m.whole_table = r.u8() != 0;
  m.key = std::string(r.raw(kIdSize));
  m.subscriber = std::string(r.lp_bytes());
  r.expect_end();
  return m;
}

std::string MsgScan::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.u8(static_cast<uint8_t>(table));
  return w.take();
}
MsgScan MsgScan::decode(std::string_view p) {
  ByteReader r(p);
  MsgScan m;
  m.req_id = r.u64();
  m.table = static_cast<Table>(r.u8());
  r.expect_end();
  return m;
}

std::string MsgNotify::encode() const {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(table));
  w.raw(key);
  w.u8(static_cast<uint8_t>(kind));
  w.i64(timestamp);
  w.lp_bytes(snap);
  return w.take();
}
MsgNotify MsgNotify::decode(std::string_view p) {
  ByteReader r(p);
  MsgNotify m;
  m.table = static_cast<Table>(r.u8());
  m.key = std::string(r.raw(kIdSize));
  m.kind = static_cast<NotifyKind>(r.u8());
  m.timestamp = r.i64();
  m.snap = std::string(r.lp_bytes());
  r.expect_end();
  return m;
}

std::string MsgReply::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.u8(static_cast<uint8_t>(status));
  w.raw(body);
  return w.take();
}
MsgReply MsgReply::decode(std::string_view p) {
  ByteReader r(p);
  MsgReply m;
  m.req_id = r.u64();
  m.status = static_cast<Status>(r.u8());
  m.body = std::string(r.rest());
  return m;
}

std::string MsgAppendEvent::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.raw(subject);
  w.lp_bytes(transition);
  w.lp_bytes(node);
  return w.take();
}
MsgAppendEvent MsgAppendEvent::decode(std::string_view p) {
  ByteReader r(p);
  MsgAppendEvent m;
  m.req_id = r.u64();
  m.subject = std::string(r.raw(kIdSize));
  m.transition = std::string(r.lp_bytes());
  m.node = std::string(r.lp_bytes());
  r.expect_end();
  return m;
}

std::string MsgPublishFail::encode() const {
  ByteWriter w;
  w.raw(object.bytes());
  return w.take();
}
MsgPublishFail MsgPublishFail::decode(std::string_view p) {
  ByteReader r(p);
  MsgPublishFail m;
  m.object = ObjectID::from_bytes(r.raw(kIdSize));
  r.expect_end();
  return m;
}

std::string MsgObjReq::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.raw(object.bytes());
  return w.take();
}
MsgObjReq MsgObjReq::decode(std::string_view p) {
  ByteReader r(p);
  MsgObjReq m;
  m.req_id = r.u64();
  m.object = ObjectID::from_bytes(r.raw(kIdSize));
  r.expect_end();
  return m;
}

std::string MsgObjResp::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.raw(object.bytes());
  w.u8(found ? 1 : 0);
  w.raw(payload);
  return w.take();
}
MsgObjResp MsgObjResp::decode(std::string_view p) {
  ByteReader r(p);
  MsgObjResp m;
  m.req_id = r.u64();
  m.object = ObjectID::from_bytes(r.raw(kIdSize));
  m.found = r.u8() != 0;
  m.payload = std::string(r.rest());
  return m;
}

std::string MsgPutObj::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.raw(object.bytes());
  put_opt_id(w, creating_task);
  w.raw(payload);
  return w.take();
}
MsgPutObj MsgPutObj::decode(std::string_view p) {
  ByteReader r(p);
  MsgPutObj m;
  m.req_id = r.u64();
  m.object = ObjectID::from_bytes(r.raw(kIdSize));
  m.creating_task = get_opt_id(r);
  m.payload = std::string(r.rest());
  return m;
}

std::string MsgEnsureLocal::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.raw(object.bytes());
  w.u8(local_only ? 1 : 0);
  w.u8(deadline ? 1 : 0);
  w.i64(deadline.value_or(0));
  return w.take();
}
MsgEnsureLocal MsgEnsureLocal::decode(std::string_view p) {
  ByteReader r(p);
  MsgEnsureLocal m;
  m.req_id = r.u64();
  m.object = ObjectID::from_bytes(r.raw(kIdSize));
  m.local_only = r.u8() != 0;
  bool has = r.u8() != 0;
  int64_t d = r.i64();
  if (has) m.deadline = d;
  r.expect_end();
  return m;
}

std::string MsgStoreTick::encode() const {
  ByteWriter w;
  w.raw(object.bytes());
  w.u64(gen);
  return w.take();
}
MsgStoreTick MsgStoreTick::decode(std::string_view p) {
  ByteReader r(p);
  MsgStoreTick m;
  m.object = ObjectID::from_bytes(r.raw(kIdSize));
  m.gen = r.u64();
  r.expect_end();
  return m;
}

std::string MsgDropObj::encode() const {
  ByteWriter w;
  w.raw(object.bytes());
  return w.take();
}
MsgDropObj MsgDropObj::decode(std::string_view p) {
  ByteReader r(p);
  MsgDropObj m;
  m.object = ObjectID::from_bytes(r.raw(kIdSize));
  r.expect_end();
  return m;
}

std::string MsgSpill::encode() const {
  ByteWriter w;
  w.lp_bytes(spec_bytes);
  w.lp_bytes(origin_node);
  return w.take();
}
MsgSpill MsgSpill::decode(std::string_view p) {
  ByteReader r(p);
  MsgSpill m;
  m.spec_bytes = std::string(r.lp_bytes());
  m.origin_node = std::string(r.lp_bytes());
  r.expect_end();
  return m;
}

std::string MsgHeartbeat::encode() const {
  ByteWriter w;
  w.lp_bytes(node);
  w.u32(available.cpu);
  w.u32(available.gpu);
  w.u32(queue_length);
  return w.take();
}
MsgHeartbeat MsgHeartbeat::decode(std::string_view p) {
  ByteReader r(p);
  MsgHeartbeat m;
  m.node = std::string(r.lp_bytes());
  m.available.cpu = r.u32();
  m.available.gpu = r.u32();
  m.queue_length = r.u32();
  r.expect_end();
  return m;
}

std::string MsgPlace::encode() const {
  ByteWriter w;
  w.lp_bytes(spec_bytes);
  w.u8(non_spillable ? 1 : 0);
  return w.take();
}
MsgPlace MsgPlace::decode(std::string_view p) {
  ByteReader r(p);
  MsgPlace m;
  m.spec_bytes = std::string(r.lp_bytes());
  m.non_spillable = r.u8() != 0;
  r.expect_end();
  return m;
}

std::string MsgAssign::encode() const {
  ByteWriter w;
  w.lp_bytes(spec_bytes);
  return w.take();
}
MsgAssign MsgAssign::decode(std::string_view p) {
  ByteReader r(p);
  MsgAssign m;
  m.spec_bytes = std::string(r.lp_bytes());
  r.expect_end();
  return m;
}

std::string MsgTaskFinished::encode() const {
  ByteWriter w;
  w.raw(task.bytes());
  w.u32(static_cast<uint32_t>(payloads.size()));
  for (const auto& p : payloads) w.lp_bytes(p);
  return w.take();
}
MsgTaskFinished MsgTaskFinished::decode(std::string_view p) {
  ByteReader r(p);
  MsgTaskFinished m;
  m.task = TaskID::from_bytes(r.raw(kIdSize));
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) m.payloads.emplace_back(r.lp_bytes());
  r.expect_end();
  return m;
}

std::string MsgSubmit::encode() const {
  ByteWriter w;
  w.u64(req_id);
  w.lp_bytes(spec_bytes);
  return w.take();
}
MsgSubmit MsgSubmit::decode(std::string_view p) {
  ByteReader r(p);
  MsgSubmit m;
  m.req_id = r.u64();
  m.spec_bytes = std::string(r.lp_bytes());
  r.expect_end();
  return m;
}

std::string MsgReconstruct::encode() const {
  ByteWriter w;
  w.raw(object.bytes());
  return w.take();
}
MsgReconstruct MsgReconstruct::decode(std::string_view p) {
  ByteReader r(p);
  MsgReconstruct m;
  m.object = ObjectID::from_bytes(r.raw(kIdSize));
  r.expect_end();
  return m;
}

std::string MsgResubmitLost::encode() const {
  ByteWriter w;
  w.raw(task.bytes());
  return w.take();
}
MsgResubmitLost MsgResubmitLost::decode(std::string_view p) {
  ByteReader r(p);
  MsgResubmitLost m;
  m.task = TaskID::from_bytes(r.raw(kIdSize));
  r.expect_end();
  return m;
}

std::string MsgStatusResp::encode() const {
  ByteWriter w;
  w.u32(worker_index);
  w.u8(busy ? 1 : 0);
  w.raw(task.bytes());
  return w.take();
}
MsgStatusResp MsgStatusResp::decode(std::string_view p) {
  ByteReader r(p);
  MsgStatusResp m;
  m.worker_index = r.u32();
  m.busy = r.u8() != 0;
  m.task = TaskID::from_bytes(r.raw(kIdSize));
  r.expect_end();
  return m;
}

std::string MsgWorkerFailed::encode() const {
  ByteWriter w;
  w.u32(worker_index);
  return w.take();
}
MsgWorkerFailed MsgWorkerFailed::decode(std::string_view p) {
  ByteReader r(p);
  MsgWorkerFailed m;
  m.worker_index = r.u32();
  r.expect_end();
  return m;
}

}  // namespace dflow
