#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dflow/bytes.hpp"
#include "dflow/runtime.hpp"
#include "dflow/task.hpp"

namespace dflow {

enum class Table : uint8_t { TASK = 0, OBJECT = 1, FUNCTION = 2, EVENT = 3 };

const char* table_name(Table t);
std::optional<Table> table_from_name(std::string_view name);

// Channel name per the external interface: table name || 0x00 || key bytes.
std::string channel_name(Table t, std::string_view key);

enum class Status : uint8_t {
  OK = 0,
  WRONG_SHARD = 1,
  IMMUTABLE_FIELD_CONFLICT = 2,
  ILLEGAL_TRANSITION = 3,
  TIMEOUT = 4,
  DUPLICATE_CONFLICT = 5,
  CAPACITY_EXCEEDED = 6,
  SOURCE_GONE = 7,
  UNKNOWN_FUNCTION = 8,
  RECONSTRUCTION_FAILED = 9,
  INFEASIBLE = 10,
  SHARD_UNAVAILABLE = 11,
  INVALID_PARAMETER = 12,
  NOT_FOUND = 13,
};

const char* status_name(Status s);

// Notification kinds published on table/key channels.
enum class NotifyKind : uint8_t {
  OBJECT_UPDATE = 0,  // locations/size/creating changed (includes seal)
  OBJECT_LOST = 1,    // location set became empty
  TASK_UPDATE = 2,    // state transition
  RECON_FAILED = 3,   // reconstruction declared impossible
};

// --- Control-plane record snapshots -----------------------------------------

struct ObjectSnap {
  std::vector<std::string> locations;  // sorted node ids
  std::optional<TaskID> creating_task;
  uint64_t size = 0;
  bool lost = false;

  void encode(ByteWriter& w) const;
  static ObjectSnap decode(ByteReader& r);
  bool sealed_anywhere() const { return !locations.empty(); }
};

struct TaskSnap {
  TaskState state = TaskState::SUBMITTED;
  std::string node;
  std::string spec_bytes;

  void encode(ByteWriter& w) const;
  static TaskSnap decode(ByteReader& r);
};

// --- Messages ----------------------------------------------------------------
// Requests carry a leading req_id (0 = no reply expected); replies echo it.

struct MsgPutRecord {
  uint64_t req_id = 0;
  Table table{};
  std::string key;   // 16 bytes
  std::string body;  // per-table record encoding
  std::string encode() const;
  static MsgPutRecord decode(std::string_view p);
};

struct MsgGetRecord {
  uint64_t req_id = 0;
  Table table{};
  std::string key;
  std::string encode() const;
  static MsgGetRecord decode(std::string_view p);
};

struct MsgUpdateState {
  uint64_t req_id = 0;
  TaskID task;
  TaskState state{};
  std::string node;
  std::string encode() const;
  static MsgUpdateState decode(std::string_view p);
};

struct MsgAddLocation {
  uint64_t req_id = 0;
  ObjectID object;
  std::string node;
  uint64_t size = 0;
  std::optional<TaskID> creating_task;
  std::string encode() const;
  static MsgAddLocation decode(std::string_view p);
};

struct MsgRemoveLocation {
  uint64_t req_id = 0;
  ObjectID object;
  std::string node;
  std::string encode() const;
  static MsgRemoveLocation decode(std::string_view p);
};

struct MsgSubscribe {
  uint64_t req_id = 0;
  Table table{};
  bool whole_table = false;
  std::string key;  // 16 bytes when !whole_table
  EndpointId subscriber;
  std::string encode() const;
  static MsgSubscribe decode(std::string_view p);
};

struct MsgScan {
  uint64_t req_id = 0;
  Table table{};
  std::string encode() const;
  static MsgScan decode(std::string_view p);
};

struct MsgNotify {
  Table table{};
  std::string key;
  NotifyKind kind{};
  int64_t timestamp = 0;
  std::string snap;  // encoded ObjectSnap/TaskSnap, empty for RECON_FAILED
  std::string encode() const;
  static MsgNotify decode(std::string_view p);
};

struct MsgReply {
  uint64_t req_id = 0;
  Status status = Status::OK;
  std::string body;
  std::string encode() const;
  static MsgReply decode(std::string_view p);
};

struct MsgAppendEvent {
  uint64_t req_id = 0;
  std::string subject;  // 16 bytes
  std::string transition;
  std::string node;
  std::string encode() const;
  static MsgAppendEvent decode(std::string_view p);
};

struct MsgPublishFail {
  ObjectID object;
  std::string encode() const;
  static MsgPublishFail decode(std::string_view p);
};

struct MsgObjReq {
  uint64_t req_id = 0;
  ObjectID object;
  std::string encode() const;
  static MsgObjReq decode(std::string_view p);
};

struct MsgObjResp {
  uint64_t req_id = 0;
  ObjectID object;
  bool found = false;
  std::string payload;
  std::string encode() const;
  static MsgObjResp decode(std::string_view p);
};

struct MsgPutObj {
  uint64_t req_id = 0;
  ObjectID object;
  std::optional<TaskID> creating_task;
  std::string payload;
  std::string encode() const;
  static MsgPutObj decode(std::string_view p);
};

struct MsgEnsureLocal {
  uint64_t req_id = 0;
  ObjectID object;
  bool local_only = false;
  std::optional<int64_t> deadline;  // absolute clock units
  std::string encode() const;
  static MsgEnsureLocal decode(std::string_view p);
};

struct MsgStoreTick {
  ObjectID object;
  uint64_t gen = 0;
  std::string encode() const;
  static MsgStoreTick decode(std::string_view p);
};

struct MsgDropObj {
  ObjectID object;
  std::string encode() const;
  static MsgDropObj decode(std::string_view p);
};

struct MsgSpill {
  std::string spec_bytes;
  std::string origin_node;
  std::string encode() const;
  static MsgSpill decode(std::string_view p);
};

struct MsgHeartbeat {
  std::string node;
  Resources available;
  uint32_t queue_length = 0;
  std::string encode() const;
  static MsgHeartbeat decode(std::string_view p);
};

struct MsgPlace {
  std::string spec_bytes;
  bool non_spillable = false;
  std::string encode() const;
  static MsgPlace decode(std::string_view p);
};

struct MsgAssign {
  std::string spec_bytes;
  std::string encode() const;
  static MsgAssign decode(std::string_view p);
};

struct MsgTaskFinished {
  TaskID task;
  std::vector<std::string> payloads;
  std::string encode() const;
  static MsgTaskFinished decode(std::string_view p);
};

struct MsgSubmit {
  uint64_t req_id = 0;
  std::string spec_bytes;
  std::string encode() const;
  static MsgSubmit decode(std::string_view p);
};

struct MsgReconstruct {
  ObjectID object;
  std::string encode() const;
  static MsgReconstruct decode(std::string_view p);
};

struct MsgResubmitLost {
  TaskID task;
  std::string encode() const;
  static MsgResubmitLost decode(std::string_view p);
};

struct MsgStatusResp {
  uint32_t worker_index = 0;
  bool busy = false;
  TaskID task;
  std::string encode() const;
  static MsgStatusResp decode(std::string_view p);
};

struct MsgWorkerFailed {
  uint32_t worker_index = 0;
  std::string encode() const;
  static MsgWorkerFailed decode(std::string_view p);
};

}  // namespace dflow
