#include "dflow/control.hpp"

namespace dflow {

namespace {

std::string encode_snap(const ObjectSnap& s) {
  ByteWriter w;
  s.encode(w);
  return w.take();
}

std::string encode_snap(const TaskSnap& s) {
  ByteWriter w;
  s.encode(w);
  return w.take();
}

// Task put body: canonical spec bytes plus the node that first recorded it.
std::string encode_task_put(const TaskSpec& spec, const std::string& node) {
  ByteWriter w;
  w.lp_bytes(spec.encode());
  w.lp_bytes(node);
  return w.take();
}

}  // namespace

// --- ControlShard -----------------------------------------------------------

ControlShard::ControlShard(Runtime* rt, uint32_t index, uint32_t num_shards,
                           EndpointId self)
    : rt_(rt), index_(index), num_shards_(num_shards), self_(std::move(self)) {}

void ControlShard::reply(const Frame& req, uint64_t req_id, Status st, std::string body) {
  if (req_id == 0) return;
  MsgReply m{req_id, st, std::move(body)};
  rt_->send(Frame{MsgType::REPLY, self_, req.src, m.encode()});
}

void ControlShard::notify(Table t, const std::string& key, NotifyKind kind,
                          const std::string& snap) {
  MsgNotify m{t, key, kind, rt_->now(), snap};
  std::string payload = m.encode();
  std::set<EndpointId> sent;
  auto ks = key_subs_.find(channel_name(t, key));
  if (ks != key_subs_.end()) {
    for (const auto& sub : ks->second) {
      rt_->send(Frame{MsgType::NOTIFY, self_, sub, payload});
      sent.insert(sub);
    }
  }
  auto ts = table_subs_.find(static_cast<uint8_t>(t));
  if (ts != table_subs_.end()) {
    for (const auto& sub : ts->second) {
      if (!sent.count(sub)) rt_->send(Frame{MsgType::NOTIFY, self_, sub, payload});
    }
  }
}

void ControlShard::append_event(const std::string& subject, const std::string& transition,
                                const std::string& node) {
  events_.push_back(EventRecord{rt_->now(), subject, transition, node, next_event_seq_++});
}

ObjectSnap ControlShard::snap_of(const ObjectRec& r) const {
  ObjectSnap s;
  s.locations.assign(r.locations.begin(), r.locations.end());
  s.creating_task = r.creating;
  s.size = r.size;
  s.lost = r.lost;
  return s;
}

void ControlShard::handle(Frame f) {
  try {
    switch (f.type) {
      case MsgType::PUT_RECORD: on_put_record(f); break;
      case MsgType::GET_RECORD: on_get_record(f); break;
      case MsgType::UPDATE_STATE: on_update_state(f); break;
      case MsgType::ADD_LOCATION: on_add_location(f); break;
      case MsgType::REMOVE_LOCATION: on_remove_location(f); break;
      case MsgType::SUBSCRIBE: on_subscribe(f, false); break;
      case MsgType::UNSUBSCRIBE: on_subscribe(f, true); break;
      case MsgType::SCAN: on_scan(f); break;
      case MsgType::APPEND_EVENT: {
        auto m = MsgAppendEvent::decode(f.payload);
        append_event(m.subject, m.transition, m.node);
        reply(f, m.req_id, Status::OK);
        break;
      }
      case MsgType::PUBLISH_FAIL: {
        auto m = MsgPublishFail::decode(f.payload);
        std::string key(m.object.bytes());
        append_event(key, "RECON_FAILED", "");
        notify(Table::OBJECT, key, NotifyKind::RECON_FAILED, "");
        break;
      }
      default:
        break;  // not addressed to a shard; drop
    }
  } catch (const MalformedEncoding&) {
    // A malformed request cannot be answered meaningfully; drop it.
  }
}

void ControlShard::on_put_record(const Frame& f) {
  auto m = MsgPutRecord::decode(f.payload);
  if (shard_of(m.key, num_shards_) != index_) {
    reply(f, m.req_id, Status::WRONG_SHARD);
    return;
  }
  switch (m.table) {
    case Table::TASK: {
      ByteReader r(m.body);
      std::string spec_bytes(r.lp_bytes());
      std::string node(r.lp_bytes());
      auto it = tasks_.find(m.key);
      if (it != tasks_.end()) {
        // The spec is write-once; an identical resubmission is idempotent.
        if (it->second.spec_bytes != spec_bytes) {
          reply(f, m.req_id, Status::IMMUTABLE_FIELD_CONFLICT);
          return;
        }
        reply(f, m.req_id, Status::OK);
        return;
      }
      tasks_[m.key] = TaskRec{spec_bytes, TaskState::SUBMITTED, node};
      append_event(m.key, task_state_name(TaskState::SUBMITTED), node);
      notify(Table::TASK, m.key, NotifyKind::TASK_UPDATE,
             encode_snap(TaskSnap{TaskState::SUBMITTED, node, spec_bytes}));
      reply(f, m.req_id, Status::OK);
      break;
    }
    case Table::FUNCTION: {
      auto it = functions_.find(m.key);
      if (it != functions_.end() && it->second != m.body) {
        reply(f, m.req_id, Status::IMMUTABLE_FIELD_CONFLICT);
        return;
      }
      functions_[m.key] = m.body;
      reply(f, m.req_id, Status::OK);
      break;
    }
    default:
      reply(f, m.req_id, Status::INVALID_PARAMETER);
      break;
  }
}

void ControlShard::on_get_record(const Frame& f) {
  auto m = MsgGetRecord::decode(f.payload);
  if (shard_of(m.key, num_shards_) != index_) {
    reply(f, m.req_id, Status::WRONG_SHARD);
    return;
  }
  switch (m.table) {
    case Table::TASK: {
      auto it = tasks_.find(m.key);
      if (it == tasks_.end()) {
        reply(f, m.req_id, Status::NOT_FOUND);
        return;
      }
      reply(f, m.req_id, Status::OK,
            encode_snap(TaskSnap{it->second.state, it->second.node, it->second.spec_bytes}));
      break;
    }
    case Table::OBJECT: {
      auto it = objects_.find(m.key);
      if (it == objects_.end()) {
        reply(f, m.req_id, Status::NOT_FOUND);
        return;
      }
      reply(f, m.req_id, Status::OK, encode_snap(snap_of(it->second)));
      break;
    }
    case Table::FUNCTION: {
      auto it = functions_.find(m.key);
      if (it == functions_.end()) {
        reply(f, m.req_id, Status::NOT_FOUND);
        return;
      }
      reply(f, m.req_id, Status::OK, it->second);
      break;
    }
    default:
      reply(f, m.req_id, Status::INVALID_PARAMETER);
      break;
  }
}

void ControlShard::on_update_state(const Frame& f) {
  auto m = MsgUpdateState::decode(f.payload);
  std::string key(m.task.bytes());
  if (shard_of(key, num_shards_) != index_) {
    reply(f, m.req_id, Status::WRONG_SHARD);
    return;
  }
  auto it = tasks_.find(key);
  if (it == tasks_.end()) {
    reply(f, m.req_id, Status::NOT_FOUND);
    return;
  }
  TaskRec& rec = it->second;
  if (rec.state == m.state && (m.node.empty() || rec.node == m.node)) {
    reply(f, m.req_id, Status::OK);  // duplicate of an applied update
    return;
  }
  if (!task_transition_legal(rec.state, m.state)) {
    reply(f, m.req_id, Status::ILLEGAL_TRANSITION);
    return;
  }
  rec.state = m.state;
  if (!m.node.empty() || m.state == TaskState::LOST) rec.node = m.node;
  append_event(key, task_state_name(m.state), rec.node);
  notify(Table::TASK, key, NotifyKind::TASK_UPDATE,
         encode_snap(TaskSnap{rec.state, rec.node, rec.spec_bytes}));
  reply(f, m.req_id, Status::OK);
}

void ControlShard::on_add_location(const Frame& f) {
  auto m = MsgAddLocation::decode(f.payload);
  std::string key(m.object.bytes());
  if (shard_of(key, num_shards_) != index_) {
    reply(f, m.req_id, Status::WRONG_SHARD);
    return;
  }
  ObjectRec& rec = objects_[key];
  if (m.creating_task) {
    if (rec.creating && *rec.creating != *m.creating_task) {
      reply(f, m.req_id, Status::IMMUTABLE_FIELD_CONFLICT);
      return;
    }
    rec.creating = m.creating_task;
  }
  bool inserted = rec.locations.insert(m.node).second;
  bool was_lost = rec.lost;
  rec.lost = false;
  if (m.size > rec.size) rec.size = m.size;
  if (inserted || was_lost) {
    append_event(key, "LOCATED", m.node);
    notify(Table::OBJECT, key, NotifyKind::OBJECT_UPDATE, encode_snap(snap_of(rec)));
  }
  reply(f, m.req_id, Status::OK);
}

void ControlShard::on_remove_location(const Frame& f) {
  auto m = MsgRemoveLocation::decode(f.payload);
  std::string key(m.object.bytes());
  if (shard_of(key, num_shards_) != index_) {
    reply(f, m.req_id, Status::WRONG_SHARD);
    return;
  }
  auto it = objects_.find(key);
  if (it == objects_.end()) {
    reply(f, m.req_id, Status::OK);  // unknown object: nothing to remove
    return;
  }
  ObjectRec& rec = it->second;
  bool erased = rec.locations.erase(m.node) > 0;
  if (erased && rec.locations.empty() && !rec.lost) {
    rec.lost = true;
    append_event(key, "LOST", m.node);
    notify(Table::OBJECT, key, NotifyKind::OBJECT_LOST, encode_snap(snap_of(rec)));
  } else if (erased) {
    notify(Table::OBJECT, key, NotifyKind::OBJECT_UPDATE, encode_snap(snap_of(rec)));
  }
  reply(f, m.req_id, Status::OK);
}

void ControlShard::on_subscribe(const Frame& f, bool unsubscribe) {
  auto m = MsgSubscribe::decode(f.payload);
  EndpointId sub = m.subscriber.empty() ? f.src : m.subscriber;
  if (m.whole_table) {
    if (unsubscribe)
      table_subs_[static_cast<uint8_t>(m.table)].erase(sub);
    else
      table_subs_[static_cast<uint8_t>(m.table)].insert(sub);
  } else {
    if (shard_of(m.key, num_shards_) != index_) {
      reply(f, m.req_id, Status::WRONG_SHARD);
      return;
    }
    std::string chan = channel_name(m.table, m.key);
    if (unsubscribe) {
      auto it = key_subs_.find(chan);
      if (it != key_subs_.end()) {
        it->second.erase(sub);
        if (it->second.empty()) key_subs_.erase(it);
      }
    } else {
      key_subs_[chan].insert(sub);
    }
  }
  reply(f, m.req_id, Status::OK);
}

void ControlShard::on_scan(const Frame& f) {
  auto m = MsgScan::decode(f.payload);
  ByteWriter w;
  switch (m.table) {
    case Table::TASK:
      w.u32(static_cast<uint32_t>(tasks_.size()));
      for (const auto& [key, rec] : tasks_) {
        w.raw(key);
        w.lp_bytes(encode_snap(TaskSnap{rec.state, rec.node, rec.spec_bytes}));
      }
      break;
    case Table::OBJECT:
      w.u32(static_cast<uint32_t>(objects_.size()));
      for (const auto& [key, rec] : objects_) {
        w.raw(key);
        w.lp_bytes(encode_snap(snap_of(rec)));
      }
      break;
    case Table::FUNCTION:
      w.u32(static_cast<uint32_t>(functions_.size()));
      for (const auto& [key, name] : functions_) {
        w.raw(key);
        w.lp_bytes(name);
      }
      break;
    case Table::EVENT:
      w.u32(static_cast<uint32_t>(events_.size()));
      for (const auto& ev : events_) w.lp_bytes(ev.encode());
      break;
  }
  reply(f, m.req_id, Status::OK, w.take());
}

// --- ControlClient ----------------------------------------------------------

ControlClient::ControlClient(Runtime* rt, EndpointId self, uint32_t num_shards)
    : rt_(rt), self_(std::move(self)), num_shards_(num_shards) {}

EndpointId ControlClient::shard_endpoint(uint32_t index) {
  return "shard/" + std::to_string(index);
}

uint64_t ControlClient::track(ReplyCb cb) {
  if (!cb) return 0;
  // Odd ids only: owners of the shared mailbox (driver, workers) use even ids
  // for their own requests, so replies never cross between the two spaces.
  uint64_t id = next_req_;
  next_req_ += 2;
  pending_[id] = std::move(cb);
  return id;
}

void ControlClient::send_keyed(MsgType type, std::string_view key16, std::string payload) {
  uint32_t shard = shard_of(key16, num_shards_);
  rt_->send(Frame{type, self_, shard_endpoint(shard), std::move(payload)});
}

void ControlClient::put_task_spec(const TaskSpec& spec, const std::string& origin_node,
                                  ReplyCb cb) {
  MsgPutRecord m;
  m.req_id = track(std::move(cb));
  m.table = Table::TASK;
  m.key = std::string(spec.task_id.bytes());
  m.body = encode_task_put(spec, origin_node);
  send_keyed(MsgType::PUT_RECORD, m.key, m.encode());
}

void ControlClient::put_function(const std::string& name) {
  MsgPutRecord m;
  m.table = Table::FUNCTION;
  m.key = sha256(name).substr(0, kIdSize);
  m.body = name;
  send_keyed(MsgType::PUT_RECORD, m.key, m.encode());
}

void ControlClient::update_state(const TaskID& task, TaskState state,
                                 const std::string& node, ReplyCb cb) {
  MsgUpdateState m;
  m.req_id = track(std::move(cb));
  m.task = task;
  m.state = state;
  m.node = node;
  send_keyed(MsgType::UPDATE_STATE, task.bytes(), m.encode());
}

void ControlClient::add_location(const ObjectID& object, const std::string& node,
                                 uint64_t size, std::optional<TaskID> creating, ReplyCb cb) {
  MsgAddLocation m;
  m.req_id = track(std::move(cb));
  m.object = object;
  m.node = node;
  m.size = size;
  m.creating_task = creating;
  send_keyed(MsgType::ADD_LOCATION, object.bytes(), m.encode());
}

void ControlClient::remove_location(const ObjectID& object, const std::string& node,
                                    ReplyCb cb) {
  MsgRemoveLocation m;
  m.req_id = track(std::move(cb));
  m.object = object;
  m.node = node;
  send_keyed(MsgType::REMOVE_LOCATION, object.bytes(), m.encode());
}

void ControlClient::get_object(const ObjectID& object, ObjectCb cb) {
  MsgGetRecord m;
  m.req_id = track([cb = std::move(cb)](const MsgReply& rep) {
    if (rep.status != Status::OK) {
      cb(rep.status, std::nullopt);
      return;
    }
    ByteReader r(rep.body);
    cb(Status::OK, ObjectSnap::decode(r));
  });
  m.table = Table::OBJECT;
  m.key = std::string(object.bytes());
  send_keyed(MsgType::GET_RECORD, m.key, m.encode());
}

void ControlClient::get_task(const TaskID& task, TaskCb cb) {
  MsgGetRecord m;
  m.req_id = track([cb = std::move(cb)](const MsgReply& rep) {
    if (rep.status != Status::OK) {
      cb(rep.status, std::nullopt);
      return;
    }
    ByteReader r(rep.body);
    cb(Status::OK, TaskSnap::decode(r));
  });
  m.table = Table::TASK;
  m.key = std::string(task.bytes());
  send_keyed(MsgType::GET_RECORD, m.key, m.encode());
}

void ControlClient::subscribe_object(const ObjectID& object) {
  MsgSubscribe m;
  m.table = Table::OBJECT;
  m.key = std::string(object.bytes());
  m.subscriber = self_;
  send_keyed(MsgType::SUBSCRIBE, m.key, m.encode());
}

void ControlClient::unsubscribe_object(const ObjectID& object) {
  MsgSubscribe m;
  m.table = Table::OBJECT;
  m.key = std::string(object.bytes());
  m.subscriber = self_;
  send_keyed(MsgType::UNSUBSCRIBE, m.key, m.encode());
}

void ControlClient::subscribe_task(const TaskID& task) {
  MsgSubscribe m;
  m.table = Table::TASK;
  m.key = std::string(task.bytes());
  m.subscriber = self_;
  send_keyed(MsgType::SUBSCRIBE, m.key, m.encode());
}

void ControlClient::subscribe_table(Table t) {
  MsgSubscribe m;
  m.table = t;
  m.whole_table = true;
  m.subscriber = self_;
  // Whole-table subscriptions go to every shard.
  for (uint32_t i = 0; i < num_shards_; ++i)
    rt_->send(Frame{MsgType::SUBSCRIBE, self_, shard_endpoint(i), m.encode()});
}

void ControlClient::append_event(const std::string& subject16, const std::string& transition,
                                 const std::string& node) {
  MsgAppendEvent m;
  m.subject = subject16;
  m.transition = transition;
  m.node = node;
  send_keyed(MsgType::APPEND_EVENT, subject16, m.encode());
}

void ControlClient::publish_fail(const ObjectID& object) {
  MsgPublishFail m{object};
  send_keyed(MsgType::PUBLISH_FAIL, object.bytes(), m.encode());
}

void ControlClient::scan_shard(Table t, uint32_t shard, ReplyCb cb) {
  MsgScan m;
  m.req_id = track(std::move(cb));
  m.table = t;
  rt_->send(Frame{MsgType::SCAN, self_, shard_endpoint(shard), m.encode()});
}

bool ControlClient::handle_reply(const Frame& f) {
  if (f.type != MsgType::REPLY) return false;
  MsgReply rep = MsgReply::decode(f.payload);
  auto it = pending_.find(rep.req_id);
  if (it == pending_.end()) return false;
  ReplyCb cb = std::move(it->second);
  pending_.erase(it);
  cb(rep);
  return true;
}

// --- Scan decoding ----------------------------------------------------------

std::vector<ScannedObject> decode_object_scan(const std::string& body) {
  ByteReader r(body);
  uint32_t n = r.u32();
  std::vector<ScannedObject> out;
  out.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    ScannedObject s;
    s.id = ObjectID::from_bytes(r.raw(kIdSize));
    ByteReader sr(r.lp_bytes());
    s.snap = ObjectSnap::decode(sr);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ScannedTask> decode_task_scan(const std::string& body) {
  ByteReader r(body);
  uint32_t n = r.u32();
  std::vector<ScannedTask> out;
  out.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    ScannedTask s;
    s.id = TaskID::from_bytes(r.raw(kIdSize));
    ByteReader sr(r.lp_bytes());
    s.snap = TaskSnap::decode(sr);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<EventRecord> decode_event_scan(const std::string& body) {
  ByteReader r(body);
  uint32_t n = r.u32();
  std::vector<EventRecord> out;
  out.reserve(n);
  for (uint32_t i = 0; i < n; ++i) out.push_back(EventRecord::decode(r.lp_bytes()));
  return out;
}

std::vector<std::pair<std::string, std::string>> decode_function_scan(const std::string& body) {
  ByteReader r(body);
  uint32_t n = r.u32();
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    std::string key(r.raw(kIdSize));
    std::string name(r.lp_bytes());
    out.emplace_back(std::move(key), std::move(name));
  }
  return out;
}

}  // namespace dflow
