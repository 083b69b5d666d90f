#include "dflow/store.hpp"

#include <algorithm>

namespace dflow {

EndpointId store_endpoint_for_node(const std::string& node_id) {
  if (node_id == "driver") return "driver/store";
  // "n3" -> "node/3/store"
  return "node/" + node_id.substr(1) + "/store";
}

ObjectStore::ObjectStore(Runtime* rt, EndpointId self, std::string node_id,
                         uint32_t num_shards, uint32_t num_globals, uint64_t capacity,
                         int64_t retry_interval)
    : rt_(rt),
      self_(std::move(self)),
      node_id_(std::move(node_id)),
      num_globals_(num_globals),
      capacity_(capacity),
      retry_interval_(retry_interval),
      control_(rt, self_, num_shards) {}

void ObjectStore::handle(Frame f) {
  try {
    switch (f.type) {
      case MsgType::PUT_OBJ: on_put_obj(f); break;
      case MsgType::ENSURE_LOCAL: on_ensure_local(f); break;
      case MsgType::OBJ_REQ: on_obj_req(f); break;
      case MsgType::OBJ_RESP: on_obj_resp(f); break;
      case MsgType::STORE_TICK: on_tick(f); break;
      case MsgType::NOTIFY: on_notify(f); break;
      case MsgType::DROP_OBJ: on_drop(f); break;
      case MsgType::REPLY: control_.handle_reply(f); break;
      default: break;
    }
  } catch (const MalformedEncoding&) {
  }
}

void ObjectStore::reply_waiter(const Waiter& w, Status st, const std::string& payload) {
  if (w.req_id == 0) return;
  MsgReply m{w.req_id, st, payload};
  rt_->send(Frame{MsgType::REPLY, self_, w.reply_to, m.encode()});
}

Status ObjectStore::seal_local(const ObjectID& obj, const std::string& payload,
                               std::optional<TaskID> creating) {
  auto it = sealed_.find(obj);
  if (it != sealed_.end())
    return it->second == payload ? Status::OK : Status::DUPLICATE_CONFLICT;
  if (used_ + payload.size() > capacity_) return Status::CAPACITY_EXCEEDED;
  sealed_[obj] = payload;
  used_ += payload.size();
  control_.add_location(obj, node_id_, payload.size(), creating);
  fulfill(obj, Status::OK, payload);
  return Status::OK;
}

void ObjectStore::fulfill(const ObjectID& obj, Status st, const std::string& payload) {
  auto it = pending_.find(obj);
  if (it == pending_.end()) return;
  for (const Waiter& w : it->second.waiters) reply_waiter(w, st, payload);
  if (it->second.subscribed) control_.unsubscribe_object(obj);
  pending_.erase(it);
}

void ObjectStore::ensure_tick(const ObjectID& obj, Pending& p) {
  if (p.tick_scheduled) return;
  int64_t at = rt_->now() + retry_interval_;
  for (const Waiter& w : p.waiters)
    if (w.deadline && *w.deadline < at) at = *w.deadline;
  p.tick_scheduled = true;
  MsgStoreTick m{obj, p.gen};
  rt_->schedule(self_, Frame{MsgType::STORE_TICK, self_, self_, m.encode()},
                std::max<int64_t>(at - rt_->now(), 0));
}

void ObjectStore::on_put_obj(const Frame& f) {
  auto m = MsgPutObj::decode(f.payload);
  Status st = seal_local(m.object, m.payload, m.creating_task);
  if (m.req_id != 0) {
    MsgReply rep{m.req_id, st, {}};
    rt_->send(Frame{MsgType::REPLY, self_, f.src, rep.encode()});
  }
}

void ObjectStore::on_ensure_local(const Frame& f) {
  auto m = MsgEnsureLocal::decode(f.payload);
  auto it = sealed_.find(m.object);
  if (it != sealed_.end()) {
    Waiter w{m.req_id, f.src, std::nullopt, m.local_only};
    reply_waiter(w, Status::OK, it->second);
    return;
  }
  if (m.local_only && m.deadline && *m.deadline <= rt_->now()) {
    Waiter w{m.req_id, f.src, std::nullopt, true};
    reply_waiter(w, Status::TIMEOUT, {});
    return;
  }
  Pending& p = pending_[m.object];
  if (p.gen == 0) p.gen = next_gen_++;
  p.waiters.push_back(Waiter{m.req_id, f.src, m.deadline, m.local_only});
  if (!m.local_only && !p.subscribed) {
    // Subscribe before the lookup on the same shard: its serial order
    // guarantees we either see the seal in the lookup or get a notification.
    control_.subscribe_object(m.object);
    p.subscribed = true;
    ObjectID obj = m.object;
    control_.get_object(obj, [this, obj](Status st, std::optional<ObjectSnap> snap) {
      auto pit = pending_.find(obj);
      if (pit == pending_.end()) return;
      if (st == Status::OK && snap) pit->second.snap = std::move(snap);
      drive(obj);
    });
  }
  ensure_tick(m.object, p);
}

void ObjectStore::drive(const ObjectID& obj) {
  auto sit = sealed_.find(obj);
  if (sit != sealed_.end()) {
    fulfill(obj, Status::OK, sit->second);
    return;
  }
  auto it = pending_.find(obj);
  if (it == pending_.end()) return;
  Pending& p = it->second;
  if (!p.snap) return;  // nothing known yet; wait for notify or retry tick
  const ObjectSnap& snap = *p.snap;
  if (snap.lost) {
    if (!snap.creating_task) {
      // A driver put with no lineage: nothing can regenerate it.
      fulfill(obj, Status::RECONSTRUCTION_FAILED, {});
      return;
    }
    // Ask the owning global scheduler to replay the creating task. Rate
    // limited; the retry tick re-sends if the loss persists.
    if (p.last_reconstruct < 0 || rt_->now() - p.last_reconstruct >= retry_interval_) {
      p.last_reconstruct = rt_->now();
      uint32_t owner = shard_of(obj, num_globals_);
      MsgReconstruct m{obj};
      rt_->send(Frame{MsgType::RECONSTRUCT, self_, "gs/" + std::to_string(owner),
                      m.encode()});
    }
    return;
  }
  if (!snap.sealed_anywhere() || p.fetch_in_flight) return;
  std::string source;
  for (const auto& loc : snap.locations) {
    if (loc != node_id_) {
      source = loc;
      break;
    }
  }
  if (source.empty()) return;  // directory says only we have it; snapshot is stale
  uint64_t req = next_fetch_req_++;
  outstanding_fetch_[req] = obj;
  p.fetch_in_flight = true;
  MsgObjReq m{req, obj};
  rt_->send(Frame{MsgType::OBJ_REQ, self_, store_endpoint_for_node(source), m.encode()});
}

void ObjectStore::on_obj_req(const Frame& f) {
  auto m = MsgObjReq::decode(f.payload);
  auto it = sealed_.find(m.object);
  MsgObjResp resp;
  resp.req_id = m.req_id;
  resp.object = m.object;
  resp.found = it != sealed_.end();
  if (resp.found) resp.payload = it->second;
  rt_->send(Frame{MsgType::OBJ_RESP, self_, f.src, resp.encode()});
}

void ObjectStore::on_obj_resp(const Frame& f) {
  auto m = MsgObjResp::decode(f.payload);
  auto fit = outstanding_fetch_.find(m.req_id);
  if (fit == outstanding_fetch_.end()) return;
  ObjectID obj = fit->second;
  outstanding_fetch_.erase(fit);
  auto pit = pending_.find(obj);
  if (pit != pending_.end()) pit->second.fetch_in_flight = false;
  if (m.found) {
    Status st = seal_local(obj, m.payload, std::nullopt);
    if (st == Status::CAPACITY_EXCEEDED) fulfill(obj, st, {});
    return;
  }
  // The peer evicted or died between the directory read and the fetch;
  // refresh the snapshot and try again.
  if (pit == pending_.end()) return;
  pit->second.snap.reset();
  control_.get_object(obj, [this, obj](Status st, std::optional<ObjectSnap> snap) {
    auto it = pending_.find(obj);
    if (it == pending_.end()) return;
    if (st == Status::OK && snap) it->second.snap = std::move(snap);
    drive(obj);
  });
}

void ObjectStore::on_tick(const Frame& f) {
  auto m = MsgStoreTick::decode(f.payload);
  auto it = pending_.find(m.object);
  if (it == pending_.end() || it->second.gen != m.gen) return;
  Pending& p = it->second;
  p.tick_scheduled = false;
  int64_t now = rt_->now();
  auto& ws = p.waiters;
  for (size_t i = 0; i < ws.size();) {
    if (ws[i].deadline && *ws[i].deadline <= now) {
      reply_waiter(ws[i], Status::TIMEOUT, {});
      ws.erase(ws.begin() + i);
    } else {
      ++i;
    }
  }
  if (ws.empty()) {
    if (p.subscribed) control_.unsubscribe_object(m.object);
    pending_.erase(it);
    return;
  }
  bool any_remote = std::any_of(ws.begin(), ws.end(),
                                [](const Waiter& w) { return !w.local_only; });
  if (any_remote && !p.fetch_in_flight) {
    ObjectID obj = m.object;
    control_.get_object(obj, [this, obj](Status st, std::optional<ObjectSnap> snap) {
      auto pit = pending_.find(obj);
      if (pit == pending_.end()) return;
      if (st == Status::OK && snap) pit->second.snap = std::move(snap);
      drive(obj);
    });
  }
  ensure_tick(m.object, p);
}

void ObjectStore::on_notify(const Frame& f) {
  auto m = MsgNotify::decode(f.payload);
  if (m.table != Table::OBJECT) return;
  ObjectID obj = ObjectID::from_bytes(m.key);
  auto it = pending_.find(obj);
  if (it == pending_.end()) return;
  if (m.kind == NotifyKind::RECON_FAILED) {
    fulfill(obj, Status::RECONSTRUCTION_FAILED, {});
    return;
  }
  if (!m.snap.empty()) {
    ByteReader r(m.snap);
    it->second.snap = ObjectSnap::decode(r);
  }
  drive(obj);
}

void ObjectStore::on_drop(const Frame& f) {
  auto m = MsgDropObj::decode(f.payload);
  auto it = sealed_.find(m.object);
  if (it == sealed_.end()) return;
  used_ -= it->second.size();
  sealed_.erase(it);
  control_.remove_location(m.object, node_id_);
}

}  // namespace dflow
