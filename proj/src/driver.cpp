#include "dflow/driver.hpp"

#include <algorithm>
#include <utility>

#include "dflow/worker.hpp"

namespace dflow {

Driver::Driver(Runtime* rt, uint32_t num_shards, uint32_t num_globals,
               EndpointId home_ls, const FunctionRegistry* registry)
    : rt_(rt),
      self_("driver"),
      home_ls_(std::move(home_ls)),
      store_("driver/store"),
      registry_(registry),
      control_(rt, self_, num_shards) {
  (void)num_globals;
  mailbox_ = rt_->register_mailbox(self_);
  put_root_ = TaskID::from_bytes(sha256("driver/put").substr(0, kIdSize));
}

void Driver::dispatch(Frame& f) {
  switch (f.type) {
    case MsgType::REPLY: {
      MsgReply rep = MsgReply::decode(f.payload);
      if (outstanding_acks_.erase(rep.req_id)) return;
      control_.handle_reply(f);
      return;
    }
    case MsgType::NOTIFY: {
      if (notify_sink_) notify_sink_(MsgNotify::decode(f.payload));
      return;
    }
    default:
      return;
  }
}

std::optional<MsgReply> Driver::pump_for_reply(uint64_t req_id,
                                               std::optional<int64_t> deadline) {
  for (;;) {
    auto f = mailbox_->receive(deadline);
    if (!f) return std::nullopt;
    if (f->type == MsgType::REPLY) {
      MsgReply rep = MsgReply::decode(f->payload);
      if (rep.req_id == req_id) return rep;
    }
    dispatch(*f);
  }
}

std::vector<ObjectID> Driver::remote(const std::string& function_name,
                                     std::vector<Arg> args, uint32_t num_returns,
                                     Resources demand) {
  std::lock_guard<std::mutex> l(api_m_);
  if (registry_ && !registry_->contains(function_name))
    throw UnknownFunctionError(function_name);
  TaskSpec spec = TaskSpec::make(root_, task_counter_++, function_name, std::move(args),
                                 num_returns, demand);
  uint64_t req = std::exchange(next_req_, next_req_ + 2);
  outstanding_acks_.insert(req);
  rt_->send(Frame{MsgType::SUBMIT, self_, home_ls_, MsgSubmit{req, spec.encode()}.encode()});
  return spec.return_ids();
}

void Driver::barrier() {
  std::lock_guard<std::mutex> l(api_m_);
  while (!outstanding_acks_.empty()) {
    auto f = mailbox_->receive(std::nullopt);
    if (f) dispatch(*f);
  }
}

Value Driver::get(const ObjectID& id, std::optional<int64_t> timeout_us) {
  std::lock_guard<std::mutex> l(api_m_);
  uint64_t req = std::exchange(next_req_, next_req_ + 2);
  MsgEnsureLocal m;
  m.req_id = req;
  m.object = id;
  if (timeout_us) m.deadline = rt_->now() + us_to_units(*rt_, *timeout_us);
  rt_->send(Frame{MsgType::ENSURE_LOCAL, self_, store_, m.encode()});
  auto rep = pump_for_reply(req, std::nullopt);
  if (!rep) throw GetTimeout{};
  switch (rep->status) {
    case Status::OK:
      return decode_value(rep->body);
    case Status::TIMEOUT:
      throw GetTimeout{};
    default:
      throw ObjectUnavailable(std::string("get failed: ") + status_name(rep->status));
  }
}

WaitResult Driver::wait(const std::vector<ObjectID>& ids, size_t k,
                        std::optional<int64_t> timeout_us) {
  std::lock_guard<std::mutex> l(api_m_);
  if (k > ids.size()) throw BadWaitArgs("k exceeds number of futures");
  {
    std::set<ObjectID> uniq(ids.begin(), ids.end());
    if (uniq.size() != ids.size()) throw BadWaitArgs("duplicate futures");
  }
  std::optional<int64_t> deadline;
  if (timeout_us) deadline = rt_->now() + us_to_units(*rt_, *timeout_us);

  std::map<ObjectID, size_t> input_index;
  for (size_t i = 0; i < ids.size(); ++i) input_index[ids[i]] = i;
  std::set<ObjectID> sealed;
  std::vector<ObjectID> completion_order;
  auto mark_sealed = [&](const ObjectID& id) {
    if (!input_index.count(id) || sealed.count(id)) return;
    sealed.insert(id);
    completion_order.push_back(id);
  };

  // Subscribe first, then look up: per-shard ordering guarantees we either
  // see an already-sealed entry in the lookup or get the notification.
  size_t lookups_left = ids.size();
  std::vector<char> initially_sealed(ids.size(), 0);
  for (size_t i = 0; i < ids.size(); ++i) {
    control_.subscribe_object(ids[i]);
    ObjectID id = ids[i];
    control_.get_object(id, [&, i](Status st, std::optional<ObjectSnap> snap) {
      --lookups_left;
      if (st == Status::OK && snap && snap->sealed_anywhere()) initially_sealed[i] = 1;
    });
  }
  notify_sink_ = [&](const MsgNotify& n) {
    if (n.table != Table::OBJECT || n.snap.empty()) return;
    if (n.kind != NotifyKind::OBJECT_UPDATE) return;
    ByteReader r(n.snap);
    ObjectSnap snap = ObjectSnap::decode(r);
    if (snap.sealed_anywhere()) mark_sealed(ObjectID::from_bytes(n.key));
  };

  // Phase 1: collect the initial snapshots (bounded only by shard liveness).
  while (lookups_left > 0) {
    auto f = mailbox_->receive(std::nullopt);
    if (f) dispatch(*f);
  }
  // Futures already sealed at call time rank by input order, ahead of any
  // completion observed afterwards.
  for (size_t i = 0; i < ids.size(); ++i)
    if (initially_sealed[i]) mark_sealed(ids[i]);

  // Phase 2: watch notifications until k are sealed or the deadline passes.
  while (sealed.size() < k) {
    if (deadline && rt_->now() >= *deadline) break;
    auto f = mailbox_->receive(deadline);
    if (!f) break;
    dispatch(*f);
  }
  notify_sink_ = nullptr;
  for (const auto& id : ids) control_.unsubscribe_object(id);

  // ready: the first k completions (or all sealed, if fewer), reported in
  // input order.
  std::set<ObjectID> chosen;
  for (const auto& id : completion_order) {
    if (chosen.size() >= k) break;
    chosen.insert(id);
  }
  WaitResult out;
  for (const auto& id : ids) {
    if (chosen.count(id))
      out.ready.push_back(id);
    else
      out.not_ready.push_back(id);
  }
  return out;
}

ObjectID Driver::put(const Value& v) {
  std::lock_guard<std::mutex> l(api_m_);
  ObjectID id = derive_object_id(derive_task_id(put_root_, put_counter_++), 0);
  uint64_t req = std::exchange(next_req_, next_req_ + 2);
  MsgPutObj m;
  m.req_id = req;
  m.object = id;
  m.payload = encode_value(v);
  rt_->send(Frame{MsgType::PUT_OBJ, self_, store_, m.encode()});
  auto rep = pump_for_reply(req, std::nullopt);
  if (!rep || rep->status != Status::OK)
    throw ObjectUnavailable(std::string("put failed: ") +
                            (rep ? status_name(rep->status) : "no reply"));
  return id;
}

}  // namespace dflow
