#include "dflow/local_scheduler.hpp"

#include <memory>

#include "dflow/store.hpp"

namespace dflow {

LocalScheduler::LocalScheduler(Runtime* rt, LocalSchedulerParams params)
    : rt_(rt),
      params_(std::move(params)),
      self_("node/" + std::to_string(params_.node_index) + "/ls"),
      control_(rt, self_, params_.num_shards) {
  workers_.resize(params_.num_workers);
  avail_ = params_.total;
}

EndpointId LocalScheduler::worker_endpoint(uint32_t j) const {
  return "node/" + std::to_string(params_.node_index) + "/w/" + std::to_string(j);
}

EndpointId LocalScheduler::gs_for_task(const TaskID& t) const {
  return "gs/" + std::to_string(shard_of(t, params_.num_globals));
}

void LocalScheduler::start(bool reconcile) {
  rt_->schedule(self_, Frame{MsgType::LS_TICK, self_, self_, {}}, params_.heartbeat_period);
  if (!reconcile) return;
  reconciling_ = true;
  auto remaining = std::make_shared<uint32_t>(params_.num_shards);
  for (uint32_t i = 0; i < params_.num_shards; ++i) {
    control_.scan_shard(Table::TASK, i, [this, remaining](const MsgReply& rep) {
      if (rep.status == Status::OK) {
        for (const auto& st : decode_task_scan(rep.body)) {
          if (st.snap.node != params_.node_id || tasks_.count(st.id)) continue;
          try {
            TaskSpec spec = TaskSpec::decode(st.snap.spec_bytes);
            switch (st.snap.state) {
              case TaskState::SUBMITTED:
                admit(std::move(spec), false, 0, "");
                break;
              case TaskState::QUEUED_LOCAL: {
                TrackedTask& t = tasks_[st.id];
                t.spec = std::move(spec);
                t.in_queue = true;
                ready_.push_back(st.id);
                break;
              }
              case TaskState::ASSIGNED:
              case TaskState::RUNNING: {
                TrackedTask& t = tasks_[st.id];
                t.spec = std::move(spec);
                t.dispatched = true;
                unclaimed_dispatched_.insert(st.id);
                break;
              }
              default:
                break;
            }
          } catch (const MalformedEncoding&) {
          }
        }
      }
      if (--*remaining == 0) {
        // Ask every worker what it is running; finish once all respond.
        status_reports_waited_ = params_.num_workers;
        for (uint32_t j = 0; j < params_.num_workers; ++j)
          rt_->send(Frame{MsgType::STATUS_REQ, self_, worker_endpoint(j), {}});
        if (params_.num_workers == 0) maybe_finish_reconcile();
      }
    });
  }
}

void LocalScheduler::handle(Frame f) {
  try {
    switch (f.type) {
      case MsgType::SUBMIT: {
        auto m = MsgSubmit::decode(f.payload);
        admit(TaskSpec::decode(m.spec_bytes), false, m.req_id, f.src);
        break;
      }
      case MsgType::PLACE: {
        auto m = MsgPlace::decode(f.payload);
        admit(TaskSpec::decode(m.spec_bytes), m.non_spillable, 0, "");
        break;
      }
      case MsgType::TASK_FINISHED:
        on_task_finished(f);
        break;
      case MsgType::STATUS_RESP:
        on_status_resp(f);
        break;
      case MsgType::WORKER_FAILED:
        on_worker_failed(MsgWorkerFailed::decode(f.payload).worker_index);
        break;
      case MsgType::NOTIFY: {
        auto m = MsgNotify::decode(f.payload);
        if (m.table != Table::OBJECT) break;
        ObjectID obj = ObjectID::from_bytes(m.key);
        auto it = objects_.find(obj);
        if (it == objects_.end()) break;
        if (m.kind == NotifyKind::OBJECT_LOST) {
          it->second.located = false;
          if (!it->second.waiters.empty())
            rt_->send(Frame{MsgType::RECONSTRUCT, self_,
                            "gs/" + std::to_string(shard_of(obj, params_.num_globals)),
                            MsgReconstruct{obj}.encode()});
          break;
        }
        if (m.kind == NotifyKind::OBJECT_UPDATE && !m.snap.empty()) {
          ByteReader r(m.snap);
          ObjectSnap snap = ObjectSnap::decode(r);
          if (snap.sealed_anywhere()) on_object_located(obj);
        }
        break;
      }
      case MsgType::LS_TICK:
        send_heartbeats();
        rt_->schedule(self_, Frame{MsgType::LS_TICK, self_, self_, {}},
                      params_.heartbeat_period);
        break;
      case MsgType::REPLY:
        control_.handle_reply(f);
        break;
      default:
        break;
    }
  } catch (const MalformedEncoding&) {
  }
}

void LocalScheduler::admit(TaskSpec spec, bool non_spillable, uint64_t ack_req,
                           const EndpointId& ack_to) {
  TaskID id = spec.task_id;
  if (ack_req != 0)
    rt_->send(Frame{MsgType::REPLY, self_, ack_to, MsgReply{ack_req, Status::OK, {}}.encode()});
  if (tasks_.count(id)) return;  // duplicate submission
  control_.put_task_spec(spec, params_.node_id);
  TrackedTask& t = tasks_[id];
  t.spec = std::move(spec);
  t.non_spillable = non_spillable;
  register_deps(id);
}

void LocalScheduler::register_deps(const TaskID& id) {
  TrackedTask& t = tasks_[id];
  for (const ObjectID& obj : t.spec.future_args()) {
    auto it = objects_.find(obj);
    if (it != objects_.end() && it->second.located) continue;
    bool fresh = it == objects_.end();
    ObjState& os = objects_[obj];
    os.waiters.insert(id);
    t.missing.insert(obj);
    if (fresh) {
      // Subscribe before the lookup: the shard's serial order means we either
      // observe the seal in the lookup reply or receive a notification.
      control_.subscribe_object(obj);
      control_.get_object(obj, [this, obj](Status st, std::optional<ObjectSnap> snap) {
        if (st != Status::OK || !snap) return;
        if (snap->sealed_anywhere()) {
          on_object_located(obj);
        } else if (snap->lost && !objects_[obj].waiters.empty()) {
          rt_->send(Frame{MsgType::RECONSTRUCT, self_,
                          "gs/" + std::to_string(shard_of(obj, params_.num_globals)),
                          MsgReconstruct{obj}.encode()});
        }
      });
    }
  }
  if (t.missing.empty()) on_ready(id);
}

void LocalScheduler::on_object_located(const ObjectID& obj) {
  auto it = objects_.find(obj);
  if (it == objects_.end()) return;
  std::set<TaskID> waiters = std::move(it->second.waiters);
  control_.unsubscribe_object(obj);
  objects_.erase(it);
  for (const TaskID& id : waiters) {
    auto tit = tasks_.find(id);
    if (tit == tasks_.end()) continue;
    tit->second.missing.erase(obj);
    if (tit->second.missing.empty() && !tit->second.in_queue && !tit->second.dispatched)
      on_ready(id);
  }
}

void LocalScheduler::on_ready(const TaskID& id) {
  TrackedTask& t = tasks_[id];
  control_.update_state(id, TaskState::QUEUED_LOCAL, params_.node_id);
  // A demand that can never fit on this node spills regardless of load.
  if (!t.non_spillable && !t.spec.demand.fits_in(params_.total)) {
    spill(id);
    return;
  }
  if (try_assign(id)) return;
  if (!t.non_spillable && ready_.size() + 1 > params_.theta) {
    spill(id);
    return;
  }
  t.in_queue = true;
  ready_.push_back(id);
}

bool LocalScheduler::try_assign(const TaskID& id) {
  TrackedTask& t = tasks_[id];
  if (!t.spec.demand.fits_in(avail_)) return false;
  for (uint32_t j = 0; j < workers_.size(); ++j) {
    WorkerSlot& w = workers_[j];
    if (!w.alive || w.busy) continue;
    w.busy = true;
    w.task = id;
    avail_ -= t.spec.demand;
    t.dispatched = true;
    t.in_queue = false;
    control_.update_state(id, TaskState::ASSIGNED, params_.node_id);
    rt_->send(Frame{MsgType::ASSIGN, self_, worker_endpoint(j),
                    MsgAssign{t.spec.encode()}.encode()});
    return true;
  }
  return false;
}

void LocalScheduler::scan_queue() {
  // Walk the FIFO queue once, assigning whatever fits the freed capacity.
  for (size_t i = 0; i < ready_.size();) {
    bool any_idle = false;
    for (const WorkerSlot& w : workers_)
      if (w.alive && !w.busy) any_idle = true;
    if (!any_idle) return;
    if (try_assign(ready_[i]))
      ready_.erase(ready_.begin() + i);
    else
      ++i;
  }
}

void LocalScheduler::spill(const TaskID& id) {
  TrackedTask& t = tasks_[id];
  control_.update_state(id, TaskState::SPILLED, params_.node_id);
  MsgSpill m{t.spec.encode(), params_.node_id};
  rt_->send(Frame{MsgType::SPILL, self_, gs_for_task(id), m.encode()});
  release_deps_interest(t.spec);
  tasks_.erase(id);
}

void LocalScheduler::release_deps_interest(const TaskSpec& spec) {
  for (const ObjectID& obj : spec.future_args()) {
    auto it = objects_.find(obj);
    if (it == objects_.end()) continue;
    it->second.waiters.erase(spec.task_id);
    if (it->second.waiters.empty()) {
      control_.unsubscribe_object(obj);
      objects_.erase(it);
    }
  }
}

void LocalScheduler::on_task_finished(const Frame& f) {
  auto m = MsgTaskFinished::decode(f.payload);
  auto it = tasks_.find(m.task);
  // Store outputs first so the DONE transition never precedes the seal.
  EndpointId store = store_endpoint_for_node(params_.node_id);
  if (it != tasks_.end()) {
    auto returns = it->second.spec.return_ids();
    for (size_t i = 0; i < returns.size() && i < m.payloads.size(); ++i) {
      MsgPutObj put;
      put.object = returns[i];
      put.creating_task = m.task;
      put.payload = m.payloads[i];
      rt_->send(Frame{MsgType::PUT_OBJ, self_, store, put.encode()});
    }
    control_.update_state(m.task, TaskState::DONE, params_.node_id);
    avail_ += it->second.spec.demand;
    tasks_.erase(it);
  }
  for (WorkerSlot& w : workers_) {
    if (w.busy && w.task == m.task) {
      w.busy = false;
      break;
    }
  }
  scan_queue();
}

void LocalScheduler::on_worker_failed(uint32_t j) {
  if (j >= workers_.size()) return;
  WorkerSlot& w = workers_[j];
  w.alive = false;
  if (!w.busy) return;
  TaskID id = w.task;
  w.busy = false;
  auto it = tasks_.find(id);
  if (it == tasks_.end()) return;
  avail_ += it->second.spec.demand;
  release_deps_interest(it->second.spec);
  tasks_.erase(it);
  EndpointId gs = gs_for_task(id);
  control_.update_state(id, TaskState::LOST, "", [this, id, gs](const MsgReply& rep) {
    if (rep.status == Status::OK)
      rt_->send(Frame{MsgType::RESUBMIT_LOST, self_, gs, MsgResubmitLost{id}.encode()});
  });
}

void LocalScheduler::on_status_resp(const Frame& f) {
  auto m = MsgStatusResp::decode(f.payload);
  if (m.worker_index >= workers_.size()) return;
  WorkerSlot& w = workers_[m.worker_index];
  bool was_alive = w.alive;
  w.alive = true;
  if (m.busy) {
    w.busy = true;
    w.task = m.task;
    if (reconciling_ && unclaimed_dispatched_.erase(m.task)) {
      auto it = tasks_.find(m.task);
      if (it != tasks_.end()) avail_ -= it->second.spec.demand;
    }
  } else {
    if (w.busy && tasks_.count(w.task)) {
      // We believe this worker holds a task but it reports idle: the worker
      // restarted (or the assignment frame was lost). Hand the task back.
      rt_->send(Frame{MsgType::ASSIGN, self_, worker_endpoint(m.worker_index),
                      MsgAssign{tasks_[w.task].spec.encode()}.encode()});
    } else {
      w.busy = false;
    }
  }
  if (reconciling_ && status_reports_waited_ > 0 && --status_reports_waited_ == 0)
    maybe_finish_reconcile();
  if (!was_alive && !reconciling_) scan_queue();
}

void LocalScheduler::maybe_finish_reconcile() {
  reconciling_ = false;
  // Tasks the table says we dispatched but no worker admits to running were
  // lost with the previous incarnation; push them back through replay.
  for (const TaskID& id : unclaimed_dispatched_) {
    auto it = tasks_.find(id);
    if (it != tasks_.end()) {
      release_deps_interest(it->second.spec);
      tasks_.erase(it);
    }
    EndpointId gs = gs_for_task(id);
    control_.update_state(id, TaskState::LOST, "", [this, id, gs](const MsgReply& rep) {
      if (rep.status == Status::OK)
        rt_->send(Frame{MsgType::RESUBMIT_LOST, self_, gs, MsgResubmitLost{id}.encode()});
    });
  }
  unclaimed_dispatched_.clear();
  scan_queue();
}

void LocalScheduler::send_heartbeats() {
  MsgHeartbeat m;
  m.node = params_.node_id;
  m.available = avail_;
  m.queue_length = static_cast<uint32_t>(ready_.size());
  for (uint32_t g = 0; g < params_.num_globals; ++g)
    rt_->send(Frame{MsgType::HEARTBEAT, self_, "gs/" + std::to_string(g), m.encode()});
}

}  // namespace dflow
