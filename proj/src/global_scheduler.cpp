#include "dflow/global_scheduler.hpp"

namespace dflow {

uint32_t gs_owner_of_node(const std::string& node_id, uint32_t num_globals) {
  return shard_of(sha256(node_id).substr(0, kIdSize), num_globals);
}

GlobalScheduler::GlobalScheduler(Runtime* rt, GlobalSchedulerParams params)
    : rt_(rt),
      params_(std::move(params)),
      self_("gs/" + std::to_string(params_.index)),
      control_(rt, self_, params_.num_shards),
      recon_coalesce_(params_.tick_period) {}

EndpointId GlobalScheduler::ls_endpoint(const std::string& node_id) const {
  return "node/" + node_id.substr(1) + "/ls";
}

void GlobalScheduler::start(bool reconcile) {
  int64_t now = rt_->now();
  for (const auto& [node, total] : params_.nodes)
    nodes_[node] = NodeInfo{total, total, 0, now, false};
  control_.subscribe_table(Table::OBJECT);
  rt_->schedule(self_, Frame{MsgType::GS_TICK, self_, self_, {}}, params_.tick_period);
  if (!reconcile) return;
  for (uint32_t i = 0; i < params_.num_shards; ++i) {
    control_.scan_shard(Table::TASK, i, [this](const MsgReply& rep) {
      if (rep.status != Status::OK) return;
      for (const auto& st : decode_task_scan(rep.body)) {
        if (st.snap.state != TaskState::SPILLED) continue;
        if (shard_of(st.id, params_.num_globals) != params_.index) continue;
        try {
          place_or_park(TaskSpec::decode(st.snap.spec_bytes));
        } catch (const MalformedEncoding&) {
        }
      }
    });
  }
}

void GlobalScheduler::handle(Frame f) {
  try {
    switch (f.type) {
      case MsgType::SPILL: {
        auto m = MsgSpill::decode(f.payload);
        place_or_park(TaskSpec::decode(m.spec_bytes));
        break;
      }
      case MsgType::HEARTBEAT: {
        auto m = MsgHeartbeat::decode(f.payload);
        auto it = nodes_.find(m.node);
        if (it == nodes_.end()) break;
        it->second.available = m.available;
        it->second.queue_length = m.queue_length;
        it->second.last_heartbeat = rt_->now();
        retry_parked();
        break;
      }
      case MsgType::NOTIFY: {
        auto m = MsgNotify::decode(f.payload);
        if (m.table != Table::OBJECT || m.snap.empty()) break;
        ByteReader r(m.snap);
        ObjectSnap snap = ObjectSnap::decode(r);
        ObjectID obj = ObjectID::from_bytes(m.key);
        auto& entry = obj_cache_[obj];
        entry.first.clear();
        entry.first.insert(snap.locations.begin(), snap.locations.end());
        entry.second = snap.size;
        break;
      }
      case MsgType::RECONSTRUCT:
        on_reconstruct(MsgReconstruct::decode(f.payload).object);
        break;
      case MsgType::RESUBMIT_LOST:
        resubmit_task(MsgResubmitLost::decode(f.payload).task);
        break;
      case MsgType::GS_TICK:
        check_heartbeats();
        retry_parked();
        rt_->schedule(self_, Frame{MsgType::GS_TICK, self_, self_, {}},
                      params_.tick_period);
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

std::optional<std::string> GlobalScheduler::place(const TaskSpec& spec) const {
  const std::string* best = nullptr;
  uint64_t best_bytes = 0;
  uint32_t best_qlen = 0;
  auto deps = spec.future_args();
  for (const auto& [node, info] : nodes_) {
    if (info.dead || !spec.demand.fits_in(info.total)) continue;
    uint64_t local_bytes = 0;
    for (const ObjectID& d : deps) {
      auto it = obj_cache_.find(d);
      if (it != obj_cache_.end() && it->second.first.count(node))
        local_bytes += it->second.second;
    }
    // Most dependency bytes local, then shortest queue, then smallest id.
    // The map iterates in id order, so strict comparisons keep the first.
    if (!best || local_bytes > best_bytes ||
        (local_bytes == best_bytes && info.queue_length < best_qlen)) {
      best = &node;
      best_bytes = local_bytes;
      best_qlen = info.queue_length;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

void GlobalScheduler::place_or_park(const TaskSpec& spec) {
  auto node = place(spec);
  if (!node) {
    parked_.push_back(spec);
    return;
  }
  placed_to_[spec.task_id] = *node;
  // Optimistic bump so a burst of placements spreads before the next
  // heartbeat refreshes the real queue lengths.
  nodes_[*node].queue_length++;
  rt_->send(Frame{MsgType::PLACE, self_, ls_endpoint(*node),
                  MsgPlace{spec.encode(), true}.encode()});
}

void GlobalScheduler::retry_parked() {
  if (parked_.empty()) return;
  std::vector<TaskSpec> still;
  for (auto& spec : parked_) {
    auto node = place(spec);
    if (!node) {
      still.push_back(std::move(spec));
      continue;
    }
    placed_to_[spec.task_id] = *node;
    nodes_[*node].queue_length++;
    rt_->send(Frame{MsgType::PLACE, self_, ls_endpoint(*node),
                    MsgPlace{spec.encode(), true}.encode()});
  }
  parked_ = std::move(still);
}

void GlobalScheduler::on_reconstruct(const ObjectID& obj) {
  auto it = recon_started_.find(obj);
  int64_t now = rt_->now();
  if (it != recon_started_.end() && now - it->second < recon_coalesce_) return;
  recon_started_[obj] = now;
  control_.get_object(obj, [this, obj](Status st, std::optional<ObjectSnap> snap) {
    if (st != Status::OK || !snap || !snap->lost) return;
    if (!snap->creating_task) {
      control_.publish_fail(obj);
      return;
    }
    TaskID creator = *snap->creating_task;
    control_.get_task(creator, [this, creator](Status ts, std::optional<TaskSnap> task) {
      if (ts != Status::OK || !task) return;
      switch (task->state) {
        case TaskState::DONE: {
          std::string spec_bytes = task->spec_bytes;
          control_.update_state(creator, TaskState::LOST, "",
                                [this, spec_bytes](const MsgReply& rep) {
                                  if (rep.status != Status::OK) return;
                                  try {
                                    place_or_park(TaskSpec::decode(spec_bytes));
                                  } catch (const MalformedEncoding&) {
                                  }
                                });
          break;
        }
        case TaskState::LOST:
          try {
            place_or_park(TaskSpec::decode(task->spec_bytes));
          } catch (const MalformedEncoding&) {
          }
          break;
        default:
          break;  // already in flight somewhere; its completion reseals
      }
    });
  });
}

void GlobalScheduler::resubmit_task(const TaskID& task) {
  control_.get_task(task, [this](Status st, std::optional<TaskSnap> snap) {
    if (st != Status::OK || !snap || snap->state != TaskState::LOST) return;
    try {
      place_or_park(TaskSpec::decode(snap->spec_bytes));
    } catch (const MalformedEncoding&) {
    }
  });
}

void GlobalScheduler::check_heartbeats() {
  if (!params_.monitor_enabled) return;
  int64_t now = rt_->now();
  for (auto& [node, info] : nodes_) {
    if (info.dead) continue;
    if (gs_owner_of_node(node, params_.num_globals) != params_.index) continue;
    if (now - info.last_heartbeat > params_.heartbeat_timeout) {
      info.dead = true;
      on_node_death(node);
    }
  }
}

void GlobalScheduler::on_node_death(const std::string& node_id) {
  control_.append_event(std::string(kIdSize, '\0'), "NODE_DEATH", node_id);
  for (uint32_t i = 0; i < params_.num_shards; ++i) {
    control_.scan_shard(Table::OBJECT, i, [this, node_id](const MsgReply& rep) {
      if (rep.status != Status::OK) return;
      for (const auto& so : decode_object_scan(rep.body)) {
        for (const auto& loc : so.snap.locations)
          if (loc == node_id) control_.remove_location(so.id, node_id);
      }
    });
    control_.scan_shard(Table::TASK, i, [this, node_id](const MsgReply& rep) {
      if (rep.status != Status::OK) return;
      for (const auto& st : decode_task_scan(rep.body)) {
        bool in_flight = st.snap.state == TaskState::SUBMITTED ||
                         st.snap.state == TaskState::QUEUED_LOCAL ||
                         st.snap.state == TaskState::ASSIGNED ||
                         st.snap.state == TaskState::RUNNING;
        if (in_flight && st.snap.node == node_id) {
          std::string spec_bytes = st.snap.spec_bytes;
          control_.update_state(st.id, TaskState::LOST, "",
                                [this, spec_bytes](const MsgReply& r2) {
                                  if (r2.status != Status::OK) return;
                                  try {
                                    place_or_park(TaskSpec::decode(spec_bytes));
                                  } catch (const MalformedEncoding&) {
                                  }
                                });
          continue;
        }
        // Spilled tasks this scheduler sent to the dead node need a new home.
        if (st.snap.state == TaskState::SPILLED &&
            shard_of(st.id, params_.num_globals) == params_.index) {
          auto pit = placed_to_.find(st.id);
          if (pit != placed_to_.end() && pit->second == node_id) {
            try {
              place_or_park(TaskSpec::decode(st.snap.spec_bytes));
            } catch (const MalformedEncoding&) {
            }
          }
        }
      }
    });
  }
}

}  // namespace dflow
