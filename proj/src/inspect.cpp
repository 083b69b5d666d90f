#include "dflow/inspect.hpp"

#include <algorithm>
#include <sstream>

namespace dflow {

namespace {

struct SpecInfo {
  std::string function;
  Resources demand;
  std::vector<ObjectID> deps;
  bool valid = false;
};

SpecInfo spec_info(const std::string& bytes) {
  SpecInfo out;
  try {
    TaskSpec spec = TaskSpec::decode(bytes);
    out.function = spec.function_name;
    out.demand = spec.demand;
    out.deps = spec.future_args();
    out.valid = true;
  } catch (const MalformedEncoding&) {
  }
  return out;
}

}  // namespace

std::string format_tasks(const std::vector<ScannedTask>& tasks, bool csv) {
  std::ostringstream out;
  if (csv) {
    out << "task,state,node,function,cpu,gpu\n";
    for (const auto& t : tasks) {
      SpecInfo si = spec_info(t.snap.spec_bytes);
      out << t.id.hex() << ',' << task_state_name(t.snap.state) << ',' << t.snap.node
          << ',' << si.function << ',' << si.demand.cpu << ',' << si.demand.gpu << '\n';
    }
    return out.str();
  }
  out << tasks.size() << " task(s)\n";
  for (const auto& t : tasks) {
    SpecInfo si = spec_info(t.snap.spec_bytes);
    out << "  " << t.id.hex() << "  " << task_state_name(t.snap.state) << "  node="
        << (t.snap.node.empty() ? "-" : t.snap.node) << "  fn=" << si.function
        << "  demand=" << si.demand.cpu << "c" << si.demand.gpu << "g\n";
  }
  return out.str();
}

std::string format_objects(const std::vector<ScannedObject>& objects, bool csv) {
  std::ostringstream out;
  if (csv) {
    out << "object,size,lost,creating_task,locations\n";
    for (const auto& o : objects) {
      out << o.id.hex() << ',' << o.snap.size << ',' << (o.snap.lost ? 1 : 0) << ','
          << (o.snap.creating_task ? o.snap.creating_task->hex() : "") << ',';
      for (size_t i = 0; i < o.snap.locations.size(); ++i)
        out << (i ? ";" : "") << o.snap.locations[i];
      out << '\n';
    }
    return out.str();
  }
  out << objects.size() << " object(s)\n";
  for (const auto& o : objects) {
    out << "  " << o.id.hex() << "  size=" << o.snap.size
        << (o.snap.lost ? "  LOST" : "") << "  at=[";
    for (size_t i = 0; i < o.snap.locations.size(); ++i)
      out << (i ? " " : "") << o.snap.locations[i];
    out << "]";
    if (o.snap.creating_task) out << "  by=" << o.snap.creating_task->hex();
    out << '\n';
  }
  return out.str();
}

std::string format_timeline(const std::vector<EventRecord>& events,
                            std::optional<TaskID> subject, bool csv) {
  std::ostringstream out;
  std::string filter;
  if (subject) filter = std::string(subject->bytes());
  if (csv) out << "timestamp,subject,transition,node,seq\n";
  size_t shown = 0;
  for (const auto& ev : events) {
    if (!filter.empty() && ev.subject != filter) continue;
    ++shown;
    if (csv) {
      out << ev.timestamp << ',' << to_hex(ev.subject) << ',' << ev.transition << ','
          << ev.node_id << ',' << ev.seq << '\n';
    } else {
      out << "  t=" << ev.timestamp << "  " << to_hex(ev.subject) << "  "
          << ev.transition << (ev.node_id.empty() ? "" : "  @" + ev.node_id) << '\n';
    }
  }
  if (!csv) out << shown << " event(s)\n";
  return out.str();
}

AuditResult audit_firing_rule(const std::vector<EventRecord>& events,
                              const std::vector<ScannedTask>& tasks,
                              const std::vector<ScannedObject>& objects) {
  AuditResult res;
  std::map<std::string, int64_t> first_running;
  std::map<std::string, int64_t> first_done;
  for (const auto& ev : events) {
    if (ev.transition == task_state_name(TaskState::RUNNING)) {
      auto [it, fresh] = first_running.try_emplace(ev.subject, ev.timestamp);
      if (!fresh) it->second = std::min(it->second, ev.timestamp);
    } else if (ev.transition == task_state_name(TaskState::DONE)) {
      auto [it, fresh] = first_done.try_emplace(ev.subject, ev.timestamp);
      if (!fresh) it->second = std::min(it->second, ev.timestamp);
    }
  }
  std::map<ObjectID, TaskID> producer;
  for (const auto& o : objects)
    if (o.snap.creating_task) producer[o.id] = *o.snap.creating_task;
  for (const auto& t : tasks) {
    auto run = first_running.find(std::string(t.id.bytes()));
    if (run == first_running.end()) continue;  // never ran
    SpecInfo si = spec_info(t.snap.spec_bytes);
    if (!si.valid) continue;
    for (const ObjectID& dep : si.deps) {
      auto pit = producer.find(dep);
      if (pit == producer.end()) continue;  // driver put: no producing task
      auto done = first_done.find(std::string(pit->second.bytes()));
      if (done == first_done.end() || done->second > run->second) {
        res.ok = false;
        res.violations.push_back("task " + t.id.hex() + " ran at " +
                                 std::to_string(run->second) +
                                 " before producer of " + dep.hex() + " was DONE");
      }
    }
  }
  return res;
}

AuditResult audit_resource_safety(const std::vector<EventRecord>& events,
                                  const std::vector<ScannedTask>& tasks,
                                  const std::map<std::string, Resources>& node_totals) {
  AuditResult res;
  std::map<std::string, Resources> demand_of;
  for (const auto& t : tasks) {
    SpecInfo si = spec_info(t.snap.spec_bytes);
    if (si.valid) demand_of[std::string(t.id.bytes())] = si.demand;
  }
  // Order releases before acquisitions within a timestamp so back-to-back
  // finish/assign pairs do not read as transient oversubscription.
  std::vector<const EventRecord*> ordered;
  for (const auto& ev : events) ordered.push_back(&ev);
  auto rank = [](const EventRecord& ev) {
    return ev.transition == task_state_name(TaskState::ASSIGNED) ? 1 : 0;
  };
  std::stable_sort(ordered.begin(), ordered.end(),
                   [&](const EventRecord* a, const EventRecord* b) {
                     if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
                     return rank(*a) < rank(*b);
                   });
  std::map<std::string, Resources> used;
  std::map<std::string, std::pair<std::string, Resources>> held;  // task -> (node, demand)
  for (const EventRecord* evp : ordered) {
    const EventRecord& ev = *evp;
    if (ev.transition == task_state_name(TaskState::ASSIGNED)) {
      auto dit = demand_of.find(ev.subject);
      if (dit == demand_of.end()) continue;
      if (held.count(ev.subject)) continue;  // duplicate assignment record
      held[ev.subject] = {ev.node_id, dit->second};
      Resources& u = used[ev.node_id];
      u += dit->second;
      auto tot = node_totals.find(ev.node_id);
      if (tot != node_totals.end() && !u.fits_in(tot->second)) {
        res.ok = false;
        res.violations.push_back("node " + ev.node_id + " oversubscribed at t=" +
                                 std::to_string(ev.timestamp) + " (cpu=" +
                                 std::to_string(u.cpu) + " gpu=" + std::to_string(u.gpu) +
                                 ")");
      }
    } else if (ev.transition == task_state_name(TaskState::DONE) ||
               ev.transition == task_state_name(TaskState::LOST)) {
      auto hit = held.find(ev.subject);
      if (hit == held.end()) continue;
      used[hit->second.first] -= hit->second.second;
      held.erase(hit);
    }
  }
  return res;
}

}  // namespace dflow
