#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dflow/control.hpp"

namespace dflow {

// Table formatters for the CLI. csv=true emits one header line plus one
// comma-separated row per record.
std::string format_tasks(const std::vector<ScannedTask>& tasks, bool csv);
std::string format_objects(const std::vector<ScannedObject>& objects, bool csv);
std::string format_timeline(const std::vector<EventRecord>& events,
                            std::optional<TaskID> subject, bool csv);

struct AuditResult {
  bool ok = true;
  std::vector<std::string> violations;
};

// Dataflow firing rule: a task's first RUNNING must come at or after a DONE
// of the task that produced each of its future arguments.
AuditResult audit_firing_rule(const std::vector<EventRecord>& events,
                              const std::vector<ScannedTask>& tasks,
                              const std::vector<ScannedObject>& objects);

// Replays ASSIGNED/DONE/LOST events and checks per-node resource usage never
// exceeds the node total.
AuditResult audit_resource_safety(const std::vector<EventRecord>& events,
                                  const std::vector<ScannedTask>& tasks,
                                  const std::map<std::string, Resources>& node_totals);

}  // namespace dflow
