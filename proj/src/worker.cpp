#include "dflow/worker.hpp"

#include <utility>

namespace dflow {

// Matches the friend declaration in Worker; must be a namespace-scope class.
class WorkerKernelContext : public KernelContext {
 public:
  WorkerKernelContext(Worker* w, const TaskSpec& spec, std::vector<Value> args)
      : w_(w), spec_(spec), args_(std::move(args)) {}

  const TaskSpec& spec() const override { return spec_; }
  const std::vector<Value>& args() const override { return args_; }

  void sleep_us(int64_t d) override {
    w_->rt_->sleep_until(w_->rt_->now() + us_to_units(*w_->rt_, d));
  }

  std::vector<ObjectID> submit(const std::string& function_name, std::vector<Arg> args,
                               uint32_t num_returns, Resources demand) override {
    TaskSpec child = TaskSpec::make(spec_.task_id, w_->submit_counter_++, function_name,
                                    std::move(args), num_returns, demand);
    uint64_t req = std::exchange(w_->next_req_, w_->next_req_ + 2);
    MsgSubmit m{req, child.encode()};
    w_->blocking_call(w_->ls_, MsgType::SUBMIT, m.encode(), req);
    return child.return_ids();
  }

  Value get(const ObjectID& id) override { return w_->fetch(id); }

 private:
  Worker* w_;
  const TaskSpec& spec_;
  std::vector<Value> args_;
};

Worker::Worker(Runtime* rt, uint32_t node_index, uint32_t worker_index,
               std::string node_id, uint32_t num_shards, const FunctionRegistry* registry)
    : rt_(rt),
      node_index_(node_index),
      worker_index_(worker_index),
      node_id_(std::move(node_id)),
      self_("node/" + std::to_string(node_index) + "/w/" + std::to_string(worker_index)),
      ls_("node/" + std::to_string(node_index) + "/ls"),
      store_("node/" + std::to_string(node_index) + "/store"),
      registry_(registry),
      control_(rt, self_, num_shards) {
  mailbox_ = rt_->register_mailbox(self_);
}

void Worker::answer_status(const EndpointId& to) {
  MsgStatusResp m;
  m.worker_index = worker_index_;
  m.busy = busy_;
  m.task = current_;
  rt_->send(Frame{MsgType::STATUS_RESP, self_, to, m.encode()});
}

std::optional<Frame> Worker::next_frame() {
  if (!stash_.empty()) {
    Frame f = std::move(stash_.front());
    stash_.pop_front();
    return f;
  }
  return mailbox_->receive(std::nullopt);
}

MsgReply Worker::blocking_call(const EndpointId& dst, MsgType type, std::string payload,
                               uint64_t req_id) {
  rt_->send(Frame{type, self_, dst, std::move(payload)});
  for (;;) {
    auto f = mailbox_->receive(std::nullopt);
    if (!f) continue;
    if (f->type == MsgType::REPLY) {
      MsgReply rep = MsgReply::decode(f->payload);
      if (rep.req_id == req_id) return rep;
      continue;  // stale reply
    }
    if (f->type == MsgType::STATUS_REQ) {
      answer_status(f->src);
      continue;
    }
    stash_.push_back(std::move(*f));
  }
}

Value Worker::fetch(const ObjectID& id) {
  uint64_t req = std::exchange(next_req_, next_req_ + 2);
  MsgEnsureLocal m;
  m.req_id = req;
  m.object = id;
  MsgReply rep = blocking_call(store_, MsgType::ENSURE_LOCAL, m.encode(), req);
  if (rep.status != Status::OK)
    return make_error_value(std::string("input unavailable: ") + status_name(rep.status));
  try {
    return decode_value(rep.body);
  } catch (const MalformedEncoding& e) {
    return make_error_value(e.what());
  }
}

void Worker::execute(const TaskSpec& spec) {
  busy_ = true;
  current_ = spec.task_id;
  submit_counter_ = 0;
  control_.update_state(spec.task_id, TaskState::RUNNING, node_id_);

  std::vector<Value> args;
  std::optional<Value> arg_error;
  for (const Arg& a : spec.args) {
    if (!a.is_future()) {
      args.push_back(a.value);
      continue;
    }
    Value v = fetch(*a.ref);
    if (is_error_value(v) && !arg_error) arg_error = v;
    args.push_back(std::move(v));
  }

  std::vector<Value> outputs;
  if (arg_error) {
    outputs.assign(spec.num_returns, *arg_error);
  } else {
    const Kernel* k = registry_ ? registry_->find(spec.function_name) : nullptr;
    if (!k) {
      outputs.assign(spec.num_returns,
                     make_error_value("unknown function: " + spec.function_name));
    } else {
      try {
        WorkerKernelContext ctx(this, spec, std::move(args));
        outputs = (*k)(ctx);
      } catch (const std::exception& e) {
        outputs.assign(spec.num_returns,
                       make_error_value(std::string("kernel failed: ") + e.what()));
      }
    }
  }
  while (outputs.size() < spec.num_returns)
    outputs.push_back(make_error_value("missing return value"));
  outputs.resize(spec.num_returns);

  MsgTaskFinished fin;
  fin.task = spec.task_id;
  for (const Value& v : outputs) fin.payloads.push_back(encode_value(v));
  rt_->send(Frame{MsgType::TASK_FINISHED, self_, ls_, fin.encode()});
  busy_ = false;
  current_ = TaskID{};
}

void Worker::run() {
  // Announce liveness so a scheduler that restarted (or just started) counts
  // this worker as idle.
  answer_status(ls_);
  for (;;) {
    auto f = next_frame();
    if (!f) continue;
    switch (f->type) {
      case MsgType::ASSIGN: {
        try {
          execute(TaskSpec::decode(MsgAssign::decode(f->payload).spec_bytes));
        } catch (const MalformedEncoding&) {
        }
        break;
      }
      case MsgType::STATUS_REQ:
        answer_status(f->src);
        break;
      default:
        break;
    }
  }
}

}  // namespace dflow
