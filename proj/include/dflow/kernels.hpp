#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dflow/task.hpp"
#include "dflow/value.hpp"

namespace dflow {

// What a running kernel can do. The worker provides the implementation;
// everything here is deterministic given the task spec (sleeping affects
// timing, never results).
class KernelContext {
 public:
  virtual ~KernelContext() = default;

  virtual const TaskSpec& spec() const = 0;
  virtual const std::vector<Value>& args() const = 0;
  uint64_t seed() const { return spec().rng_seed; }

  // Occupies the worker for d microseconds (simulated ticks in sim mode).
  virtual void sleep_us(int64_t d) = 0;

  // Submits a child task; the child's id derives from this task's id and a
  // per-task submission counter, so replay regenerates identical ids.
  virtual std::vector<ObjectID> submit(const std::string& function_name,
                                       std::vector<Arg> args, uint32_t num_returns,
                                       Resources demand) = 0;

  // Blocks until the future's value is available locally.
  virtual Value get(const ObjectID& id) = 0;
};

using Kernel = std::function<std::vector<Value>(KernelContext&)>;

class FunctionRegistry {
 public:
  void add(const std::string& name, Kernel fn) { fns_[name] = std::move(fn); }
  const Kernel* find(const std::string& name) const {
    auto it = fns_.find(name);
    return it == fns_.end() ? nullptr : &it->second;
  }
  bool contains(const std::string& name) const { return fns_.count(name) > 0; }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [n, f] : fns_) out.push_back(n);
    return out;
  }

 private:
  std::map<std::string, Kernel> fns_;
};

// Deterministic 64-bit mixer shared by kernels and test oracles.
uint64_t splitmix64(uint64_t x);

// Registers the built-in kernel set used by the benchmarks and tests.
void register_builtin_kernels(FunctionRegistry& reg);

}  // namespace dflow
