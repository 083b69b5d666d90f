#pragma once

// Reference computations the integration tests compare cluster results
// against. Each one evaluates the workload locally and directly, without the
// scheduler, store, or control plane in the loop.

#include <algorithm>
#include <vector>

#include "dflow/bench.hpp"
#include "dflow/kernels.hpp"
#include "dflow/value.hpp"

namespace dflow::oracle {

// Local evaluation of the "mix" kernel: digest of the task seed and the
// resolved argument values. Evaluating a DAG bottom-up with this must match
// what the cluster computes for the same submissions.
inline Value mix(uint64_t seed, const std::vector<Value>& args) {
  ByteWriter w;
  w.u64(seed);
  for (const auto& a : args) encode_value(a, w);
  std::string h = sha256(w.view());
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<uint8_t>(h[i]);
  return Value::Int(static_cast<int64_t>(v >> 1));
}

// Recursive evaluation of the search tree: the best leaf score reachable
// from a path seed.
inline int64_t tree_best(int64_t branching, int64_t depth, uint64_t path_seed) {
  if (depth <= 1) return static_cast<int64_t>(splitmix64(path_seed) >> 1);
  int64_t best = 0;
  for (int64_t i = 0; i < branching; ++i) {
    uint64_t child = splitmix64(path_seed ^ static_cast<uint64_t>(i + 1));
    best = std::max(best, tree_best(branching, depth - 1, child));
  }
  return best;
}

inline uint64_t tree_leaves(int branching, int depth) {
  uint64_t n = 1;
  for (int i = 1; i < depth; ++i) n *= static_cast<uint64_t>(branching);
  return n;
}

// Total expand tasks: one per interior or leaf node above the value level,
// i.e. the geometric series 1 + b + ... + b^(depth-1).
inline uint64_t tree_tasks(int branching, int depth) {
  uint64_t total = 0, level = 1;
  for (int i = 0; i < depth; ++i) {
    total += level;
    level *= static_cast<uint64_t>(branching);
  }
  return total;
}

// The rollout/update loop folds every policy output into a wrapping sum, and
// each policy output is the wrapping sum of its batch's rollout values. Every
// rollout lands in exactly one batch, so whatever order completions arrive
// in, the aggregate equals the wrapping sum over all rollout values. Rollout
// (iter, j) always computes splitmix64(iter * sims + j) >> 1.
inline int64_t rl_aggregate(const RlParams& p) {
  uint64_t sum = 0;
  for (int iter = 0; iter < p.iters; ++iter)
    for (int j = 0; j < p.sims; ++j) {
      uint64_t payload = static_cast<uint64_t>(iter) * static_cast<uint64_t>(p.sims) +
                         static_cast<uint64_t>(j);
      sum += splitmix64(payload) >> 1;
    }
  return static_cast<int64_t>(sum);
}

}  // namespace dflow::oracle
