#include "dflow/kernels.hpp"

#include <stdexcept>

namespace dflow {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

int64_t int_arg(const KernelContext& ctx, size_t i) {
  const auto& a = ctx.args();
  if (i >= a.size() || !a[i].is_int())
    throw std::runtime_error("expected int argument at position " + std::to_string(i));
  return a[i].as_int();
}

}  // namespace

void register_builtin_kernels(FunctionRegistry& reg) {
  reg.add("noop", [](KernelContext&) { return std::vector<Value>{Value::Int(0)}; });

  reg.add("const", [](KernelContext& ctx) {
    return std::vector<Value>{ctx.args().empty() ? Value::Int(0) : ctx.args()[0]};
  });

  reg.add("add", [](KernelContext& ctx) {
    uint64_t sum = 0;  // unsigned so large inputs wrap instead of overflowing
    for (const auto& a : ctx.args())
      if (a.is_int()) sum += static_cast<uint64_t>(a.as_int());
    return std::vector<Value>{Value::Int(static_cast<int64_t>(sum))};
  });

  // Deterministic digest of all resolved arguments plus the task seed. Used
  // by the DAG property tests: replaying the task must reproduce the value.
  reg.add("mix", [](KernelContext& ctx) {
    ByteWriter w;
    w.u64(ctx.seed());
    for (const auto& a : ctx.args()) encode_value(a, w);
    std::string h = sha256(w.view());
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<uint8_t>(h[i]);
    return std::vector<Value>{Value::Int(static_cast<int64_t>(v >> 1))};
  });

  reg.add("sleep_us", [](KernelContext& ctx) {
    int64_t d = int_arg(ctx, 0);
    ctx.sleep_us(d);
    return std::vector<Value>{Value::Int(d)};
  });

  reg.add("sleep_echo", [](KernelContext& ctx) {
    ctx.sleep_us(int_arg(ctx, 0));
    return std::vector<Value>{ctx.args().size() > 1 ? ctx.args()[1] : Value::Int(0)};
  });

  // One rollout step: busy for the given duration, produce a value derived
  // only from the payload so results are identical across modes and replays.
  reg.add("simulate", [](KernelContext& ctx) {
    int64_t d = int_arg(ctx, 0);
    int64_t payload = int_arg(ctx, 1);
    ctx.sleep_us(d);
    return std::vector<Value>{
        Value::Int(static_cast<int64_t>(splitmix64(static_cast<uint64_t>(payload)) >> 1))};
  });

  // Policy update over a batch of rollout results: args[0] is the model
  // latency, the rest are resolved rollout values.
  reg.add("policy_step", [](KernelContext& ctx) {
    int64_t d = int_arg(ctx, 0);
    ctx.sleep_us(d);
    uint64_t sum = 0;  // wraps on purpose; aggregate is an order-insensitive digest
    for (size_t i = 1; i < ctx.args().size(); ++i)
      if (ctx.args()[i].is_int()) sum += static_cast<uint64_t>(ctx.args()[i].as_int());
    return std::vector<Value>{Value::Int(static_cast<int64_t>(sum))};
  });

  // Tree search node: leaves score their path seed, interior nodes fan out
  // recursively. Child seeds derive from the path seed so the whole tree is
  // a pure function of the root arguments.
  reg.add("expand", [](KernelContext& ctx) {
    int64_t branching = int_arg(ctx, 0);
    int64_t depth = int_arg(ctx, 1);
    uint64_t path_seed = static_cast<uint64_t>(int_arg(ctx, 2));
    if (depth <= 1) {
      return std::vector<Value>{
          Value::Int(static_cast<int64_t>(splitmix64(path_seed) >> 1))};
    }
    std::vector<Value> refs;
    for (int64_t i = 0; i < branching; ++i) {
      uint64_t child_seed = splitmix64(path_seed ^ static_cast<uint64_t>(i + 1));
      auto ids = ctx.submit(
          "expand",
          {Arg::inline_value(Value::Int(branching)),
           Arg::inline_value(Value::Int(depth - 1)),
           Arg::inline_value(Value::Int(static_cast<int64_t>(child_seed)))},
          1, Resources{1, 0});
      refs.push_back(Value::Ref(ids[0]));
    }
    return std::vector<Value>{Value::List(std::move(refs))};
  });

  reg.add("spawn_noops", [](KernelContext& ctx) {
    int64_t n = int_arg(ctx, 0);
    std::vector<Value> refs;
    for (int64_t i = 0; i < n; ++i) {
      auto ids = ctx.submit("noop", {}, 1, Resources{1, 0});
      refs.push_back(Value::Ref(ids[0]));
    }
    return std::vector<Value>{Value::List(std::move(refs))};
  });

  // Submits a child and blocks on its result from inside the kernel.
  reg.add("get_child", [](KernelContext& ctx) {
    auto ids = ctx.submit("const", {Arg::inline_value(ctx.args()[0])}, 1, Resources{1, 0});
    return std::vector<Value>{ctx.get(ids[0])};
  });

  reg.add("iota", [](KernelContext& ctx) {
    int64_t base = ctx.args().empty() ? 0 : int_arg(ctx, 0);
    std::vector<Value> out;
    for (uint32_t i = 0; i < ctx.spec().num_returns; ++i)
      out.push_back(Value::Int(base + i));
    return out;
  });

  reg.add("crash", [](KernelContext&) -> std::vector<Value> {
    throw std::runtime_error("crash kernel always fails");
  });
}

}  // namespace dflow
