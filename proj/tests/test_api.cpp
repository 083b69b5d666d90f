#include <memory>

#include "dflow/cluster.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace dflow;

namespace {

std::unique_ptr<Cluster> make_cluster(uint32_t nodes = 2, uint32_t wpn = 2,
                                      uint32_t shards = 2) {
  ClusterConfig cfg;
  cfg.mode = ClusterConfig::Mode::SIM;
  cfg.num_nodes = nodes;
  cfg.workers_per_node = wpn;
  cfg.num_shards = shards;
  auto c = std::make_unique<Cluster>(cfg);
  c->start();
  return c;
}

}  // namespace

TEST_CASE("remote computes over inline args and get returns the value") {
  auto c = make_cluster();
  c->run_driver([&](Driver& d) {
    auto ids = d.remote("add", {Arg::inline_value(Value::Int(40)),
                                Arg::inline_value(Value::Int(2))});
    REQUIRE(ids.size() == 1);
    CHECK(d.get(ids[0]) == Value::Int(42));

    // Structured values survive the round trip bit-exactly.
    Value v = Value::List({Value::Str("hi"), Value::Float(2.5),
                           Value::Bytes(std::string("\x00\x01\xff", 3))});
    auto echo = d.remote("const", {Arg::inline_value(v)});
    CHECK(d.get(echo[0]) == v);
  });
}

TEST_CASE("put stores a value; futures from puts feed tasks") {
  auto c = make_cluster();
  c->run_driver([&](Driver& d) {
    ObjectID a = d.put(Value::Int(7));
    ObjectID b = d.put(Value::Int(7));
    CHECK(a != b);  // puts are distinct objects even for equal values
    CHECK(d.get(a) == Value::Int(7));

    auto sum = d.remote("add", {Arg::future(a), Arg::inline_value(Value::Int(1))});
    CHECK(d.get(sum[0]) == Value::Int(8));
  });
}

TEST_CASE("submitting an unregistered function fails before anything is sent") {
  auto c = make_cluster();
  c->run_driver([&](Driver& d) {
    CHECK_THROWS_AS(d.remote("no_such_kernel", {}), UnknownFunctionError);
  });
  CHECK(c->scan_tasks().empty());
}

TEST_CASE("get enforces its timeout, including a zero timeout") {
  auto c = make_cluster();
  c->run_driver([&](Driver& d) {
    auto slow = d.remote("sleep_us", {Arg::inline_value(Value::Int(1'000'000))});
    CHECK_THROWS_AS(d.get(slow[0], 500), GetTimeout);
    CHECK_THROWS_AS(d.get(slow[0], 0), GetTimeout);
    // Without a timeout the same get blocks until the task finishes.
    CHECK(d.get(slow[0]) == Value::Int(1'000'000));
  });
}

TEST_CASE("wait returns the first k completions in input order") {
  auto c = make_cluster();
  c->run_driver([&](Driver& d) {
    auto slow = d.remote("sleep_us", {Arg::inline_value(Value::Int(500'000))});
    auto f1 = d.remote("sleep_echo", {Arg::inline_value(Value::Int(1'000)),
                                      Arg::inline_value(Value::Int(1))});
    auto f2 = d.remote("sleep_echo", {Arg::inline_value(Value::Int(2'000)),
                                      Arg::inline_value(Value::Int(2))});
    std::vector<ObjectID> ids{slow[0], f1[0], f2[0]};

    CHECK_THROWS_AS(d.wait({f1[0], f1[0]}, 1), BadWaitArgs);  // duplicates
    CHECK_THROWS_AS(d.wait(ids, 4), BadWaitArgs);             // k > n

    WaitResult w = d.wait(ids, 2);
    CHECK(w.ready == std::vector<ObjectID>{f1[0], f2[0]});
    CHECK(w.not_ready == std::vector<ObjectID>{slow[0]});

    WaitResult none = d.wait(ids, 0);
    CHECK(none.ready.empty());
    CHECK(none.not_ready.size() == 3);

    // Already-sealed futures rank by input order.
    WaitResult first = d.wait({f2[0], f1[0]}, 1);
    CHECK(first.ready == std::vector<ObjectID>{f2[0]});

    // Timeout: the slow task is still running, so nothing becomes ready.
    WaitResult timed = d.wait({slow[0]}, 1, 10'000);
    CHECK(timed.ready.empty());
    CHECK(timed.not_ready == std::vector<ObjectID>{slow[0]});
  });
}

TEST_CASE("a failing task yields an error value that poisons its dependents") {
  auto c = make_cluster();
  c->run_driver([&](Driver& d) {
    auto bad = d.remote("crash", {});
    Value v = d.get(bad[0]);
    REQUIRE(is_error_value(v));
    CHECK(error_message(v).find("crash") != std::string::npos);

    auto dep = d.remote("add", {Arg::future(bad[0]), Arg::inline_value(Value::Int(1))});
    CHECK(is_error_value(d.get(dep[0])));
  });
}

TEST_CASE("multiple returns produce one future per output") {
  auto c = make_cluster();
  c->run_driver([&](Driver& d) {
    auto ids = d.remote("iota", {Arg::inline_value(Value::Int(5))}, 3);
    REQUIRE(ids.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(d.get(ids[i]) == Value::Int(5 + i));
  });
}

TEST_CASE("tasks can submit tasks: fan-out and nested blocking get") {
  auto c = make_cluster();
  c->run_driver([&](Driver& d) {
    auto l = d.remote("spawn_noops", {Arg::inline_value(Value::Int(3))});
    Value lv = d.get(l[0]);
    REQUIRE(lv.is_list());
    REQUIRE(lv.as_list().size() == 3);
    for (const Value& ref : lv.as_list()) {
      REQUIRE(ref.is_ref());
      CHECK(d.get(ref.as_ref()) == Value::Int(0));
    }

    auto g = d.remote("get_child", {Arg::inline_value(Value::Str("abc"))});
    CHECK(d.get(g[0]) == Value::Str("abc"));
  });
}

TEST_CASE("a flood larger than local capacity spills, spreads, and completes") {
  auto c = make_cluster(3, 1, 2);
  c->run_driver([&](Driver& d) {
    std::vector<ObjectID> futures;
    for (int i = 0; i < 30; ++i) futures.push_back(d.remote("noop", {})[0]);
    for (const auto& f : futures) CHECK(d.get(f) == Value::Int(0));
  });
  size_t done = 0, other = 0;
  for (const auto& t : c->scan_tasks())
    (t.snap.state == TaskState::DONE ? done : other)++;
  CHECK(done == 30);
  CHECK(other == 0);
}

TEST_CASE("a dependency DAG computes exactly what local evaluation predicts") {
  auto c = make_cluster();
  Value got;
  c->run_driver([&](Driver& d) {
    auto a = d.remote("mix", {Arg::inline_value(Value::Int(11))});
    auto b = d.remote("mix", {Arg::future(a[0])});
    auto cc = d.remote("mix", {Arg::future(a[0]), Arg::inline_value(Value::Str("x"))});
    auto r = d.remote("mix", {Arg::future(b[0]), Arg::future(cc[0]),
                              Arg::inline_value(Value::Int(7))});
    got = d.get(r[0]);
  });

  // Driver task ids derive from the zero root and the submission counter, so
  // the seeds are predictable; evaluate the same DAG bottom-up locally.
  auto seed = [](uint32_t i) { return derive_task_id(TaskID{}, i).low64(); };
  Value va = oracle::mix(seed(0), {Value::Int(11)});
  Value vb = oracle::mix(seed(1), {va});
  Value vc = oracle::mix(seed(2), {va, Value::Str("x")});
  Value vr = oracle::mix(seed(3), {vb, vc, Value::Int(7)});
  CHECK(got == vr);
}

TEST_CASE("a long serial chain threads values through dependent tasks") {
  auto c = make_cluster();
  c->run_driver([&](Driver& d) {
    ObjectID prev = d.remote("const", {Arg::inline_value(Value::Int(1))})[0];
    for (int i = 0; i < 20; ++i)
      prev = d.remote("add", {Arg::future(prev), Arg::inline_value(Value::Int(1))})[0];
    CHECK(d.get(prev) == Value::Int(21));
  });
}
