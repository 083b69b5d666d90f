#include <atomic>
#include <sstream>
#include <vector>

#include "dflow/proc_runtime.hpp"
#include "dflow/sim_runtime.hpp"
#include "doctest.h"

using namespace dflow;

namespace {

Frame mk(MsgType t, const EndpointId& src, const EndpointId& dst, std::string payload) {
  return Frame{t, src, dst, std::move(payload)};
}

}  // namespace

TEST_CASE("sim: intra vs inter node latency and shard service time") {
  SimParams p;
  p.intra_node_latency = 1;
  p.inter_node_latency = 10;
  p.shard_service = 1;
  SimRuntime rt(p);

  std::vector<std::pair<std::string, int64_t>> log;
  rt.register_handler("node/0/ls", [&](Frame f) { log.emplace_back(f.payload, rt.now()); });
  rt.register_handler("node/1/ls", [&](Frame f) { log.emplace_back(f.payload, rt.now()); });
  rt.register_handler("shard/0", [&](Frame f) { log.emplace_back(f.payload, rt.now()); });

  rt.send(mk(MsgType::LS_TICK, "node/0/store", "node/0/ls", "intra"));
  rt.send(mk(MsgType::LS_TICK, "node/0/store", "node/1/ls", "inter"));
  rt.send(mk(MsgType::SCAN, "node/0/store", "shard/0", "s1"));
  rt.send(mk(MsgType::SCAN, "node/0/store", "shard/0", "s2"));
  rt.run_to_idle();

  REQUIRE(log.size() == 4);
  // Same node prefix -> intra latency; different -> inter.
  CHECK(log[0] == std::pair<std::string, int64_t>{"intra", 1});
  CHECK(log[1] == std::pair<std::string, int64_t>{"inter", 10});
  // Shard requests arrive after transit plus queued service time: the first
  // completes at 10+1, the second waits behind it and completes at 12.
  CHECK(log[2] == std::pair<std::string, int64_t>{"s1", 11});
  CHECK(log[3] == std::pair<std::string, int64_t>{"s2", 12});
}

TEST_CASE("sim: frames between a pair deliver in send order") {
  SimRuntime rt;
  std::vector<std::string> got;
  rt.register_handler("b", [&](Frame f) { got.push_back(f.payload); });
  for (int i = 0; i < 20; ++i)
    rt.send(mk(MsgType::LS_TICK, "a", "b", "m" + std::to_string(i)));
  rt.run_to_idle();
  REQUIRE(got.size() == 20);
  for (int i = 0; i < 20; ++i) CHECK(got[i] == "m" + std::to_string(i));
}

TEST_CASE("sim: identical runs produce identical event traces") {
  auto run = [] {
    std::ostringstream trace;
    SimRuntime rt;
    rt.register_handler("shard/0", [&](Frame f) {
      trace << rt.now() << ':' << f.payload << ';';
      if (f.payload.size() < 3)
        rt.send(mk(MsgType::SCAN, "shard/0", "shard/1", f.payload + "x"));
    });
    rt.register_handler("shard/1", [&](Frame f) {
      trace << rt.now() << ':' << f.payload << ';';
      rt.schedule("shard/0", mk(MsgType::SCAN, "shard/1", "shard/0", f.payload + "y"), 5);
    });
    for (int i = 0; i < 5; ++i)
      rt.send(mk(MsgType::SCAN, "driver", "shard/0", std::string(1, 'a' + i)));
    rt.run_to_idle();
    return trace.str();
  };
  std::string a = run(), b = run();
  CHECK(a == b);
  CHECK(!a.empty());
}

TEST_CASE("sim: timers fire at the scheduled tick in order") {
  SimRuntime rt;
  std::vector<std::pair<std::string, int64_t>> got;
  rt.register_handler("t", [&](Frame f) { got.emplace_back(f.payload, rt.now()); });
  rt.schedule("t", mk(MsgType::LS_TICK, "t", "t", "late"), 100);
  rt.schedule("t", mk(MsgType::LS_TICK, "t", "t", "early"), 10);
  rt.run_to_idle();
  REQUIRE(got.size() == 2);
  CHECK(got[0] == std::pair<std::string, int64_t>{"early", 10});
  CHECK(got[1] == std::pair<std::string, int64_t>{"late", 100});
}

TEST_CASE("sim: blocking activity with mailbox, receive deadline, sleep") {
  SimRuntime rt;
  Mailbox* mb = rt.register_mailbox("w");
  std::vector<std::string> got;
  int64_t woke = -1;
  bool done = false;
  rt.spawn_activity("w", [&] {
    auto f = mb->receive(std::nullopt);
    got.push_back(f->payload);
    // Deadline with no traffic: times out at the given tick.
    auto none = mb->receive(rt.now() + 7);
    CHECK_FALSE(none.has_value());
    rt.sleep_until(rt.now() + 5);
    woke = rt.now();
    done = true;
  });
  rt.schedule("w", mk(MsgType::ASSIGN, "x", "w", "task"), 3);
  rt.run_until([&] { return done; });
  REQUIRE(got.size() == 1);
  CHECK(got[0] == "task");
  CHECK(woke == 3 + 7 + 5);
}

TEST_CASE("sim: kill_prefix drops frames, re-register revives the endpoint") {
  SimRuntime rt;
  std::vector<std::string> got;
  rt.register_handler("node/1/ls", [&](Frame f) { got.push_back("old:" + f.payload); });
  rt.send(mk(MsgType::LS_TICK, "a", "node/1/ls", "one"));
  rt.run_to_idle();

  rt.kill_prefix("node/1/");
  CHECK(rt.is_dead("node/1/ls"));
  rt.send(mk(MsgType::LS_TICK, "a", "node/1/ls", "dropped"));
  rt.run_to_idle();

  rt.register_handler("node/1/ls", [&](Frame f) { got.push_back("new:" + f.payload); });
  CHECK_FALSE(rt.is_dead("node/1/ls"));
  rt.send(mk(MsgType::LS_TICK, "a", "node/1/ls", "two"));
  rt.run_to_idle();

  REQUIRE(got.size() == 2);
  CHECK(got[0] == "old:one");
  CHECK(got[1] == "new:two");
}

TEST_CASE("sim: killing an activity unwinds its blocking receive") {
  SimRuntime rt;
  Mailbox* mb = rt.register_mailbox("node/0/w/0");
  bool unwound = false;
  rt.spawn_activity("node/0/w/0", [&] {
    try {
      mb->receive(std::nullopt);
    } catch (const ActivityKilled&) {
      unwound = true;
      throw;
    }
  });
  rt.schedule("ctl", mk(MsgType::LS_TICK, "ctl", "ctl", ""), 1);  // keep queue non-empty
  rt.register_handler("ctl", [&](Frame) { rt.kill_prefix("node/0/"); });
  rt.run_to_idle();
  CHECK(unwound);
}

TEST_CASE("sim: frames from a killed source are dropped") {
  SimRuntime rt;
  std::vector<std::string> got;
  rt.register_handler("sink", [&](Frame f) { got.push_back(f.payload); });
  rt.register_handler("node/2/ls", [](Frame) {});
  rt.kill_prefix("node/2/");
  rt.send(mk(MsgType::LS_TICK, "node/2/ls", "sink", "ghost"));
  rt.send(mk(MsgType::LS_TICK, "live", "sink", "real"));
  rt.run_to_idle();
  REQUIRE(got.size() == 1);
  CHECK(got[0] == "real");
}

TEST_CASE("proc: frames travel over localhost TCP and arrive in order") {
  std::map<EndpointId, uint16_t> ports{{"a", 46100}, {"b", 46101}};
  ProcRuntime rt(std::move(ports));
  std::mutex m;
  std::condition_variable cv;
  std::vector<std::string> got;
  rt.register_handler("b", [&](Frame f) {
    std::lock_guard<std::mutex> l(m);
    got.push_back(f.payload);
    cv.notify_all();
  });
  for (int i = 0; i < 50; ++i)
    rt.send(mk(MsgType::LS_TICK, "a", "b", "p" + std::to_string(i)));
  {
    std::unique_lock<std::mutex> l(m);
    REQUIRE(cv.wait_for(l, std::chrono::seconds(10), [&] { return got.size() == 50; }));
  }
  for (int i = 0; i < 50; ++i) CHECK(got[i] == "p" + std::to_string(i));
  rt.shutdown();
}

TEST_CASE("proc: timers, deadlines, and kill/revive") {
  std::map<EndpointId, uint16_t> ports{{"x", 46110}, {"node/0/w/0", 46111}};
  ProcRuntime rt(std::move(ports));

  std::mutex m;
  std::condition_variable cv;
  int timer_hits = 0;
  rt.register_handler("x", [&](Frame) {
    std::lock_guard<std::mutex> l(m);
    ++timer_hits;
    cv.notify_all();
  });
  rt.schedule("x", mk(MsgType::LS_TICK, "x", "x", ""), 1'000'000);  // 1ms
  {
    std::unique_lock<std::mutex> l(m);
    REQUIRE(cv.wait_for(l, std::chrono::seconds(5), [&] { return timer_hits == 1; }));
  }

  Mailbox* mb = rt.register_mailbox("node/0/w/0");
  // Deadline in the past returns immediately with nothing.
  CHECK_FALSE(mb->receive(rt.now() - 1).has_value());

  std::atomic<bool> unwound{false};
  std::thread activity([&] {
    try {
      mb->receive(std::nullopt);
    } catch (const ActivityKilled&) {
      unwound = true;
    }
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  rt.kill_prefix("node/0/");
  activity.join();
  CHECK(unwound.load());
  CHECK(rt.is_dead("node/0/w/0"));

  // Revival: a fresh mailbox on the same endpoint receives again.
  Mailbox* mb2 = rt.register_mailbox("node/0/w/0");
  CHECK_FALSE(rt.is_dead("node/0/w/0"));
  rt.send(mk(MsgType::ASSIGN, "x", "node/0/w/0", "back"));
  auto f = mb2->receive(rt.now() + 5'000'000'000);
  REQUIRE(f.has_value());
  CHECK(f->payload == "back");
  rt.shutdown();
}

TEST_CASE("proc: endpoints absent from the port map get ephemeral ports") {
  std::map<EndpointId, uint16_t> ports{{"known", 46120}};
  ProcRuntime rt(std::move(ports));
  std::mutex m;
  std::condition_variable cv;
  bool got = false;
  rt.register_handler("scan/0", [&](Frame) {
    std::lock_guard<std::mutex> l(m);
    got = true;
    cv.notify_all();
  });
  rt.send(mk(MsgType::REPLY, "known", "scan/0", "hello"));
  std::unique_lock<std::mutex> l(m);
  CHECK(cv.wait_for(l, std::chrono::seconds(5), [&] { return got; }));
  rt.shutdown();
}
