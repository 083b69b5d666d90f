#include "dflow/cluster.hpp"

#include <algorithm>
#include <condition_variable>
#include <fstream>
#include <sstream>

namespace dflow {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

ClusterConfig ClusterConfig::parse(const std::string& text) {
  ClusterConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    auto num = [&]() -> int64_t {
      try {
        return std::stoll(val);
      } catch (...) {
        throw std::invalid_argument("config key '" + key + "': bad number '" + val + "'");
      }
    };
    if (key == "mode") {
      if (val == "sim")
        cfg.mode = Mode::SIM;
      else if (val == "proc")
        cfg.mode = Mode::PROC;
      else
        throw std::invalid_argument("config: mode must be sim or proc");
    } else if (key == "nodes") {
      cfg.num_nodes = static_cast<uint32_t>(num());
    } else if (key == "workers_per_node") {
      cfg.workers_per_node = static_cast<uint32_t>(num());
    } else if (key == "shards") {
      cfg.num_shards = static_cast<uint32_t>(num());
    } else if (key == "globals") {
      cfg.num_globals = static_cast<uint32_t>(num());
    } else if (key == "cpu") {
      cfg.default_node.cpu = static_cast<uint32_t>(num());
    } else if (key == "gpu") {
      cfg.default_node.gpu = static_cast<uint32_t>(num());
    } else if (key == "theta") {
      cfg.theta = static_cast<uint32_t>(num());
    } else if (key == "seed") {
      cfg.seed = static_cast<uint64_t>(num());
    } else if (key == "base_port") {
      cfg.base_port = static_cast<uint16_t>(num());
    } else if (key == "store_capacity") {
      cfg.store_capacity = static_cast<uint64_t>(num());
    } else if (key == "intra_latency") {
      cfg.sim.intra_node_latency = num();
    } else if (key == "inter_latency") {
      cfg.sim.inter_node_latency = num();
    } else if (key == "shard_service") {
      cfg.sim.shard_service = num();
    } else if (key == "heartbeat_period_us") {
      cfg.heartbeat_period_us = num();
    } else if (key == "heartbeat_timeout_us") {
      cfg.heartbeat_timeout_us = num();
    } else if (key == "gs_tick_us") {
      cfg.gs_tick_us = num();
    } else if (key == "store_retry_us") {
      cfg.store_retry_us = num();
    } else if (key.rfind("node", 0) == 0 && key.find('.') != std::string::npos) {
      auto dot = key.find('.');
      uint32_t idx = static_cast<uint32_t>(std::stoul(key.substr(4, dot - 4)));
      std::string field = key.substr(dot + 1);
      Resources r = cfg.node_overrides.count(idx) ? cfg.node_overrides[idx]
                                                  : cfg.default_node;
      if (field == "cpu")
        r.cpu = static_cast<uint32_t>(num());
      else if (field == "gpu")
        r.gpu = static_cast<uint32_t>(num());
      else
        throw std::invalid_argument("config: unknown node field '" + field + "'");
      cfg.node_overrides[idx] = r;
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  if (cfg.num_nodes == 0 || cfg.num_shards == 0 || cfg.num_globals == 0 ||
      cfg.workers_per_node == 0)
    throw std::invalid_argument("config: counts must be positive");
  return cfg;
}

ClusterConfig ClusterConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

// --- Cluster ----------------------------------------------------------------

Cluster::Cluster(ClusterConfig cfg) : cfg_(std::move(cfg)) {
  theta_ = cfg_.theta ? cfg_.theta : 2 * cfg_.workers_per_node;
  bool sim = cfg_.mode == ClusterConfig::Mode::SIM;
  int64_t hp_us = cfg_.heartbeat_period_us ? cfg_.heartbeat_period_us : (sim ? 100 : 20000);
  int64_t ht_us = cfg_.heartbeat_timeout_us ? cfg_.heartbeat_timeout_us : 5 * hp_us;
  int64_t gt_us = cfg_.gs_tick_us ? cfg_.gs_tick_us : hp_us;
  int64_t sr_us = cfg_.store_retry_us ? cfg_.store_retry_us : (sim ? 200 : 20000);
  hb_period_ = units_from_us(hp_us);
  hb_timeout_ = units_from_us(ht_us);
  gs_tick_ = units_from_us(gt_us);
  store_retry_ = units_from_us(sr_us);
  register_builtin_kernels(registry_);
}

Cluster::~Cluster() { shutdown(); }

std::map<EndpointId, uint16_t> Cluster::port_map() const {
  std::map<EndpointId, uint16_t> ports;
  uint16_t p = cfg_.base_port;
  for (uint32_t i = 0; i < cfg_.num_shards; ++i) ports["shard/" + std::to_string(i)] = p++;
  for (uint32_t i = 0; i < cfg_.num_globals; ++i) ports["gs/" + std::to_string(i)] = p++;
  for (uint32_t n = 0; n < cfg_.num_nodes; ++n) {
    std::string base = "node/" + std::to_string(n) + "/";
    ports[base + "ls"] = p++;
    ports[base + "store"] = p++;
    for (uint32_t w = 0; w < cfg_.workers_per_node; ++w)
      ports[base + "w/" + std::to_string(w)] = p++;
  }
  ports["driver"] = p++;
  ports["driver/store"] = p++;
  return ports;
}

GlobalSchedulerParams Cluster::gs_params(uint32_t index) const {
  GlobalSchedulerParams gp;
  gp.index = index;
  gp.num_globals = cfg_.num_globals;
  gp.num_shards = cfg_.num_shards;
  for (uint32_t n = 0; n < cfg_.num_nodes; ++n)
    gp.nodes.emplace_back("n" + std::to_string(n), cfg_.node_resources(n));
  gp.tick_period = gs_tick_;
  gp.heartbeat_timeout = hb_timeout_;
  return gp;
}

void Cluster::make_store(uint32_t node) {
  std::string ep = "node/" + std::to_string(node) + "/store";
  auto store = std::make_unique<ObjectStore>(rt_.get(), ep, "n" + std::to_string(node),
                                             cfg_.num_shards, cfg_.num_globals,
                                             cfg_.store_capacity, store_retry_);
  ObjectStore* p = store.get();
  stores_[node] = std::move(store);
  rt_->register_handler(ep, [p](Frame f) { p->handle(std::move(f)); });
}

void Cluster::make_driver_store() {
  auto store = std::make_unique<ObjectStore>(rt_.get(), "driver/store", "driver",
                                             cfg_.num_shards, cfg_.num_globals,
                                             cfg_.store_capacity, store_retry_);
  ObjectStore* p = store.get();
  driver_store_ = std::move(store);
  rt_->register_handler("driver/store", [p](Frame f) { p->handle(std::move(f)); });
}

void Cluster::make_ls(uint32_t i, bool reconcile) {
  LocalSchedulerParams lp;
  lp.node_id = "n" + std::to_string(i);
  lp.node_index = i;
  lp.num_workers = cfg_.workers_per_node;
  lp.total = cfg_.node_resources(i);
  lp.theta = theta_;
  lp.num_shards = cfg_.num_shards;
  lp.num_globals = cfg_.num_globals;
  lp.heartbeat_period = hb_period_;
  auto ls = std::make_unique<LocalScheduler>(rt_.get(), lp);
  LocalScheduler* p = ls.get();
  ls_[i] = std::move(ls);
  rt_->register_handler(p->endpoint(), [p](Frame f) { p->handle(std::move(f)); });
  p->start(reconcile);
}

void Cluster::make_gs(uint32_t i, bool reconcile) {
  auto gs = std::make_unique<GlobalScheduler>(rt_.get(), gs_params(i));
  GlobalScheduler* p = gs.get();
  gs_[i] = std::move(gs);
  rt_->register_handler("gs/" + std::to_string(i), [p](Frame f) { p->handle(std::move(f)); });
  p->start(reconcile);
}

void Cluster::make_worker(uint32_t node, uint32_t w) {
  auto worker = std::make_unique<Worker>(rt_.get(), node, w, "n" + std::to_string(node),
                                         cfg_.num_shards, &registry_);
  Worker* p = worker.get();
  workers_[node][w] = std::move(worker);
  rt_->spawn_activity(p->endpoint(), [p] { p->run(); });
}

void Cluster::start() {
  if (started_) return;
  started_ = true;
  if (cfg_.mode == ClusterConfig::Mode::SIM) {
    auto sim = std::make_unique<SimRuntime>(cfg_.sim);
    sim_ = sim.get();
    rt_ = std::move(sim);
  } else {
    rt_ = std::make_unique<ProcRuntime>(port_map());
  }
  shards_.resize(cfg_.num_shards);
  for (uint32_t i = 0; i < cfg_.num_shards; ++i) {
    shards_[i] = std::make_unique<ControlShard>(rt_.get(), i, cfg_.num_shards,
                                                "shard/" + std::to_string(i));
    ControlShard* p = shards_[i].get();
    rt_->register_handler(p->endpoint(), [p](Frame f) { p->handle(std::move(f)); });
  }
  stores_.resize(cfg_.num_nodes);
  for (uint32_t n = 0; n < cfg_.num_nodes; ++n) make_store(n);
  make_driver_store();
  gs_.resize(cfg_.num_globals);
  for (uint32_t i = 0; i < cfg_.num_globals; ++i) make_gs(i, false);
  ls_.resize(cfg_.num_nodes);
  for (uint32_t i = 0; i < cfg_.num_nodes; ++i) make_ls(i, false);
  workers_.resize(cfg_.num_nodes);
  for (uint32_t n = 0; n < cfg_.num_nodes; ++n) {
    workers_[n].resize(cfg_.workers_per_node);
    for (uint32_t w = 0; w < cfg_.workers_per_node; ++w) make_worker(n, w);
  }
  driver_ = std::make_unique<Driver>(rt_.get(), cfg_.num_shards, cfg_.num_globals,
                                     "node/0/ls", &registry_);
  ControlClient funcs(rt_.get(), "driver", cfg_.num_shards);
  for (const auto& name : registry_.names()) funcs.put_function(name);
}

void Cluster::shutdown() {
  if (!rt_) return;
  rt_->shutdown();
  driver_.reset();
  workers_.clear();
  ls_.clear();
  gs_.clear();
  stores_.clear();
  driver_store_.reset();
  shards_.clear();
  rt_.reset();
  sim_ = nullptr;
}

void Cluster::run_driver(const std::function<void(Driver&)>& fn) {
  if (!sim_) {
    fn(*driver_);
    return;
  }
  bool done = false;
  std::exception_ptr err;
  rt_->spawn_activity("driver", [&] {
    try {
      fn(*driver_);
    } catch (...) {
      err = std::current_exception();
    }
    done = true;
  });
  // The tick chains keep the event queue non-empty forever, so a stuck
  // driver program would spin; cap virtual time as a safety net.
  int64_t limit = sim_->now() + 100'000'000'000;
  sim_->run_until([&] { return done || sim_->now() > limit; });
  if (!done) throw std::runtime_error("driver program did not finish");
  if (err) std::rethrow_exception(err);
}

void Cluster::settle(int64_t duration_units) {
  if (sim_) {
    int64_t target = sim_->now() + duration_units;
    sim_->run_until([&] { return sim_->now() >= target; });
  } else {
    std::this_thread::sleep_for(std::chrono::nanoseconds(duration_units));
  }
}

void Cluster::kill_node(uint32_t i) {
  rt_->kill_prefix("node/" + std::to_string(i) + "/");
}

void Cluster::restart_ls(uint32_t i) {
  rt_->kill_prefix("node/" + std::to_string(i) + "/ls");
  make_ls(i, true);
}

void Cluster::restart_gs(uint32_t i) {
  rt_->kill_prefix("gs/" + std::to_string(i));
  make_gs(i, true);
}

void Cluster::restart_worker(uint32_t node, uint32_t w) {
  rt_->kill_prefix("node/" + std::to_string(node) + "/w/" + std::to_string(w));
  rt_->send(Frame{MsgType::WORKER_FAILED, "driver",
                  "node/" + std::to_string(node) + "/ls",
                  MsgWorkerFailed{w}.encode()});
  make_worker(node, w);
}

void Cluster::drop_object(const ObjectID& id) {
  std::string payload = MsgDropObj{id}.encode();
  for (uint32_t n = 0; n < cfg_.num_nodes; ++n)
    rt_->send(Frame{MsgType::DROP_OBJ, "driver",
                    "node/" + std::to_string(n) + "/store", payload});
  rt_->send(Frame{MsgType::DROP_OBJ, "driver", "driver/store", payload});
}

std::vector<std::string> Cluster::scan_bodies(Table t) {
  struct State {
    std::mutex m;
    std::condition_variable cv;
    uint32_t remaining;
    std::vector<std::string> bodies;
  };
  auto st = std::make_shared<State>();
  st->remaining = cfg_.num_shards;
  st->bodies.resize(cfg_.num_shards);
  EndpointId ep = "scan/" + std::to_string(scan_seq_++);
  rt_->register_handler(ep, [st](Frame f) {
    if (f.type != MsgType::REPLY) return;
    MsgReply rep = MsgReply::decode(f.payload);
    std::lock_guard<std::mutex> l(st->m);
    if (rep.req_id == 0 || rep.req_id > st->bodies.size()) return;
    st->bodies[rep.req_id - 1] = rep.body;
    if (st->remaining > 0) --st->remaining;
    st->cv.notify_all();
  });
  for (uint32_t i = 0; i < cfg_.num_shards; ++i) {
    MsgScan m;
    m.req_id = i + 1;
    m.table = t;
    rt_->send(Frame{MsgType::SCAN, ep, "shard/" + std::to_string(i), m.encode()});
  }
  if (sim_) {
    sim_->run_until([&] {
      std::lock_guard<std::mutex> l(st->m);
      return st->remaining == 0;
    });
  } else {
    std::unique_lock<std::mutex> l(st->m);
    st->cv.wait_for(l, std::chrono::seconds(5), [&] { return st->remaining == 0; });
  }
  rt_->kill_prefix(ep);
  return st->bodies;
}

std::vector<ScannedTask> Cluster::scan_tasks() {
  std::vector<ScannedTask> out;
  for (const auto& body : scan_bodies(Table::TASK)) {
    if (body.empty()) continue;
    auto part = decode_task_scan(body);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<ScannedObject> Cluster::scan_objects() {
  std::vector<ScannedObject> out;
  for (const auto& body : scan_bodies(Table::OBJECT)) {
    if (body.empty()) continue;
    auto part = decode_object_scan(body);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<EventRecord> Cluster::scan_events() {
  struct Keyed {
    EventRecord ev;
    uint32_t shard;
  };
  std::vector<Keyed> all;
  auto bodies = scan_bodies(Table::EVENT);
  for (uint32_t i = 0; i < bodies.size(); ++i) {
    if (bodies[i].empty()) continue;
    for (auto& ev : decode_event_scan(bodies[i])) all.push_back({std::move(ev), i});
  }
  std::stable_sort(all.begin(), all.end(), [](const Keyed& a, const Keyed& b) {
    if (a.ev.timestamp != b.ev.timestamp) return a.ev.timestamp < b.ev.timestamp;
    if (a.shard != b.shard) return a.shard < b.shard;
    return a.ev.seq < b.ev.seq;
  });
  std::vector<EventRecord> out;
  out.reserve(all.size());
  for (auto& k : all) out.push_back(std::move(k.ev));
  return out;
}

}  // namespace dflow
