#include "dflow/proc_runtime.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <iostream>

#include "dflow/bytes.hpp"

namespace dflow {

namespace {

thread_local ProcMailbox* g_current_mailbox = nullptr;

bool read_exact(int fd, char* buf, size_t n) {
  size_t got = 0;
  while (got < n) {
    ssize_t r = ::read(fd, buf + got, n - got);
    if (r <= 0) return false;
    got += static_cast<size_t>(r);
  }
  return true;
}

bool write_all(int fd, const char* buf, size_t n) {
  size_t sent = 0;
  while (sent < n) {
    ssize_t r = ::write(fd, buf + sent, n - sent);
    if (r <= 0) return false;
    sent += static_cast<size_t>(r);
  }
  return true;
}

}  // namespace

// --- ProcMailbox ------------------------------------------------------------

void ProcMailbox::push(Frame f) {
  {
    std::lock_guard<std::mutex> l(m);
    if (killed) return;
    queue.push_back(std::move(f));
  }
  cv.notify_all();
}

void ProcMailbox::kill() {
  {
    std::lock_guard<std::mutex> l(m);
    killed = true;
  }
  cv.notify_all();
}

std::optional<Frame> ProcMailbox::receive(std::optional<int64_t> deadline) {
  std::unique_lock<std::mutex> l(m);
  for (;;) {
    if (killed) throw ActivityKilled{};
    if (!queue.empty()) {
      Frame f = std::move(queue.front());
      queue.pop_front();
      return f;
    }
    if (deadline) {
      int64_t now_ns = rt->now();
      if (*deadline <= now_ns) return std::nullopt;
      cv.wait_for(l, std::chrono::nanoseconds(*deadline - now_ns));
      if (queue.empty() && !killed && rt->now() >= *deadline) return std::nullopt;
    } else {
      cv.wait(l);
    }
  }
}

// --- ProcRuntime ------------------------------------------------------------

ProcRuntime::ProcRuntime(std::map<EndpointId, uint16_t> ports)
    : start_(std::chrono::steady_clock::now()), ports_(std::move(ports)) {
  timer_thread_ = std::thread([this] { timer_loop(); });
}

ProcRuntime::~ProcRuntime() { shutdown(); }

int64_t ProcRuntime::now() const {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now() - start_)
      .count();
}

void ProcRuntime::start_listener(const EndpointId& ep) {
  // Endpoints outside the static map (e.g. transient scan clients) get an
  // ephemeral port, recorded so connect_to() can still reach them.
  uint16_t port = 0;
  {
    std::lock_guard<std::mutex> l(ports_m_);
    auto it = ports_.find(ep);
    if (it != ports_.end()) port = it->second;
  }
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(fd, 128) != 0) {
    ::close(fd);
    throw PortUnavailable(port);
  }
  if (port == 0) {
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
    std::lock_guard<std::mutex> l(ports_m_);
    ports_[ep] = ntohs(bound.sin_port);
  }
  Endpoint* e = endpoints_[ep].get();
  e->listen_fd = fd;
  e->acceptor = std::thread([this, ep] { accept_loop(ep); });
}

void ProcRuntime::accept_loop(const EndpointId& ep) {
  Endpoint* e;
  {
    std::lock_guard<std::mutex> l(m_);
    e = endpoints_[ep].get();
  }
  for (;;) {
    int fd = ::accept(e->listen_fd, nullptr, nullptr);
    if (fd < 0) return;  // listener closed
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard<std::mutex> l(e->conn_m);
    if (e->dead) {
      ::close(fd);
      return;
    }
    e->conn_fds.push_back(fd);
    e->readers.emplace_back([this, ep, fd] { reader_loop(ep, fd); });
  }
}

void ProcRuntime::reader_loop(const EndpointId& ep, int fd) {
  for (;;) {
    char lenbuf[4];
    if (!read_exact(fd, lenbuf, 4)) break;
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = (len << 8) | static_cast<uint8_t>(lenbuf[i]);
    if (len > (64u << 20)) break;
    std::string body(len, '\0');
    if (!read_exact(fd, body.data(), len)) break;
    try {
      Frame f = frame_from_bytes(body);
      deliver_local(std::move(f));
    } catch (const MalformedEncoding&) {
      break;
    }
  }
  ::close(fd);
  (void)ep;
}

void ProcRuntime::deliver_local(Frame f) {
  ProcMailbox* box = nullptr;
  {
    std::lock_guard<std::mutex> l(m_);
    if (is_dead(f.dst)) return;
    auto it = endpoints_.find(f.dst);
    if (it == endpoints_.end() || it->second->dead) return;
    box = it->second->mailbox.get();
  }
  if (box) box->push(std::move(f));
}

void ProcRuntime::register_handler(const EndpointId& ep, std::function<void(Frame)> h) {
  Endpoint* e;
  {
    std::lock_guard<std::mutex> l(m_);
    dead_.erase(ep);
    auto& slot = endpoints_[ep];
    if (slot) retired_.push_back(std::move(slot));
    auto up = std::make_unique<Endpoint>();
    up->mailbox = std::make_unique<ProcMailbox>();
    up->mailbox->rt = this;
    e = up.get();
    slot = std::move(up);
  }
  start_listener(ep);
  ProcMailbox* box = e->mailbox.get();
  e->dispatcher = std::thread([box, h = std::move(h)] {
    try {
      for (;;) {
        auto f = box->receive(std::nullopt);
        if (f) h(std::move(*f));
      }
    } catch (const ActivityKilled&) {
    }
  });
}

Mailbox* ProcRuntime::register_mailbox(const EndpointId& ep) {
  Endpoint* e;
  {
    std::lock_guard<std::mutex> l(m_);
    dead_.erase(ep);
    auto& slot = endpoints_[ep];
    if (slot) retired_.push_back(std::move(slot));
    auto up = std::make_unique<Endpoint>();
    up->mailbox = std::make_unique<ProcMailbox>();
    up->mailbox->rt = this;
    e = up.get();
    slot = std::move(up);
  }
  start_listener(ep);
  return e->mailbox.get();
}

void ProcRuntime::spawn_activity(const EndpointId& owner, std::function<void()> body) {
  ProcMailbox* box = nullptr;
  {
    std::lock_guard<std::mutex> l(m_);
    auto it = endpoints_.find(owner);
    if (it != endpoints_.end()) box = it->second->mailbox.get();
  }
  activities_.emplace_back([box, body = std::move(body)] {
    g_current_mailbox = box;
    try {
      body();
    } catch (const ActivityKilled&) {
    }
  });
}

int ProcRuntime::connect_to(const EndpointId& dst) {
  uint16_t port;
  {
    std::lock_guard<std::mutex> l(ports_m_);
    auto it = ports_.find(dst);
    if (it == ports_.end()) return -1;
    port = it->second;
  }
  for (int attempt = 0; attempt < 3; ++attempt) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return fd;
    }
    ::close(fd);
    std::this_thread::sleep_for(std::chrono::milliseconds(5 << attempt));
  }
  return -1;
}

void ProcRuntime::send(Frame f) {
  {
    std::lock_guard<std::mutex> l(m_);
    if (is_dead(f.dst) || is_dead(f.src)) return;
  }
  std::string bytes = frame_to_bytes(f);
  auto key = std::make_pair(f.src, f.dst);
  std::mutex* write_m;
  int fd;
  {
    std::lock_guard<std::mutex> l(conn_cache_m_);
    auto& c = conn_cache_[key];
    if (c.fd < 0 || c.fd == -1) c.fd = connect_to(f.dst);
    fd = c.fd;
    write_m = c.write_m.get();
  }
  if (fd < 0) return;  // EndpointDown: dropped, detected via heartbeats
  bool ok;
  {
    std::lock_guard<std::mutex> l(*write_m);
    ok = write_all(fd, bytes.data(), bytes.size());
  }
  if (!ok) {
    std::lock_guard<std::mutex> l(conn_cache_m_);
    auto it = conn_cache_.find(key);
    if (it != conn_cache_.end() && it->second.fd == fd) {
      ::close(fd);
      it->second.fd = -1;
    }
  }
}

void ProcRuntime::schedule(const EndpointId& dst, Frame f, int64_t delay) {
  f.dst = dst;
  {
    std::lock_guard<std::mutex> l(timer_m_);
    timers_.push(Timer{now() + delay, timer_seq_++, std::move(f)});
  }
  timer_cv_.notify_all();
}

void ProcRuntime::timer_loop() {
  std::unique_lock<std::mutex> l(timer_m_);
  for (;;) {
    if (stopping_) return;
    if (timers_.empty()) {
      timer_cv_.wait(l);
      continue;
    }
    int64_t at = timers_.top().at;
    int64_t now_ns = now();
    if (at > now_ns) {
      timer_cv_.wait_for(l, std::chrono::nanoseconds(at - now_ns));
      continue;
    }
    Frame f = timers_.top().frame;
    timers_.pop();
    l.unlock();
    deliver_local(std::move(f));
    l.lock();
  }
}

void ProcRuntime::sleep_until(int64_t deadline) {
  // Chunked so a killed activity notices within ~10ms.
  while (now() < deadline) {
    if (g_current_mailbox) {
      std::lock_guard<std::mutex> l(g_current_mailbox->m);
      if (g_current_mailbox->killed) throw ActivityKilled{};
    }
    int64_t remaining = deadline - now();
    std::this_thread::sleep_for(
        std::chrono::nanoseconds(std::min<int64_t>(remaining, 10'000'000)));
  }
}

void ProcRuntime::kill_prefix(const std::string& prefix) {
  std::vector<Endpoint*> victims;
  {
    std::lock_guard<std::mutex> l(m_);
    for (auto& [ep, e] : endpoints_) {
      if (ep.rfind(prefix, 0) != 0 || e->dead) continue;
      dead_.insert(ep);
      victims.push_back(e.get());
    }
  }
  for (Endpoint* e : victims) {
    {
      std::lock_guard<std::mutex> l(e->conn_m);
      e->dead = true;
      if (e->listen_fd >= 0) {
        ::shutdown(e->listen_fd, SHUT_RDWR);
        ::close(e->listen_fd);
        e->listen_fd = -1;
      }
      for (int fd : e->conn_fds) ::shutdown(fd, SHUT_RDWR);
    }
    e->mailbox->kill();
    if (e->acceptor.joinable()) e->acceptor.join();
    if (e->dispatcher.joinable()) e->dispatcher.join();
  }
}

bool ProcRuntime::is_dead(const EndpointId& ep) const { return dead_.count(ep) > 0; }

void ProcRuntime::shutdown() {
  {
    std::lock_guard<std::mutex> l(timer_m_);
    if (stopping_) return;
    stopping_ = true;
  }
  timer_cv_.notify_all();
  if (timer_thread_.joinable()) timer_thread_.join();
  kill_prefix("");  // everything
  for (auto& t : activities_)
    if (t.joinable()) t.join();
  for (auto& [ep, e] : endpoints_) {
    std::lock_guard<std::mutex> l(e->conn_m);
    for (auto& r : e->readers)
      if (r.joinable()) r.join();
  }
  for (auto& e : retired_) {
    std::lock_guard<std::mutex> l(e->conn_m);
    for (auto& r : e->readers)
      if (r.joinable()) r.join();
  }
  std::lock_guard<std::mutex> l(conn_cache_m_);
  for (auto& [k, c] : conn_cache_)
    if (c.fd >= 0) ::close(c.fd);
  conn_cache_.clear();
}

}  // namespace dflow
