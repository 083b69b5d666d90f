#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace dflow {

inline constexpr size_t kIdSize = 16;

// 16-byte opaque identifier. TaskID and ObjectID are distinct strong types
// over the same representation; both are derived by truncated SHA-256 so the
// same inputs always regenerate the same bytes (lineage replay depends on
// this).
template <typename Tag>
class Id {
 public:
  Id() { bytes_.fill(0); }

  static Id from_bytes(std::string_view b);
  static Id from_hex(std::string_view hex);

  std::string_view bytes() const {
    return std::string_view(reinterpret_cast<const char*>(bytes_.data()), kIdSize);
  }
  std::string hex() const;

  // Low 8 bytes interpreted big-endian; used for rng seeds.
  uint64_t low64() const {
    uint64_t v = 0;
    for (size_t i = 8; i < 16; ++i) v = (v << 8) | bytes_[i];
    return v;
  }

  bool is_zero() const {
    for (auto b : bytes_)
      if (b != 0) return false;
    return true;
  }

  auto operator<=>(const Id&) const = default;

 private:
  std::array<uint8_t, kIdSize> bytes_;
};

struct TaskTag {};
struct ObjectTag {};
using TaskID = Id<TaskTag>;
using ObjectID = Id<ObjectTag>;

// First 16 bytes of SHA-256(parent bytes || index as 4-byte big-endian).
TaskID derive_task_id(const TaskID& parent, uint32_t index);

// First 16 bytes of SHA-256(task bytes || 0xFF || index as 4-byte big-endian).
// The 0xFF byte domain-separates object ids from child task ids.
ObjectID derive_object_id(const TaskID& task, uint32_t return_index);

// (first 4 bytes of key as big-endian unsigned) mod num_shards.
uint32_t shard_of(std::string_view key16, uint32_t num_shards);

inline uint32_t shard_of(const TaskID& id, uint32_t n) { return shard_of(id.bytes(), n); }
inline uint32_t shard_of(const ObjectID& id, uint32_t n) { return shard_of(id.bytes(), n); }

std::string sha256(std::string_view data);

}  // namespace dflow
