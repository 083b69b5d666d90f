#include "dflow/ids.hpp"

#include <openssl/evp.h>

#include <stdexcept>

#include "dflow/bytes.hpp"

namespace dflow {

std::string sha256(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed");
  return std::string(reinterpret_cast<char*>(digest), len);
}

template <typename Tag>
Id<Tag> Id<Tag>::from_bytes(std::string_view b) {
  if (b.size() != kIdSize) throw MalformedEncoding("id must be 16 bytes");
  Id id;
  for (size_t i = 0; i < kIdSize; ++i) id.bytes_[i] = static_cast<uint8_t>(b[i]);
  return id;
}

template <typename Tag>
Id<Tag> Id<Tag>::from_hex(std::string_view hex) {
  return from_bytes(dflow::from_hex(hex));
}

template <typename Tag>
std::string Id<Tag>::hex() const {
  return to_hex(bytes());
}

template class Id<TaskTag>;
template class Id<ObjectTag>;

namespace {

std::string truncated_hash(std::string_view preimage) {
  return sha256(preimage).substr(0, kIdSize);
}

void append_u32_be(std::string& s, uint32_t v) {
  for (int i = 3; i >= 0; --i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

TaskID derive_task_id(const TaskID& parent, uint32_t index) {
  std::string pre(parent.bytes());
  append_u32_be(pre, index);
  return TaskID::from_bytes(truncated_hash(pre));
}

ObjectID derive_object_id(const TaskID& task, uint32_t return_index) {
  std::string pre(task.bytes());
  pre.push_back(static_cast<char>(0xFF));
  append_u32_be(pre, return_index);
  return ObjectID::from_bytes(truncated_hash(pre));
}

uint32_t shard_of(std::string_view key16, uint32_t num_shards) {
  if (key16.size() != kIdSize) throw MalformedEncoding("shard key must be 16 bytes");
  uint32_t prefix = 0;
  for (int i = 0; i < 4; ++i) prefix = (prefix << 8) | static_cast<uint8_t>(key16[i]);
  return prefix % num_shards;
}

std::string to_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0xF]);
  }
  return out;
}

std::string from_hex(std::string_view hex) {
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw MalformedEncoding("bad hex digit");
  };
  if (hex.size() % 2 != 0) throw MalformedEncoding("odd hex length");
  std::string out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2)
    out.push_back(static_cast<char>((nib(hex[i]) << 4) | nib(hex[i + 1])));
  return out;
}

}  // namespace dflow
