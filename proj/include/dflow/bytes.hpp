#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dflow {

// Thrown by ByteReader and the value/message decoders on truncated or
// otherwise invalid input.
struct MalformedEncoding : std::runtime_error {
  explicit MalformedEncoding(const std::string& what)
      : std::runtime_error("malformed encoding: " + what) {}
};

// Big-endian append-only byte sink. All wire encodings go through this.
class ByteWriter {
 public:
  void u8(uint8_t v) { out_.push_back(static_cast<char>(v)); }

  void u32(uint32_t v) {
    for (int i = 3; i >= 0; --i) u8(static_cast<uint8_t>(v >> (8 * i)));
  }

  void u64(uint64_t v) {
    for (int i = 7; i >= 0; --i) u8(static_cast<uint8_t>(v >> (8 * i)));
  }

  void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }

  void raw(std::string_view bytes) { out_.append(bytes); }

  // 4-byte length prefix followed by the bytes.
  void lp_bytes(std::string_view bytes) {
    u32(static_cast<uint32_t>(bytes.size()));
    raw(bytes);
  }

  std::string take() { return std::move(out_); }
  const std::string& view() const { return out_; }

 private:
  std::string out_;
};

// Big-endian cursor over an immutable buffer.
class ByteReader {
 public:
  explicit ByteReader(std::string_view buf) : buf_(buf) {}

  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(buf_[pos_++]);
  }

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<uint8_t>(buf_[pos_++]);
    return v;
  }

  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<uint8_t>(buf_[pos_++]);
    return v;
  }

  int64_t i64() { return static_cast<int64_t>(u64()); }

  std::string_view raw(size_t n) {
    need(n);
    std::string_view v = buf_.substr(pos_, n);
    pos_ += n;
    return v;
  }

  std::string_view lp_bytes() {
    uint32_t n = u32();
    return raw(n);
  }

  std::string_view rest() {
    std::string_view v = buf_.substr(pos_);
    pos_ = buf_.size();
    return v;
  }

  bool at_end() const { return pos_ == buf_.size(); }
  size_t remaining() const { return buf_.size() - pos_; }

  void expect_end() const {
    if (!at_end()) throw MalformedEncoding("trailing bytes");
  }

 private:
  void need(size_t n) const {
    if (buf_.size() - pos_ < n) throw MalformedEncoding("truncated input");
  }

  std::string_view buf_;
  size_t pos_ = 0;
};

std::string to_hex(std::string_view bytes);
std::string from_hex(std::string_view hex);

}  // namespace dflow
