#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "dflow/bytes.hpp"
#include "dflow/ids.hpp"

namespace dflow {

struct DepthExceeded : std::runtime_error {
  DepthExceeded() : std::runtime_error("value nesting depth exceeds 64") {}
};

inline constexpr int kMaxValueDepth = 64;

// Small self-describing value algebra. The canonical encoding round-trips
// bit-exactly (decode(encode(v)) == v and encode(decode(b)) == b), which is
// what makes lineage replay equality checks meaningful.
//
// Tags: 0x01 Int, 0x02 Float, 0x03 Bytes, 0x04 Str, 0x05 List, 0x06 Ref.
class Value {
 public:
  struct BytesVal {
    std::string data;
    auto operator<=>(const BytesVal&) const = default;
  };

  using Variant =
      std::variant<int64_t, double, BytesVal, std::string, std::vector<Value>, ObjectID>;

  Value() : v_(int64_t{0}) {}

  static Value Int(int64_t i) { return Value(Variant(std::in_place_index<0>, i)); }
  static Value Float(double d) { return Value(Variant(std::in_place_index<1>, d)); }
  static Value Bytes(std::string b) {
    return Value(Variant(std::in_place_index<2>, BytesVal{std::move(b)}));
  }
  static Value Str(std::string s) {
    return Value(Variant(std::in_place_index<3>, std::move(s)));
  }
  static Value List(std::vector<Value> vs) {
    return Value(Variant(std::in_place_index<4>, std::move(vs)));
  }
  static Value Ref(ObjectID id) { return Value(Variant(std::in_place_index<5>, id)); }

  bool is_int() const { return v_.index() == 0; }
  bool is_float() const { return v_.index() == 1; }
  bool is_bytes() const { return v_.index() == 2; }
  bool is_str() const { return v_.index() == 3; }
  bool is_list() const { return v_.index() == 4; }
  bool is_ref() const { return v_.index() == 5; }

  int64_t as_int() const { return std::get<0>(v_); }
  double as_float() const { return std::get<1>(v_); }
  const std::string& as_bytes() const { return std::get<2>(v_).data; }
  const std::string& as_str() const { return std::get<3>(v_); }
  const std::vector<Value>& as_list() const { return std::get<4>(v_); }
  const ObjectID& as_ref() const { return std::get<5>(v_); }

  // Structural equality. Floats compare by bit pattern after NaN
  // canonicalization, matching the encoding.
  bool operator==(const Value& o) const;
  bool operator!=(const Value& o) const { return !(*this == o); }

  std::string debug_string() const;

 private:
  explicit Value(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

std::string encode_value(const Value& v);
void encode_value(const Value& v, ByteWriter& w, int depth = 0);

// Inverse of encode_value; must consume the full input.
Value decode_value(std::string_view b);
Value decode_value(ByteReader& r, int depth = 0);

// Tasks that throw report their error as a value so downstream gets can
// surface it: List([Str("__error__"), Str(message)]).
Value make_error_value(const std::string& message);
bool is_error_value(const Value& v);
std::string error_message(const Value& v);

bool is_valid_utf8(std::string_view s);

}  // namespace dflow
