#include "dflow/value.hpp"

#include <bit>
#include <cmath>
#include <sstream>

namespace dflow {

namespace {

constexpr uint64_t kCanonicalNanBits = 0x7FF8000000000000ULL;

uint64_t canonical_float_bits(double d) {
  if (std::isnan(d)) return kCanonicalNanBits;
  return std::bit_cast<uint64_t>(d);
}

}  // namespace

bool Value::operator==(const Value& o) const {
  if (v_.index() != o.v_.index()) return false;
  if (is_float()) return canonical_float_bits(as_float()) == canonical_float_bits(o.as_float());
  if (is_list()) {
    const auto& a = as_list();
    const auto& b = o.as_list();
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
      if (a[i] != b[i]) return false;
    return true;
  }
  return v_ == o.v_;
}

void encode_value(const Value& v, ByteWriter& w, int depth) {
  if (depth >= kMaxValueDepth) throw DepthExceeded();
  if (v.is_int()) {
    w.u8(0x01);
    w.i64(v.as_int());
  } else if (v.is_float()) {
    w.u8(0x02);
    w.u64(canonical_float_bits(v.as_float()));
  } else if (v.is_bytes()) {
    w.u8(0x03);
    w.lp_bytes(v.as_bytes());
  } else if (v.is_str()) {
    w.u8(0x04);
    w.lp_bytes(v.as_str());
  } else if (v.is_list()) {
    w.u8(0x05);
    const auto& elems = v.as_list();
    w.u32(static_cast<uint32_t>(elems.size()));
    for (const auto& e : elems) encode_value(e, w, depth + 1);
  } else {
    w.u8(0x06);
    w.raw(v.as_ref().bytes());
  }
}

std::string encode_value(const Value& v) {
  ByteWriter w;
  encode_value(v, w);
  return w.take();
}

Value decode_value(ByteReader& r, int depth) {
  if (depth >= kMaxValueDepth) throw DepthExceeded();
  uint8_t tag = r.u8();
  switch (tag) {
    case 0x01:
      return Value::Int(r.i64());
    case 0x02: {
      uint64_t bits = r.u64();
      double d = std::bit_cast<double>(bits);
      // Only the canonical NaN pattern is a valid encoding; anything else
      // would break encode(decode(b)) == b.
      if (std::isnan(d) && bits != kCanonicalNanBits)
        throw MalformedEncoding("non-canonical NaN");
      return Value::Float(d);
    }
    case 0x03:
      return Value::Bytes(std::string(r.lp_bytes()));
    case 0x04: {
      std::string_view s = r.lp_bytes();
      if (!is_valid_utf8(s)) throw MalformedEncoding("invalid UTF-8 in Str");
      return Value::Str(std::string(s));
    }
    case 0x05: {
      uint32_t count = r.u32();
      std::vector<Value> elems;
      elems.reserve(std::min<uint32_t>(count, 4096));
      for (uint32_t i = 0; i < count; ++i) elems.push_back(decode_value(r, depth + 1));
      return Value::List(std::move(elems));
    }
    case 0x06:
      return Value::Ref(ObjectID::from_bytes(r.raw(kIdSize)));
    default:
      throw MalformedEncoding("unknown value tag");
  }
}

Value decode_value(std::string_view b) {
  ByteReader r(b);
  Value v = decode_value(r);
  r.expect_end();
  return v;
}

Value make_error_value(const std::string& message) {
  return Value::List({Value::Str("__error__"), Value::Str(message)});
}

bool is_error_value(const Value& v) {
  return v.is_list() && v.as_list().size() == 2 && v.as_list()[0].is_str() &&
         v.as_list()[0].as_str() == "__error__" && v.as_list()[1].is_str();
}

std::string error_message(const Value& v) {
  return v.as_list()[1].as_str();
}

bool is_valid_utf8(std::string_view s) {
  size_t i = 0;
  while (i < s.size()) {
    uint8_t c = static_cast<uint8_t>(s[i]);
    size_t extra;
    uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (size_t j = 1; j <= extra; ++j) {
      uint8_t cc = static_cast<uint8_t>(s[i + j]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Reject overlong forms, surrogates, and out-of-range code points.
    static const uint32_t min_cp[4] = {0, 0x80, 0x800, 0x10000};
    if (cp < min_cp[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

std::string Value::debug_string() const {
  std::ostringstream os;
  if (is_int())
    os << "Int(" << as_int() << ")";
  else if (is_float())
    os << "Float(" << as_float() << ")";
  else if (is_bytes())
    os << "Bytes(" << to_hex(as_bytes()) << ")";
  else if (is_str())
    os << "Str(\"" << as_str() << "\")";
  else if (is_ref())
    os << "Ref(" << as_ref().hex() << ")";
  else {
    os << "List[";
    bool first = true;
    for (const auto& e : as_list()) {
      if (!first) os << ", ";
      first = false;
      os << e.debug_string();
    }
    os << "]";
  }
  return os.str();
}

}  // namespace dflow
