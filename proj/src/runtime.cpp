#include "dflow/runtime.hpp"

#include "dflow/bytes.hpp"

namespace dflow {

std::string frame_to_bytes(const Frame& f) {
  ByteWriter body;
  body.u8(static_cast<uint8_t>(f.type));
  body.lp_bytes(f.src);
  body.lp_bytes(f.dst);
  body.raw(f.payload);
  std::string b = body.take();
  ByteWriter out;
  out.u32(static_cast<uint32_t>(b.size()));
  out.raw(b);
  return out.take();
}

Frame frame_from_bytes(std::string_view body) {
  ByteReader r(body);
  Frame f;
  f.type = static_cast<MsgType>(r.u8());
  f.src = std::string(r.lp_bytes());
  f.dst = std::string(r.lp_bytes());
  f.payload = std::string(r.rest());
  return f;
}

}  // namespace dflow
