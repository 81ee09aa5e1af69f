#include "zigdrain/types.hpp"

#include <cmath>

namespace zigdrain {

double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

namespace {
int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
  Bytes out;
  int pending = -1;
  for (char c : hex) {
    if (c == ' ' || c == ':' || c == '\t') continue;
    int v = nibble(c);
    if (v < 0) throw Error("invalid hex digit '" + std::string(1, c) + "'");
    if (pending < 0) {
      pending = v;
    } else {
      out.push_back(static_cast<std::uint8_t>((pending << 4) | v));
      pending = -1;
    }
  }
  if (pending >= 0) throw Error("odd number of hex digits");
  return out;
}

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint16_t get_u16(ByteView in, std::size_t off) {
  if (off + 2 > in.size()) throw Error("truncated u16");
  return static_cast<std::uint16_t>((in[off] << 8) | in[off + 1]);
}

std::uint32_t get_u32(ByteView in, std::size_t off) {
  if (off + 4 > in.size()) throw Error("truncated u32");
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | in[off + i];
  return v;
}

std::uint64_t get_u64(ByteView in, std::size_t off) {
  if (off + 8 > in.size()) throw Error("truncated u64");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | in[off + i];
  return v;
}

}  // namespace zigdrain
