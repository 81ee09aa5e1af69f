#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace zigdrain {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Key = std::array<std::uint8_t, 16>;
using Block = std::array<std::uint8_t, 16>;

/// 64-bit IEEE extended address. Serialized most-significant byte first.
using ExtAddress = std::uint64_t;
using ShortAddress = std::uint16_t;

/// Simulated node index. The gateway is an ordinary id.
using NodeId = int;
inline constexpr NodeId kNoNode = -1;

struct Position {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Position&, const Position&) = default;
};

double distance(Position a, Position b);

/// Base for argument/precondition failures raised by library code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex);

void put_u16(Bytes& out, std::uint16_t v);
void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
std::uint16_t get_u16(ByteView in, std::size_t off);
std::uint32_t get_u32(ByteView in, std::size_t off);
std::uint64_t get_u64(ByteView in, std::size_t off);

}  // namespace zigdrain
