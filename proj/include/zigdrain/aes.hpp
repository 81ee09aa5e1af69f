#pragma once

#include <array>

#include "zigdrain/types.hpp"

namespace zigdrain {

/// AES-128 forward cipher with a pre-expanded key schedule.
///
/// Table-based and not constant time; this is a simulator, not a radio stack.
class Aes128 {
 public:
  explicit Aes128(const Key& key);

  Block encrypt(const Block& in) const;

 private:
  std::array<std::uint8_t, 176> round_keys_{};
};

Block aes_encrypt_block(const Key& key, const Block& block);

}  // namespace zigdrain
