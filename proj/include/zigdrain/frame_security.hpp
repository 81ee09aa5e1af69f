#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "zigdrain/types.hpp"

namespace zigdrain {

/// The eight IEEE 802.15.4 security levels (3-bit code).
enum class SecurityLevel : std::uint8_t {
  none = 0,
  mic32 = 1,
  mic64 = 2,
  mic128 = 3,
  enc = 4,
  enc_mic32 = 5,
  enc_mic64 = 6,
  enc_mic128 = 7,
};

enum class SuiteFamily { none, cbc_mac, ctr, ccm };

class UnsupportedLevel : public Error {
 public:
  explicit UnsupportedLevel(int id);
};

class CounterExhausted : public Error {
 public:
  CounterExhausted() : Error("frame counter exhausted") {}
};

class FrameTooLong : public Error {
 public:
  explicit FrameTooLong(std::size_t length);
};

class FrameDecodeError : public Error {
 public:
  using Error::Error;
};

SecurityLevel security_level_from(int id);
std::size_t mic_length(SecurityLevel level);
bool has_confidentiality(SecurityLevel level);
bool has_integrity(SecurityLevel level);
SuiteFamily suite_family(SecurityLevel level);
std::string_view suite_name(SecurityLevel level);

inline constexpr std::size_t kMaxMacFrameLength = 127;
inline constexpr std::size_t kPhyHeaderLength = 6;  // preamble, SFD, PHR
inline constexpr std::size_t kFcsLength = 2;
inline constexpr std::size_t kMacHeaderLength = 15;  // fc, seq, dst pan, dst short, src ext
inline constexpr std::size_t kAckFrameLength = 5;    // fc, seq, fcs

enum class FrameType : std::uint8_t { beacon = 0, data = 1, ack = 2, command = 3 };

struct MacHeader {
  FrameType type = FrameType::data;
  bool security_enabled = false;
  bool frame_pending = false;
  bool ack_request = false;
  std::uint8_t sequence = 0;
  std::uint16_t pan_id = 0x1a2b;
  ShortAddress destination = 0xffff;
  ExtAddress source = 0;

  Bytes encode() const;
  static MacHeader decode(ByteView in);

  friend bool operator==(const MacHeader&, const MacHeader&) = default;
};

struct AuxSecurityHeader {
  std::uint8_t security_control = 0;  // bits 0-2 level, bits 3-4 key id mode
  std::uint32_t frame_counter = 0;
  Bytes key_id;  // 0, 1, 5 or 9 bytes, per key id mode

  static AuxSecurityHeader make(SecurityLevel level, std::uint32_t counter, Bytes key_id = {});

  SecurityLevel level() const { return static_cast<SecurityLevel>(security_control & 0x07); }
  std::size_t encoded_length() const { return 5 + key_id.size(); }
  Bytes encode() const;
  /// Decodes from the front of `in`; the key id length comes from the control byte.
  static AuxSecurityHeader decode(ByteView in);

  friend bool operator==(const AuxSecurityHeader&, const AuxSecurityHeader&) = default;
};

struct Nonce {
  ExtAddress source = 0;
  std::uint32_t frame_counter = 0;
  std::uint8_t security_control = 0;

  std::array<std::uint8_t, 13> bytes() const;
};

struct CounterBlock {
  std::uint16_t flags = 0;
  Nonce nonce;
  std::uint8_t index = 0;

  Block bytes() const;
};

/// flags ‖ src ‖ ctr ‖ security control ‖ index, MSB-first.
Block build_counter_block(std::uint16_t flags, ExtAddress src, std::uint32_t counter,
                          std::uint8_t security_control, std::uint8_t index);

/// Static knobs shared by sender and receiver.
struct SecurityParams {
  std::uint16_t counter_flags = 0x0000;
  Bytes key_id;
};

/// XORs data with the CTR keystream. Payload blocks are numbered from 1; 0 is the MIC block.
Bytes ctr_transform(const Key& key, ExtAddress src, std::uint32_t counter,
                    std::uint8_t security_control, ByteView data, std::uint16_t flags = 0,
                    std::uint8_t first_index = 1);

/// CBC-MAC over the 2-byte length-prefixed, zero-padded input. Returns the leading mic_bits/8 bytes.
Bytes cbc_mac(const Key& key, ByteView auth_input, int mic_bits);

/// CBC-MAC chained across several independently length-prefixed and padded segments.
Bytes cbc_mac_segments(const Key& key, std::span<const ByteView> segments, int mic_bits);

/// Number of AES blocks the CBC-MAC of a length-prefixed segment needs.
std::size_t padded_segment_blocks(std::size_t length);

struct SecuredFrame {
  MacHeader header;
  AuxSecurityHeader aux;  // encoded only when header.security_enabled
  Bytes payload;          // plaintext for levels 0-3, ciphertext for 4-7
  Bytes mic;              // encrypted for levels 5-7

  SecurityLevel level() const {
    return header.security_enabled ? aux.level() : SecurityLevel::none;
  }
  std::uint32_t frame_counter() const { return aux.frame_counter; }
  /// MPDU length including FCS.
  std::size_t mac_length() const;
  /// Bytes on air including the PHY synchronization header.
  std::size_t air_length() const { return mac_length() + kPhyHeaderLength; }
  /// MAC header ‖ aux header, the bytes the MIC authenticates ahead of the payload.
  Bytes authenticated_header() const;

  friend bool operator==(const SecuredFrame&, const SecuredFrame&) = default;
};

Bytes encode_frame(const SecuredFrame& frame);
SecuredFrame decode_frame(ByteView wire);
/// One line, pipe-separated fields.
std::string dump_frame(const SecuredFrame& frame);

/// Applies `level` to a plaintext payload. The caller owns and advances the sender counter.
SecuredFrame secure_frame(const Key& key, const MacHeader& header, ByteView payload,
                          SecurityLevel level, std::uint32_t frame_counter,
                          const SecurityParams& params = {});

struct AclEntry {
  ExtAddress source = 0;
  Key key{};
  std::uint32_t highest_counter = 0;
  bool blacklisted = false;
};

enum class SecurityStatus { ok, replay_rejected, integrity_failure, unknown_source };
std::string_view to_string(SecurityStatus status);

enum class AclUpdatePolicy {
  after_mic,         // high-water mark moves only for frames that verify
  on_counter_check,  // moves as soon as the replay check passes
};

struct UnsecureOptions {
  std::uint16_t counter_flags = 0x0000;
  AclUpdatePolicy update_policy = AclUpdatePolicy::after_mic;
};

struct UnsecureResult {
  SecurityStatus status = SecurityStatus::ok;
  Bytes payload;
  /// True when decryption / MIC computation ran, i.e. the receiver paid the crypto cost.
  bool crypto_performed = false;
};

UnsecureResult unsecure_frame(AclEntry& acl, const SecuredFrame& frame,
                              const UnsecureOptions& options = {});

class AclTable {
 public:
  AclEntry& add(ExtAddress source, const Key& key);
  AclEntry* find(ExtAddress source);
  const AclEntry* find(ExtAddress source) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<ExtAddress, AclEntry> entries_;
};

UnsecureResult unsecure_frame(AclTable& table, const SecuredFrame& frame,
                              const UnsecureOptions& options = {});

/// Clears every replay high-water mark; blacklist flags survive only when `persistent_blacklist`.
void acl_reset_on_reboot(AclTable& table, bool persistent_blacklist = false);

}  // namespace zigdrain
