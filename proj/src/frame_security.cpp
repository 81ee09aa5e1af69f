#include "zigdrain/frame_security.hpp"

#include <boost/crc.hpp>

#include <algorithm>
#include <sstream>

#include "zigdrain/aes.hpp"

namespace zigdrain {

UnsupportedLevel::UnsupportedLevel(int id)
    : Error("unsupported security level " + std::to_string(id)) {}

FrameTooLong::FrameTooLong(std::size_t length)
    : Error("MAC frame of " + std::to_string(length) + " bytes exceeds " +
            std::to_string(kMaxMacFrameLength)) {}

SecurityLevel security_level_from(int id) {
  if (id < 0 || id > 7) throw UnsupportedLevel(id);
  return static_cast<SecurityLevel>(id);
}

std::size_t mic_length(SecurityLevel level) {
  switch (level) {
    case SecurityLevel::mic32:
    case SecurityLevel::enc_mic32:
      return 4;
    case SecurityLevel::mic64:
    case SecurityLevel::enc_mic64:
      return 8;
    case SecurityLevel::mic128:
    case SecurityLevel::enc_mic128:
      return 16;
    default:
      return 0;
  }
}

bool has_confidentiality(SecurityLevel level) { return static_cast<int>(level) >= 4; }

bool has_integrity(SecurityLevel level) { return mic_length(level) > 0; }

SuiteFamily suite_family(SecurityLevel level) {
  const int id = static_cast<int>(level);
  if (id == 0) return SuiteFamily::none;
  if (id < 4) return SuiteFamily::cbc_mac;
  if (id == 4) return SuiteFamily::ctr;
  return SuiteFamily::ccm;
}

std::string_view suite_name(SecurityLevel level) {
  static constexpr std::string_view kNames[] = {
      "None",   "AES-CBC-MAC-32", "AES-CBC-MAC-64", "AES-CBC-MAC-128",
      "AES-CTR", "AES-CCM-32",     "AES-CCM-64",     "AES-CCM-128"};
  return kNames[static_cast<int>(level) & 0x07];
}

// --- headers ---------------------------------------------------------------

namespace {

constexpr std::uint16_t kDstModeShort = 2;
constexpr std::uint16_t kSrcModeExtended = 3;
constexpr std::uint16_t kFrameVersion2006 = 1;

std::size_t key_id_length_for_mode(int mode) {
  static constexpr std::size_t kLengths[] = {0, 1, 5, 9};
  return kLengths[mode & 0x03];
}

int key_id_mode_for_length(std::size_t length) {
  switch (length) {
    case 0: return 0;
    case 1: return 1;
    case 5: return 2;
    case 9: return 3;
    default: throw Error("key id length must be 0, 1, 5 or 9 bytes");
  }
}

std::uint16_t fcs(ByteView bytes) {
  // ITU-T CRC-16 as used by 802.15.4 (reflected, zero init).
  boost::crc_optimal<16, 0x1021, 0x0000, 0x0000, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

}  // namespace

Bytes MacHeader::encode() const {
  std::uint16_t fc = static_cast<std::uint16_t>(type) & 0x07;
  if (security_enabled) fc |= 1u << 3;
  if (frame_pending) fc |= 1u << 4;
  if (ack_request) fc |= 1u << 5;
  fc |= 1u << 6;  // PAN id compression
  fc |= kDstModeShort << 10;
  fc |= kFrameVersion2006 << 12;
  fc |= kSrcModeExtended << 14;
  Bytes out;
  out.reserve(kMacHeaderLength);
  put_u16(out, fc);
  out.push_back(sequence);
  put_u16(out, pan_id);
  put_u16(out, destination);
  put_u64(out, source);
  return out;
}

MacHeader MacHeader::decode(ByteView in) {
  if (in.size() < kMacHeaderLength) throw FrameDecodeError("truncated MAC header");
  const std::uint16_t fc = get_u16(in, 0);
  if (((fc >> 10) & 0x03) != kDstModeShort || ((fc >> 14) & 0x03) != kSrcModeExtended)
    throw FrameDecodeError("unsupported addressing mode");
  MacHeader h;
  h.type = static_cast<FrameType>(fc & 0x07);
  h.security_enabled = (fc >> 3) & 1;
  h.frame_pending = (fc >> 4) & 1;
  h.ack_request = (fc >> 5) & 1;
  h.sequence = in[2];
  h.pan_id = get_u16(in, 3);
  h.destination = get_u16(in, 5);
  h.source = get_u64(in, 7);
  return h;
}

AuxSecurityHeader AuxSecurityHeader::make(SecurityLevel level, std::uint32_t counter, Bytes key_id) {
  AuxSecurityHeader aux;
  aux.security_control = static_cast<std::uint8_t>(static_cast<int>(level) |
                                                   (key_id_mode_for_length(key_id.size()) << 3));
  aux.frame_counter = counter;
  aux.key_id = std::move(key_id);
  return aux;
}

Bytes AuxSecurityHeader::encode() const {
  if (key_id.size() != key_id_length_for_mode(security_control >> 3))
    throw Error("key id length does not match key id mode");
  Bytes out;
  out.reserve(encoded_length());
  out.push_back(security_control);
  put_u32(out, frame_counter);
  out.insert(out.end(), key_id.begin(), key_id.end());
  return out;
}

AuxSecurityHeader AuxSecurityHeader::decode(ByteView in) {
  if (in.size() < 5) throw FrameDecodeError("truncated auxiliary security header");
  AuxSecurityHeader aux;
  aux.security_control = in[0];
  aux.frame_counter = get_u32(in, 1);
  const std::size_t kid = key_id_length_for_mode(aux.security_control >> 3);
  if (in.size() < 5 + kid) throw FrameDecodeError("truncated key identifier");
  aux.key_id.assign(in.begin() + 5, in.begin() + 5 + static_cast<std::ptrdiff_t>(kid));
  return aux;
}

std::array<std::uint8_t, 13> Nonce::bytes() const {
  std::array<std::uint8_t, 13> out{};
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(source >> (56 - 8 * i));
  for (int i = 0; i < 4; ++i) out[8 + i] = static_cast<std::uint8_t>(frame_counter >> (24 - 8 * i));
  out[12] = security_control;
  return out;
}

Block CounterBlock::bytes() const {
  Block out{};
  out[0] = static_cast<std::uint8_t>(flags >> 8);
  out[1] = static_cast<std::uint8_t>(flags);
  const auto n = nonce.bytes();
  std::copy(n.begin(), n.end(), out.begin() + 2);
  out[15] = index;
  return out;
}

Block build_counter_block(std::uint16_t flags, ExtAddress src, std::uint32_t counter,
                          std::uint8_t security_control, std::uint8_t index) {
  return CounterBlock{flags, Nonce{src, counter, security_control}, index}.bytes();
}

// --- modes -----------------------------------------------------------------

Bytes ctr_transform(const Key& key, ExtAddress src, std::uint32_t counter,
                    std::uint8_t security_control, ByteView data, std::uint16_t flags,
                    std::uint8_t first_index) {
  const Aes128 aes(key);
  Bytes out(data.begin(), data.end());
  for (std::size_t off = 0, i = 0; off < out.size(); off += 16, ++i) {
    const auto index = static_cast<std::uint8_t>(first_index + i);
    const Block ks = aes.encrypt(build_counter_block(flags, src, counter, security_control, index));
    const std::size_t n = std::min<std::size_t>(16, out.size() - off);
    for (std::size_t j = 0; j < n; ++j) out[off + j] ^= ks[j];
  }
  return out;
}

std::size_t padded_segment_blocks(std::size_t length) { return (length + 2 + 15) / 16; }

Bytes cbc_mac_segments(const Key& key, std::span<const ByteView> segments, int mic_bits) {
  if (mic_bits != 32 && mic_bits != 64 && mic_bits != 128)
    throw Error("MIC length must be 32, 64 or 128 bits");
  const Aes128 aes(key);
  Block chain{};
  bool first = true;
  for (const ByteView seg : segments) {
    if (seg.size() > 0xffff) throw Error("CBC-MAC segment too long");
    Bytes padded;
    padded.reserve(padded_segment_blocks(seg.size()) * 16);
    put_u16(padded, static_cast<std::uint16_t>(seg.size()));
    padded.insert(padded.end(), seg.begin(), seg.end());
    padded.resize(padded_segment_blocks(seg.size()) * 16, 0x00);
    for (std::size_t off = 0; off < padded.size(); off += 16) {
      Block in{};
      for (int j = 0; j < 16; ++j) in[j] = static_cast<std::uint8_t>(padded[off + j] ^ (first ? 0 : chain[j]));
      chain = aes.encrypt(in);
      first = false;
    }
  }
  return Bytes(chain.begin(), chain.begin() + mic_bits / 8);
}

Bytes cbc_mac(const Key& key, ByteView auth_input, int mic_bits) {
  const ByteView segs[] = {auth_input};
  return cbc_mac_segments(key, segs, mic_bits);
}

// --- frames ----------------------------------------------------------------

std::size_t SecuredFrame::mac_length() const {
  std::size_t len = kMacHeaderLength + payload.size() + mic.size() + kFcsLength;
  if (header.security_enabled) len += aux.encoded_length();
  return len;
}

Bytes SecuredFrame::authenticated_header() const {
  Bytes out = header.encode();
  if (header.security_enabled) {
    const Bytes a = aux.encode();
    out.insert(out.end(), a.begin(), a.end());
  }
  return out;
}

Bytes encode_frame(const SecuredFrame& frame) {
  if (frame.mic.size() != mic_length(frame.level()))
    throw Error("MIC length does not match security level");
  if (frame.mac_length() > kMaxMacFrameLength) throw FrameTooLong(frame.mac_length());
  Bytes out = frame.authenticated_header();
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  out.insert(out.end(), frame.mic.begin(), frame.mic.end());
  // FCS is transmitted low byte first, as on a real radio.
  const std::uint16_t crc = fcs(out);
  out.push_back(static_cast<std::uint8_t>(crc));
  out.push_back(static_cast<std::uint8_t>(crc >> 8));
  return out;
}

SecuredFrame decode_frame(ByteView wire) {
  if (wire.size() > kMaxMacFrameLength) throw FrameTooLong(wire.size());
  if (wire.size() < kMacHeaderLength + kFcsLength) throw FrameDecodeError("frame too short");
  const std::size_t body = wire.size() - kFcsLength;
  const std::uint16_t crc = fcs(wire.first(body));
  if (wire[body] != static_cast<std::uint8_t>(crc) || wire[body + 1] != static_cast<std::uint8_t>(crc >> 8))
    throw FrameDecodeError("FCS mismatch");
  SecuredFrame f;
  f.header = MacHeader::decode(wire);
  std::size_t off = kMacHeaderLength;
  if (f.header.security_enabled) {
    f.aux = AuxSecurityHeader::decode(wire.subspan(off, body - off));
    off += f.aux.encoded_length();
  }
  const std::size_t mic = mic_length(f.level());
  if (off + mic > body) throw FrameDecodeError("frame shorter than its MIC");
  f.payload.assign(wire.begin() + static_cast<std::ptrdiff_t>(off),
                   wire.begin() + static_cast<std::ptrdiff_t>(body - mic));
  f.mic.assign(wire.begin() + static_cast<std::ptrdiff_t>(body - mic),
               wire.begin() + static_cast<std::ptrdiff_t>(body));
  return f;
}

std::string dump_frame(const SecuredFrame& frame) {
  std::ostringstream os;
  os << "type=" << static_cast<int>(frame.header.type) << "|seq=" << static_cast<int>(frame.header.sequence)
     << "|dst=" << std::hex << frame.header.destination << "|src=" << frame.header.source << std::dec
     << "|level=" << static_cast<int>(frame.level()) << "|ctr=" << frame.aux.frame_counter
     << "|payload=" << to_hex(frame.payload) << "|mic=" << to_hex(frame.mic);
  return os.str();
}

namespace {

Bytes frame_mic(const Key& key, const SecuredFrame& frame, ByteView plaintext) {
  const Bytes hdr = frame.authenticated_header();
  const ByteView segs[] = {hdr, plaintext};
  return cbc_mac_segments(key, segs, static_cast<int>(mic_length(frame.level()) * 8));
}

Bytes xor_mic_block(const Key& key, const SecuredFrame& frame, ByteView mic, std::uint16_t flags) {
  return ctr_transform(key, frame.header.source, frame.aux.frame_counter, frame.aux.security_control,
                       mic, flags, 0);
}

}  // namespace

SecuredFrame secure_frame(const Key& key, const MacHeader& header, ByteView payload,
                          SecurityLevel level, std::uint32_t frame_counter,
                          const SecurityParams& params) {
  SecuredFrame f;
  f.header = header;
  f.header.security_enabled = level != SecurityLevel::none;
  if (level == SecurityLevel::none) {
    f.payload.assign(payload.begin(), payload.end());
    return f;
  }
  if (frame_counter == 0xffffffffu) throw CounterExhausted();
  f.aux = AuxSecurityHeader::make(level, frame_counter, params.key_id);

  if (has_integrity(level)) f.mic = frame_mic(key, f, payload);
  if (has_confidentiality(level)) {
    f.payload = ctr_transform(key, f.header.source, frame_counter, f.aux.security_control, payload,
                              params.counter_flags, 1);
    if (!f.mic.empty()) f.mic = xor_mic_block(key, f, f.mic, params.counter_flags);
  } else {
    f.payload.assign(payload.begin(), payload.end());
  }
  return f;
}

std::string_view to_string(SecurityStatus status) {
  switch (status) {
    case SecurityStatus::ok: return "ok";
    case SecurityStatus::replay_rejected: return "replay_rejected";
    case SecurityStatus::integrity_failure: return "integrity_failure";
    case SecurityStatus::unknown_source: return "unknown_source";
  }
  return "?";
}

UnsecureResult unsecure_frame(AclEntry& acl, const SecuredFrame& frame, const UnsecureOptions& options) {
  UnsecureResult r;
  if (acl.source != frame.header.source) {
    r.status = SecurityStatus::unknown_source;
    return r;
  }
  const SecurityLevel level = frame.level();
  if (level == SecurityLevel::none) {
    r.payload = frame.payload;
    return r;
  }
  if (frame.mic.size() != mic_length(level)) {
    r.status = SecurityStatus::integrity_failure;
    return r;
  }
  // Replay protection runs before any cryptographic work.
  if (frame.aux.frame_counter <= acl.highest_counter) {
    r.status = SecurityStatus::replay_rejected;
    return r;
  }
  if (options.update_policy == AclUpdatePolicy::on_counter_check)
    acl.highest_counter = frame.aux.frame_counter;

  r.crypto_performed = true;
  Bytes plaintext = frame.payload;
  Bytes mic = frame.mic;
  if (has_confidentiality(level)) {
    plaintext = ctr_transform(acl.key, frame.header.source, frame.aux.frame_counter,
                              frame.aux.security_control, frame.payload, options.counter_flags, 1);
    if (!mic.empty()) mic = xor_mic_block(acl.key, frame, mic, options.counter_flags);
  }
  if (has_integrity(level)) {
    const Bytes expected = frame_mic(acl.key, frame, plaintext);
    if (expected != mic) {
      r.status = SecurityStatus::integrity_failure;
      return r;
    }
  }
  acl.highest_counter = frame.aux.frame_counter;
  r.payload = std::move(plaintext);
  return r;
}

AclEntry& AclTable::add(ExtAddress source, const Key& key) {
  AclEntry& e = entries_[source];
  e.source = source;
  e.key = key;
  return e;
}

AclEntry* AclTable::find(ExtAddress source) {
  auto it = entries_.find(source);
  return it == entries_.end() ? nullptr : &it->second;
}

const AclEntry* AclTable::find(ExtAddress source) const {
  auto it = entries_.find(source);
  return it == entries_.end() ? nullptr : &it->second;
}

UnsecureResult unsecure_frame(AclTable& table, const SecuredFrame& frame, const UnsecureOptions& options) {
  AclEntry* e = table.find(frame.header.source);
  if (e == nullptr) {
    UnsecureResult r;
    r.status = SecurityStatus::unknown_source;
    return r;
  }
  return unsecure_frame(*e, frame, options);
}

void acl_reset_on_reboot(AclTable& table, bool persistent_blacklist) {
  for (auto& [src, e] : table) {
    e.highest_counter = 0;
    if (!persistent_blacklist) e.blacklisted = false;
  }
}

}  // namespace zigdrain
