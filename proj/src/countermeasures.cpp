#include "zigdrain/countermeasures.hpp"

#include <algorithm>

#include "zigdrain/aes.hpp"

namespace zigdrain {

bool blacklist_observe(BlacklistState& state, ExtAddress src, FrameOutcome outcome) {
  switch (outcome) {
    case FrameOutcome::ok:
      state.bogus_count[src] = 0;
      return false;
    case FrameOutcome::replay_reject:
      return false;
    case FrameOutcome::integrity_fail:
      break;
  }
  if (state.contains(src)) return false;
  if (++state.bogus_count[src] < state.threshold) return false;
  state.blacklisted.insert(src);
  return true;
}

void blacklist_reset_on_reboot(BlacklistState& state) {
  state.bogus_count.clear();
  if (!state.persistent) state.blacklisted.clear();
}

ChallengeSession* ChallengeTable::find(ExtAddress peer) {
  const auto it = sessions_.find(peer);
  return it == sessions_.end() ? nullptr : &it->second;
}

bool ChallengeTable::pending(ExtAddress peer, double now) const {
  const auto it = sessions_.find(peer);
  return it != sessions_.end() && it->second.state == ChallengeState::pending &&
         now - it->second.issued_at <= timeout_;
}

ChallengeSession& issue_challenge(ChallengeTable& table, ExtAddress peer, double now) {
  if (table.pending(peer, now)) throw SessionAlreadyPending();
  ChallengeSession s;
  s.peer = peer;
  s.issued_at = now;
  for (std::size_t i = 0; i < s.nonce.size(); i += 8) {
    const std::uint64_t r = table.rng_();
    for (int b = 0; b < 8; ++b) s.nonce[i + b] = static_cast<std::uint8_t>(r >> (8 * b));
  }
  return table.sessions_[peer] = s;
}

Bytes challenge_response(const Key& key, const ChallengeNonce& nonce, ExtAddress peer) {
  Bytes input(nonce.begin(), nonce.end());
  put_u64(input, peer);
  return cbc_mac(key, input, 64);
}

ChallengeState verify_response(const Key& key, ChallengeSession& session, ByteView response, double now,
                               double timeout_s) {
  if (session.state != ChallengeState::pending) return session.state;
  if (now - session.issued_at > timeout_s) {
    session.state = ChallengeState::failed;
    throw SessionExpired();
  }
  const Bytes expected = challenge_response(key, session.nonce, session.peer);
  const bool match = response.size() == expected.size() && std::equal(expected.begin(), expected.end(), response.begin());
  session.state = match ? ChallengeState::verified : ChallengeState::failed;
  return session.state;
}

Key derive_next_key(const Key& old_key, std::uint32_t epoch) {
  Block in{};
  const char tag[] = "rekey";
  std::copy(tag, tag + 5, in.begin());
  in[12] = static_cast<std::uint8_t>(epoch >> 24);
  in[13] = static_cast<std::uint8_t>(epoch >> 16);
  in[14] = static_cast<std::uint8_t>(epoch >> 8);
  in[15] = static_cast<std::uint8_t>(epoch);
  Block out = aes_encrypt_block(old_key, in);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] ^= in[i];
  return out;
}

void rekey_on_reboot(KeyStore& store) {
  ++store.epoch;
  for (auto& [peer, key] : store.keys) key = derive_next_key(key, store.epoch);
}

}  // namespace zigdrain
