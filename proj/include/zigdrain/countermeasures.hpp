#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <set>

#include "zigdrain/frame_security.hpp"

namespace zigdrain {

enum class FrameOutcome { ok, integrity_fail, replay_reject };

struct BlacklistState {
  int threshold = 5;
  bool persistent = false;
  std::map<ExtAddress, int> bogus_count;
  std::set<ExtAddress> blacklisted;

  bool contains(ExtAddress src) const { return blacklisted.count(src) != 0; }
};

/// Updates the per-source bogus count. Returns true when `src` was just blacklisted.
bool blacklist_observe(BlacklistState& state, ExtAddress src, FrameOutcome outcome);

/// Reboot handling: counts always go, the set survives only when persistent.
void blacklist_reset_on_reboot(BlacklistState& state);

using ChallengeNonce = std::array<std::uint8_t, 16>;

enum class ChallengeState { pending, verified, failed };

struct ChallengeSession {
  ExtAddress peer = 0;
  ChallengeNonce nonce{};
  double issued_at = 0.0;
  ChallengeState state = ChallengeState::pending;
};

class SessionAlreadyPending : public Error {
 public:
  SessionAlreadyPending() : Error("a challenge is already pending for this peer") {}
};

class SessionExpired : public Error {
 public:
  SessionExpired() : Error("challenge session expired") {}
};

/// Open challenge sessions of one device.
class ChallengeTable {
 public:
  explicit ChallengeTable(std::uint64_t seed = 0, double timeout_s = 1.0) : rng_(seed), timeout_(timeout_s) {}

  double timeout() const { return timeout_; }
  ChallengeSession* find(ExtAddress peer);
  bool pending(ExtAddress peer, double now) const;
  void erase(ExtAddress peer) { sessions_.erase(peer); }
  void clear() { sessions_.clear(); }

  friend ChallengeSession& issue_challenge(ChallengeTable& table, ExtAddress peer, double now);

 private:
  std::mt19937_64 rng_;
  double timeout_;
  std::map<ExtAddress, ChallengeSession> sessions_;
};

/// Starts a session with a fresh random nonce. Expired sessions are replaced.
ChallengeSession& issue_challenge(ChallengeTable& table, ExtAddress peer, double now);

/// cbc_mac(key, nonce ‖ peer address, 64).
Bytes challenge_response(const Key& key, const ChallengeNonce& nonce, ExtAddress peer);

ChallengeState verify_response(const Key& key, ChallengeSession& session, ByteView response, double now,
                               double timeout_s);

struct KeyStore {
  std::map<ExtAddress, Key> keys;  // pairwise key per peer
  std::uint32_t epoch = 0;
};

/// One-way keyed step: E_k(epoch block) xor epoch block.
Key derive_next_key(const Key& old_key, std::uint32_t epoch);

/// Advances the epoch and replaces every key.
void rekey_on_reboot(KeyStore& store);

}  // namespace zigdrain
