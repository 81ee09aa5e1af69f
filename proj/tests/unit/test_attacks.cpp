#include <numeric>
#include <random>

#include "catch_amalgamated.hpp"
#include "zigdrain/attacks.hpp"

using namespace zigdrain;
using Catch::Approx;

namespace {
Key key_from(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Key k{};
  for (auto& b : k) b = static_cast<std::uint8_t>(rng());
  return k;
}
}  // namespace

TEST_CASE("bogus frame counters", "[craft]") {
  std::mt19937_64 rng(1);
  CHECK(craft_bogus_frame(5, 1, 10, CounterStrategy::increment, SecurityLevel::enc_mic32, 60, rng)
            .frame_counter() == 11);
  CHECK(craft_bogus_frame(5, 1, 10, CounterStrategy::fixed_large, SecurityLevel::enc_mic32, 60, rng)
            .frame_counter() == 0xfffffffeu);
  for (int i = 0; i < 100; ++i)
    CHECK(craft_bogus_frame(5, 1, 10, CounterStrategy::random_increasing, SecurityLevel::enc, 20, rng)
              .frame_counter() > 10);
  CHECK_THROWS_AS(craft_bogus_frame(5, 1, 0, CounterStrategy::increment, SecurityLevel::none, 10, rng), Error);
}

TEST_CASE("crafted frame passes the replay check and fails the MIC", "[craft]") {
  std::mt19937_64 rng(2);
  const Key k = key_from(3);
  AclEntry acl{5, k, 10, false};
  const auto f = craft_bogus_frame(5, 1, 10, CounterStrategy::increment, SecurityLevel::enc_mic128, 60, rng);
  const auto r = unsecure_frame(acl, f);
  CHECK(r.status == SecurityStatus::integrity_failure);
  CHECK(r.crypto_performed);
  CHECK(acl.highest_counter == 10);
  CHECK(decode_frame(encode_frame(craft_bogus_frame(5, 1, 10, CounterStrategy::increment, SecurityLevel::enc_mic32,
                                                    60, rng)))
            .aux.level() == SecurityLevel::enc_mic32);
}

TEST_CASE("fixed-large counter poisons the high-water mark under the early-update policy", "[craft]") {
  std::mt19937_64 rng(4);
  const Key k = key_from(5);
  AclEntry acl{5, k, 10, false};
  UnsecureOptions early;
  early.update_policy = AclUpdatePolicy::on_counter_check;
  unsecure_frame(acl, craft_bogus_frame(5, 1, 10, CounterStrategy::fixed_large, SecurityLevel::enc_mic64, 30, rng),
                 early);
  CHECK(acl.highest_counter == 0xfffffffeu);
  MacHeader h;
  h.source = 5;
  CHECK(unsecure_frame(acl, secure_frame(k, h, Bytes{1, 2}, SecurityLevel::enc_mic64, 11), early).status ==
        SecurityStatus::replay_rejected);
}

TEST_CASE("no accidental MIC match", "[craft][property]") {
  std::mt19937_64 rng(6);
  const Key k = key_from(7);
  int matches = 0, unauth_accepts = 0;
  const int levels[] = {1, 2, 3, 5, 6, 7};
  for (int i = 0; i < 100000; ++i) {
    const auto level = security_level_from(levels[i % 6]);
    AclEntry acl{5, k, static_cast<std::uint32_t>(i), false};
    const auto f = craft_bogus_frame(5, 1, acl.highest_counter, CounterStrategy::increment, level, 16, rng);
    const auto r = unsecure_frame(acl, f);
    REQUIRE(r.status != SecurityStatus::replay_rejected);
    REQUIRE(r.crypto_performed);
    if (r.status == SecurityStatus::ok) ++matches;
  }
  CHECK(matches == 0);

  // Level 4 has no integrity: the garbage is accepted.
  for (int i = 0; i < 100; ++i) {
    AclEntry acl{5, k, 0, false};
    const auto f = craft_bogus_frame(5, 1, 0, CounterStrategy::increment, SecurityLevel::enc, 16, rng);
    if (unsecure_frame(acl, f).status == SecurityStatus::ok) ++unauth_accepts;
  }
  CHECK(unauth_accepts == 100);
}

TEST_CASE("ghost schedules", "[schedule]") {
  const DutyCycle duty{0.001, 0.1};
  SECTION("constant 10/s over 1 s") {
    AttackerConfig c;
    c.rate = 10;
    c.rendezvous = false;
    const auto t = ghost_schedule(c, duty, 1.0, 1);
    REQUIRE(t.size() == 10);
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] - t[i - 1] == Approx(0.1));
  }
  SECTION("rendezvous lands inside active periods") {
    AttackerConfig c;
    c.rate = 10;
    c.start = 0.05;
    for (double t : ghost_schedule(c, duty, 5.0, 1)) {
      const double phase = std::fmod(t, 0.1);
      CHECK(phase < 0.001);
    }
  }
  SECTION("poisson mean interval") {
    AttackerConfig c;
    c.rate_model = RateModel::poisson;
    c.mean_interval = 0.02;
    AttackClock clock(c, duty, 11);
    double prev = 0, sum = 0;
    for (int i = 0; i < 10000; ++i) {
      const double x = clock.next();
      sum += x - prev;
      prev = x;
    }
    CHECK(sum / 10000 == Approx(0.02).epsilon(0.05));
  }
  SECTION("per-slot probability") {
    AttackerConfig c;
    c.rate_model = RateModel::per_slot;
    c.slot_probability = 0.25;
    const auto t = ghost_schedule(c, duty, 10.0, 3);
    CHECK(static_cast<double>(t.size()) == Approx(10.0 / 320e-6 * 0.25).epsilon(0.05));
  }
  SECTION("attack window") {
    AttackerConfig c;
    c.rate = 10;
    c.rendezvous = false;
    c.start = 2.0;
    c.stop = 3.0;
    const auto t = ghost_schedule(c, duty, 10.0, 1);
    CHECK(t.front() >= 2.0);
    CHECK(t.back() <= 3.0);
  }
  SECTION("invalid rates") {
    AttackerConfig c;
    c.rate = 0;
    CHECK_THROWS_AS(ghost_schedule(c, duty, 1.0, 1), Error);
  }
}

TEST_CASE("capture and replay", "[replay]") {
  const Key k = key_from(8);
  MacHeader h;
  h.source = 0x21;
  h.destination = 3;
  const auto frame = secure_frame(k, h, Bytes(20, 7), SecurityLevel::enc_mic32, 12);
  const auto cap = CapturedFrame::from_wire(encode_frame(frame), 4.0);
  CHECK(cap.frame_counter == 12);
  CHECK(CapturedFrame::from_line(cap.to_line()).raw == cap.raw);

  const auto replay = capture_and_replay({cap}, 10.0);
  REQUIRE(replay.size() == 1);
  CHECK(replay[0].time > 10.0);
  CHECK(replay[0].raw == cap.raw);

  AclTable acl;
  acl.add(0x21, k).highest_counter = 40;
  acl_reset_on_reboot(acl);
  CHECK(unsecure_frame(acl, decode_frame(replay[0].raw)).status == SecurityStatus::ok);
  CHECK(unsecure_frame(acl, decode_frame(replay[0].raw)).status == SecurityStatus::replay_rejected);
  CHECK_THROWS_AS(capture_and_replay({cap}, 1.0), Error);
}

TEST_CASE("xor recovery", "[nonce]") {
  std::mt19937_64 rng(9);
  Bytes p1(40), p2(40);
  for (auto& b : p1) b = static_cast<std::uint8_t>(rng());
  for (auto& b : p2) b = static_cast<std::uint8_t>(rng());
  CHECK(xor_recover(p1, p1) == Bytes(40, 0));
  const Bytes x = xor_recover(p1, p2);
  CHECK(xor_recover(x, p2) == p1);
  CHECK_THROWS_AS(xor_recover(p1, Bytes(3)), LengthMismatch);

  const Key k = key_from(10);
  const auto c1 = ctr_transform(k, 0x55, 1, 4, p1);
  const auto c2 = ctr_transform(k, 0x55, 1, 4, p2);
  CHECK(xor_recover(c1, c2) == x);
}
