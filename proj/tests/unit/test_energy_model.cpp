#include <random>

#include "catch_amalgamated.hpp"
#include "zigdrain/energy_model.hpp"

using namespace zigdrain;
using Catch::Approx;

namespace {

MessageTiming timing_for(int level, std::size_t payload = 60) {
  return message_timing(payload, 250000.0, level, CpuCostModel{});
}

double lifetime_pct(int level) {
  const DutyCycle duty;
  const MessageTiming t = timing_for(level);
  const auto n_p = messages_per_active_period(duty, t, 10.0);
  return 100.0 * lifetime_ratio(duty, t, n_p, PowerProfile{}, EnergyOptions::device_model());
}

}  // namespace

TEST_CASE("message timing anchors", "[timing]") {
  const MessageTiming ccm = timing_for(7);
  CHECK(ccm.t_dec == Approx(0.035).margin(0.0015));
  CHECK(ccm.t_rx == Approx(0.003).margin(0.0005));
  CHECK(ccm.t_a() == Approx(ccm.t_rx + ccm.t_dec));

  const MessageTiming plain = timing_for(0, 40);
  CHECK(plain.t_dec == Approx(40 * CpuCostModel{}.cycles_per_byte_overhead / 8.0e6));

  CHECK_THROWS_AS(message_timing(60, 250000.0, 9, CpuCostModel{}), UnsupportedLevel);
  CHECK_THROWS_AS(message_timing(128, 250000.0, 1, CpuCostModel{}), Error);
}

TEST_CASE("frame air bytes", "[timing]") {
  // phy 6 + mac 15 + aux 5 + 60 + mic 16 + fcs 2
  CHECK(frame_air_bytes(SecurityLevel::enc_mic128, 60) == 104);
  CHECK(frame_air_bytes(SecurityLevel::none, 60) == 83);
  CHECK(airtime(104, 250000.0) == Approx(104 * 8 / 250000.0));
}

TEST_CASE("messages per active period", "[np]") {
  const DutyCycle duty{0.001, 0.1};
  CHECK(messages_per_active_period(duty, MessageTiming{0.003, 0.035}, 10.0) == 1);
  CHECK(messages_per_active_period(duty, MessageTiming{0.003, 0.035}, 0.0) == 0);
  CHECK(messages_per_active_period(DutyCycle{0.1, 1.0}, MessageTiming{0.002, 0.008}, 1000.0) == 10);
  CHECK_THROWS_AS(messages_per_active_period(duty, MessageTiming{}, -1.0), Error);
}

TEST_CASE("cycle energy", "[energy]") {
  const PowerProfile p;
  const DutyCycle duty{0.001, 0.1};

  SECTION("no attack") {
    const auto e = cycle_energy(duty, MessageTiming{0.003, 0.035}, 0, p);
    CHECK(e.e_comm == Approx(0.001 * 7.0 * 3e-3));
    CHECK(e.e_comp == 0.0);
    // idle term tau * P_i plus the sleep term
    CHECK(e.e_passive == Approx(0.001 * 3.2 * 3e-3 + 0.099 * 0.11 * 3e-3));
  }
  SECTION("hand-evaluated busy case") {
    const auto e = cycle_energy(duty, MessageTiming{0.003, 0.035}, 1, p);
    CHECK(e.e_comp == Approx(0.0008688).epsilon(1e-9));
    CHECK(e.e_comm == Approx(0.000798).epsilon(1e-9));
    CHECK(e.e_passive == Approx(0.00002046).epsilon(1e-9));
    CHECK(e.e_p == Approx(0.00168726).epsilon(1e-9));
  }
  SECTION("radio off during decryption") {
    const auto e = cycle_energy(duty, MessageTiming{0.003, 0.035}, 1, p, EnergyOptions::device_model());
    CHECK(e.e_comm == Approx(0.003 * 7.0 * 3e-3));
  }
  CHECK_THROWS_AS(cycle_energy(duty, MessageTiming{}, -1, p), Error);
}

TEST_CASE("lifetime ratios of the calibrated suites", "[lifetime]") {
  CHECK(lifetime_pct(4) == Approx(10.9).margin(0.5));
  CHECK(lifetime_pct(3) == Approx(6.8).margin(0.5));
  CHECK(lifetime_pct(7) == Approx(6.5).margin(0.5));
  // CTR lives longest, the CCM suites shortest.
  CHECK(lifetime_pct(4) > lifetime_pct(1));
  CHECK(lifetime_pct(1) > lifetime_pct(5));
  CHECK(lifetime_ratio(DutyCycle{}, timing_for(7), 0, PowerProfile{}) == 1.0);
  CHECK(lifetime_ratio(DutyCycle{}, timing_for(7), 0, PowerProfile{}, EnergyOptions::device_model()) == 1.0);
}

TEST_CASE("per-packet cost structure", "[timing]") {
  const CpuCostModel cost;
  for (std::size_t n = 10; n <= 100; n += 5) {
    INFO("payload " << n);
    const std::array<std::pair<int, int>, 3> same_mic{{{1, 5}, {2, 6}, {3, 7}}};
    for (auto [cbc, ccm] : same_mic) {
      CHECK(processing_time(cost, SecurityLevel::enc, n) < processing_time(cost, security_level_from(cbc), n));
      CHECK(processing_time(cost, security_level_from(cbc), n) < processing_time(cost, security_level_from(ccm), n));
    }
  }
  CHECK(processing_time(cost, SecurityLevel::enc_mic32, 20) == processing_time(cost, SecurityLevel::enc_mic32, 30));
}

TEST_CASE("lifetime invariants", "[lifetime][property]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const PowerProfile p;
  for (int trial = 0; trial < 300; ++trial) {
    const DutyCycle duty{0.0005 + 0.01 * u(rng), 0.1};
    const MessageTiming t{0.0005 + 0.004 * u(rng), 0.001 + 0.05 * u(rng)};
    const auto opts = EnergyOptions{(rng() & 1) != 0, (rng() & 1) != 0};
    double prev = 1.0;
    for (std::int64_t n = 0; n < 8; ++n) {
      const double r = lifetime_ratio(duty, t, n, p, opts);
      REQUIRE(r <= prev + 1e-12);
      prev = r;
      const auto e = cycle_energy(duty, t, n, p, opts);
      REQUIRE(e.e_p == Approx(e.e_comm + e.e_comp + e.e_passive));
      REQUIRE(e.e_comm >= 0);
      REQUIRE(e.e_passive >= 0);
    }
    const MessageTiming slower{t.t_rx, t.t_dec * 1.5};
    REQUIRE(lifetime_ratio(duty, slower, 2, p, opts) <= lifetime_ratio(duty, t, 2, p, opts) + 1e-12);

    // Lower bound when the period is saturated, literal (default) options.
    const std::int64_t n_busy = 1 + static_cast<std::int64_t>(duty.tau / t.t_a());
    REQUIRE(1.0 / lifetime_ratio(duty, t, n_busy, p) > n_busy * t.t_a() / duty.tau);

    PowerProfile doubled = p;
    doubled.voltage *= 2;
    const auto e1 = cycle_energy(duty, t, 3, p, opts);
    const auto e2 = cycle_energy(duty, t, 3, doubled, opts);
    REQUIRE(e2.e_p == Approx(2 * e1.e_p));
    REQUIRE(lifetime_ratio(duty, t, 3, doubled, opts) == Approx(lifetime_ratio(duty, t, 3, p, opts)));
  }
}

TEST_CASE("lifetime ratio is non-increasing in attack rate", "[lifetime][property]") {
  const DutyCycle duty{0.01, 0.1};
  const MessageTiming t = timing_for(5, 30);
  double prev = 1.0;
  for (double rate = 0; rate <= 2000; rate += 25) {
    const double r = lifetime_ratio(duty, t, messages_per_active_period(duty, t, rate), PowerProfile{});
    CHECK(r <= prev + 1e-12);
    prev = r;
  }
}

TEST_CASE("messages to depletion", "[battery]") {
  Battery b = Battery::full(2.45);
  b.threshold_ah = b.remaining_ah;
  CHECK(messages_to_depletion(b, 1.0) == 0);

  Battery ten{1.0, 10.0 / 3600.0 / 3.0, 0.0, 3.0};
  CHECK(messages_to_depletion(ten, 1.0) == 10);
  CHECK_THROWS_AS(messages_to_depletion(ten, 0.0), NonPositiveCost);
}

TEST_CASE("no-attack neutrality against the baseline lifetime", "[battery]") {
  const DutyCycle duty;
  const PowerProfile p;
  const auto e0 = cycle_energy(duty, timing_for(7), 0, p, EnergyOptions::device_model());
  const Battery b = Battery::full(2.45);
  const double cycles = b.usable_joules() / e0.e_p;
  CHECK(static_cast<double>(messages_to_depletion(b, e0.e_p)) == Approx(cycles).margin(1.0));
}

TEST_CASE("battery drain", "[battery]") {
  const Battery b = Battery::full(2.45);
  CHECK(battery_drain(b, 0.0, 1e6).remaining_ah == b.remaining_ah);

  const Battery one_mah = Battery::full(0.001);
  const Battery drained = battery_drain(one_mah, 1.0, 3600.0);
  CHECK(drained.remaining_ah == Approx(0.0).margin(1e-15));
  CHECK(drained.depleted());
  CHECK(battery_drain(one_mah, 5.0, 3600.0).remaining_ah == 0.0);

  SECTION("additivity") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> cur(0.0, 20.0), dur(0.0, 50.0);
    Battery acc = Battery::full(2.45);
    double total_mas = 0;
    for (int i = 0; i < 1000; ++i) {
      const double c = cur(rng), d = dur(rng);
      const double before = acc.remaining_ah;
      acc = battery_drain(acc, c, d);
      REQUIRE(acc.remaining_ah <= before);
      total_mas += c * d;
    }
    CHECK(2.45 - acc.remaining_ah == Approx(ah_from_mas(total_mas)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(battery_drain(b, 1.0, -1.0), Error);
}
