#include "zigdrain/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace zigdrain {

void AttackerConfig::validate() const {
  if (payload_len > 100) throw Error("attacker payload_len must be <= 100");
  if (level == SecurityLevel::none) throw Error("attacker level must be 1..7");
  switch (rate_model) {
    case RateModel::constant:
      if (!(rate > 0)) throw Error("attacker rate must be positive");
      break;
    case RateModel::poisson:
      if (!(mean_interval > 0)) throw Error("attacker mean_interval must be positive");
      break;
    case RateModel::per_slot:
      if (!(slot_probability > 0) || slot_probability > 1 || !(slot > 0))
        throw Error("attacker slot_probability must be in (0,1]");
      break;
  }
  if (phase_jitter < 0) throw Error("phase_jitter must be non-negative");
  if (stop < start) throw Error("attacker stop precedes start");
}

CounterStrategy counter_strategy_from(const std::string& name) {
  if (name == "increment") return CounterStrategy::increment;
  if (name == "fixed_large") return CounterStrategy::fixed_large;
  if (name == "random_increasing") return CounterStrategy::random_increasing;
  throw Error("unknown counter strategy '" + name + "'");
}

RateModel rate_model_from(const std::string& name) {
  if (name == "constant") return RateModel::constant;
  if (name == "poisson") return RateModel::poisson;
  if (name == "per_slot") return RateModel::per_slot;
  throw Error("unknown rate model '" + name + "'");
}

std::uint32_t next_bogus_counter(std::uint32_t observed, CounterStrategy strategy, std::mt19937_64& rng) {
  switch (strategy) {
    case CounterStrategy::increment:
      return observed < kFixedLargeCounter ? observed + 1 : kFixedLargeCounter;
    case CounterStrategy::fixed_large:
      return kFixedLargeCounter;
    case CounterStrategy::random_increasing: {
      if (observed >= kFixedLargeCounter - 1) return kFixedLargeCounter;
      const std::uint64_t room = std::min<std::uint64_t>(kFixedLargeCounter - observed, 1000);
      return observed + 1 + static_cast<std::uint32_t>(rng() % room);
    }
  }
  return observed + 1;
}

SecuredFrame craft_bogus_frame(ExtAddress spoofed_source, ShortAddress victim, std::uint32_t observed_counter,
                               CounterStrategy strategy, SecurityLevel level, std::size_t payload_len,
                               std::mt19937_64& rng, std::uint8_t sequence) {
  if (level == SecurityLevel::none) throw Error("bogus frames need a secured level");
  SecuredFrame f;
  f.header.type = FrameType::data;
  f.header.security_enabled = true;
  f.header.ack_request = false;
  f.header.sequence = sequence;
  f.header.destination = victim;
  f.header.source = spoofed_source;
  f.aux = AuxSecurityHeader::make(level, next_bogus_counter(observed_counter, strategy, rng));
  f.payload.resize(payload_len);
  for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng());
  f.mic.resize(mic_length(level));
  for (auto& b : f.mic) b = static_cast<std::uint8_t>(rng());
  return f;
}

AttackClock::AttackClock(const AttackerConfig& config, const DutyCycle& victim_duty, std::uint64_t seed)
    : cfg_(config), duty_(victim_duty), rng_(seed), last_(config.start) {
  cfg_.validate();
}

double AttackClock::next() {
  if (done_) return -1.0;
  double t = 0.0;
  switch (cfg_.rate_model) {
    case RateModel::constant: {
      const double base = cfg_.rendezvous ? std::ceil(cfg_.start / duty_.period - 1e-12) * duty_.period +
                                                cfg_.rendezvous_offset
                                          : cfg_.start;
      t = base + static_cast<double>(k_++) / cfg_.rate;
      if (cfg_.phase_jitter > 0) {
        std::uniform_real_distribution<double> j(-cfg_.phase_jitter, cfg_.phase_jitter);
        t = std::max(cfg_.start, t + j(rng_));
      }
      break;
    }
    case RateModel::poisson: {
      std::exponential_distribution<double> e(1.0 / cfg_.mean_interval);
      t = last_ + e(rng_);
      break;
    }
    case RateModel::per_slot: {
      std::geometric_distribution<long long> g(cfg_.slot_probability);
      t = last_ + static_cast<double>(g(rng_) + 1) * cfg_.slot;
      break;
    }
  }
  last_ = t;
  if (t > cfg_.stop) {
    done_ = true;
    return -1.0;
  }
  return t;
}

void AttackClock::skip(std::uint64_t events, double dt) {
  if (cfg_.rate_model != RateModel::constant || cfg_.phase_jitter > 0)
    throw Error("only jitter-free constant schedules can be skipped");
  k_ += events;
  last_ += dt;
}

std::vector<double> ghost_schedule(const AttackerConfig& config, const DutyCycle& victim_duty, double sim_end,
                                   std::uint64_t seed) {
  AttackClock clock(config, victim_duty, seed);
  std::vector<double> out;
  for (double t = clock.next(); t >= 0 && t < sim_end; t = clock.next()) out.push_back(t);
  return out;
}

CapturedFrame CapturedFrame::from_wire(Bytes raw, double time) {
  const SecuredFrame f = decode_frame(raw);
  CapturedFrame c;
  c.raw = std::move(raw);
  c.time = time;
  c.source = f.header.source;
  c.destination = f.header.destination;
  c.frame_counter = f.frame_counter();
  return c;
}

std::string CapturedFrame::to_line() const {
  std::ostringstream os;
  os.precision(17);
  os << time << ' ' << to_hex(raw);
  return os.str();
}

CapturedFrame CapturedFrame::from_line(const std::string& line) {
  std::istringstream is(line);
  double t = 0;
  std::string hex;
  if (!(is >> t >> hex)) throw Error("malformed capture line");
  return from_wire(from_hex(hex), t);
}

std::vector<TimedFrame> capture_and_replay(const std::vector<CapturedFrame>& captures, double reboot_time,
                                           double spacing) {
  for (const auto& c : captures)
    if (c.time > reboot_time) throw Error("capture taken after the reboot time");
  std::vector<TimedFrame> out;
  double t = reboot_time;
  for (const auto& c : captures) {
    t += spacing;
    out.push_back({t, c.raw});
  }
  return out;
}

Bytes xor_recover(ByteView c1, ByteView c2) {
  if (c1.size() != c2.size()) throw LengthMismatch();
  Bytes out(c1.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c1[i] ^ c2[i];
  return out;
}

}  // namespace zigdrain
