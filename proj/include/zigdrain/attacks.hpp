#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "zigdrain/energy_model.hpp"
#include "zigdrain/frame_security.hpp"

namespace zigdrain {

enum class CounterStrategy { increment, fixed_large, random_increasing };
enum class RateModel { constant, poisson, per_slot };

struct AttackerConfig {
  Position position;
  std::vector<NodeId> targets;
  RateModel rate_model = RateModel::constant;
  double rate = 10.0;            // constant mode, frames/s
  double mean_interval = 0.02;   // poisson mode, s
  double slot_probability = 0.1; // per-slot mode
  double slot = 320e-6;
  std::size_t payload_len = 60;
  CounterStrategy counter_strategy = CounterStrategy::increment;
  SecurityLevel level = SecurityLevel::enc_mic128;
  bool blind = true;             // transmit without CSMA
  bool rendezvous = true;        // constant mode anchored to the victim's active periods
  double rendezvous_offset = 0.0001;
  double phase_jitter = 0.0;     // uniform +-jitter on each constant-mode event, s
  double start = 0.0;
  double stop = 1e300;
  /// Spoofed sender; 0 means the victim's next hop.
  ExtAddress spoof_source = 0;

  void validate() const;
};

CounterStrategy counter_strategy_from(const std::string& name);
RateModel rate_model_from(const std::string& name);

inline constexpr std::uint32_t kFixedLargeCounter = 0xfffffffeu;

std::uint32_t next_bogus_counter(std::uint32_t observed, CounterStrategy strategy, std::mt19937_64& rng);

/// Well-formed header, plausible counter, random payload and MIC.
SecuredFrame craft_bogus_frame(ExtAddress spoofed_source, ShortAddress victim, std::uint32_t observed_counter,
                               CounterStrategy strategy, SecurityLevel level, std::size_t payload_len,
                               std::mt19937_64& rng, std::uint8_t sequence = 0);

/// Lazily generated injection times.
class AttackClock {
 public:
  AttackClock(const AttackerConfig& config, const DutyCycle& victim_duty, std::uint64_t seed);

  /// Next injection time, or a negative value when the stream is exhausted.
  double next();
  /// Constant mode only: moves the schedule forward by `events` firings and `dt` seconds.
  void skip(std::uint64_t events, double dt);

 private:
  AttackerConfig cfg_;
  DutyCycle duty_;
  std::mt19937_64 rng_;
  double last_ = 0.0;
  std::uint64_t k_ = 0;
  bool done_ = false;
};

std::vector<double> ghost_schedule(const AttackerConfig& config, const DutyCycle& victim_duty, double sim_end,
                                   std::uint64_t seed);

struct CapturedFrame {
  Bytes raw;  // MPDU including FCS
  double time = 0.0;
  ExtAddress source = 0;
  ShortAddress destination = 0;
  std::uint32_t frame_counter = 0;

  static CapturedFrame from_wire(Bytes raw, double time);
  std::string to_line() const;
  static CapturedFrame from_line(const std::string& line);
};

struct TimedFrame {
  double time = 0.0;
  Bytes raw;
};

/// Re-emits the captures verbatim, in capture order, starting after `reboot_time`.
std::vector<TimedFrame> capture_and_replay(const std::vector<CapturedFrame>& captures, double reboot_time,
                                           double spacing = 0.1);

class LengthMismatch : public Error {
 public:
  LengthMismatch() : Error("ciphertexts differ in length") {}
};

Bytes xor_recover(ByteView c1, ByteView c2);

}  // namespace zigdrain
