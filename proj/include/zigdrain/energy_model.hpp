#pragma once

#include <cstddef>
#include <cstdint>

#include "zigdrain/frame_security.hpp"

namespace zigdrain {

/// Per-state current draw in mA at a fixed supply voltage.
struct PowerProfile {
  double p_rx = 7.0;
  double p_tx = 8.5;
  double p_cpu_active = 8.0;
  double p_cpu_idle = 3.2;
  double p_cpu_powersave = 0.11;
  double voltage = 3.0;

  void validate() const;
};

struct DutyCycle {
  double tau = 0.001;    // active period, s
  double period = 0.1;   // cycle length, s

  double ratio() const { return tau / period; }
  bool always_on() const { return tau >= period; }
  void validate() const;
};

struct MessageTiming {
  double t_rx = 0.0;   // radio receive time, s
  double t_dec = 0.0;  // CPU decrypt + verify time, s

  double t_a() const { return t_rx + t_dec; }
};

/// CPU cost of the security suites, in clock cycles.
///
/// Every secured frame pays a key schedule; suites carrying a MIC additionally pay
/// the MIC setup and compare. Each AES block and each byte pushed through the
/// padded XOR path adds a fixed cost on top. Defaults put AES-CCM-128 on a
/// 60-byte payload at about 35.8 ms on an 8 MHz core.
struct CpuCostModel {
  double clock_hz = 8.0e6;
  double cycles_per_block = 3000.0;
  double key_setup_cycles = 143000.0;
  double mic_setup_cycles = 107000.0;
  double cycles_per_byte_overhead = 20.0;

  void validate() const;
};

struct SecurityWork {
  std::size_t aes_blocks = 0;
  std::size_t processed_bytes = 0;
  bool keyed = false;
  bool mic = false;
};

/// Length of MAC header ‖ aux header for the default (key-id-less) frame layout.
inline constexpr std::size_t kSecuredHeaderLength = kMacHeaderLength + 5;

SecurityWork security_work(SecurityLevel level, std::size_t payload_len,
                           std::size_t header_len = kSecuredHeaderLength);

/// CPU seconds to secure or unsecure one frame.
double processing_time(const CpuCostModel& cost, SecurityLevel level, std::size_t payload_len);

/// Bytes on air for a data frame carrying `payload_len` bytes at `level`.
std::size_t frame_air_bytes(SecurityLevel level, std::size_t payload_len);

double airtime(std::size_t air_bytes, double data_rate_bps);

MessageTiming message_timing(std::size_t payload_len, double data_rate_bps, int level,
                             const CpuCostModel& cost);

/// n_p = ceil(tau / max(t_a, 1/rate)); zero when rate is zero.
std::int64_t messages_per_active_period(const DutyCycle& duty, const MessageTiming& timing,
                                        double attack_rate);

struct EnergyOptions {
  bool include_sleep_cost = false;
  bool radio_on_during_decrypt = true;

  /// Radio off once a frame is received, sleep cost counted. What the simulator does.
  static EnergyOptions device_model() { return {true, false}; }
};

/// Energy over one duty cycle, in joules.
struct CycleEnergy {
  double e_comm = 0.0;
  double e_comp = 0.0;
  double e_passive = 0.0;
  double e_p = 0.0;
  double e_sleep = 0.0;  // powersave share of e_passive
};

CycleEnergy cycle_energy(const DutyCycle& duty, const MessageTiming& timing, std::int64_t n_p,
                         const PowerProfile& profile, const EnergyOptions& options = {});

/// L / L0 for a node processing n_p bogus frames per active period.
double lifetime_ratio(const DutyCycle& duty, const MessageTiming& timing, std::int64_t n_p,
                      const PowerProfile& profile, const EnergyOptions& options = {});

struct Battery {
  double capacity_ah = 2.45;
  double remaining_ah = 2.45;
  double threshold_ah = 0.0;
  double voltage = 3.0;

  static Battery full(double capacity_ah, double voltage = 3.0, double threshold_ah = 0.0);

  bool depleted() const { return remaining_ah <= threshold_ah; }
  double residual_joules() const { return remaining_ah * 3600.0 * voltage; }
  double usable_joules() const { return (remaining_ah - threshold_ah) * 3600.0 * voltage; }
};

class NonPositiveCost : public Error {
 public:
  NonPositiveCost() : Error("per-message energy must be positive") {}
};

/// m = ceil((E_residual - E_threshold) / e_p), e_p in joules.
std::int64_t messages_to_depletion(const Battery& battery, double e_p);

Battery battery_drain(Battery battery, double current_ma, double duration_s);

inline constexpr double ah_from_mas(double ma_seconds) { return ma_seconds / 3.6e6; }

}  // namespace zigdrain
