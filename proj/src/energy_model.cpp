#include "zigdrain/energy_model.hpp"

#include <algorithm>
#include <cmath>

namespace zigdrain {

void PowerProfile::validate() const {
  if (p_rx < 0 || p_tx < 0 || p_cpu_active < 0 || p_cpu_idle < 0 || p_cpu_powersave < 0 || voltage <= 0)
    throw Error("power profile currents must be non-negative and voltage positive");
  if (!(p_cpu_powersave <= p_cpu_idle && p_cpu_idle <= p_cpu_active))
    throw Error("power profile requires powersave <= idle <= active");
}

void DutyCycle::validate() const {
  if (!(tau > 0.0) || !(period > 0.0)) throw Error("duty cycle times must be positive");
  if (tau > period) throw Error("duty cycle active period exceeds cycle length");
}

void CpuCostModel::validate() const {
  if (!(clock_hz > 0) || !(cycles_per_block > 0) || !(cycles_per_byte_overhead > 0) ||
      key_setup_cycles < 0 || mic_setup_cycles < 0)
    throw Error("CPU cost model parameters must be positive");
}

SecurityWork security_work(SecurityLevel level, std::size_t payload_len, std::size_t header_len) {
  SecurityWork w;
  const std::size_t ctr_blocks = (payload_len + 15) / 16;
  const std::size_t mac_blocks = padded_segment_blocks(header_len) + padded_segment_blocks(payload_len);
  switch (suite_family(level)) {
    case SuiteFamily::none:
      w.processed_bytes = payload_len;
      return w;
    case SuiteFamily::ctr:
      w.aes_blocks = ctr_blocks;
      break;
    case SuiteFamily::cbc_mac:
      w.aes_blocks = mac_blocks;
      w.mic = true;
      break;
    case SuiteFamily::ccm:
      w.aes_blocks = mac_blocks + ctr_blocks + 1;  // +1: the MIC keystream block
      w.mic = true;
      break;
  }
  w.keyed = true;
  w.processed_bytes = 16 * w.aes_blocks;
  return w;
}

double processing_time(const CpuCostModel& cost, SecurityLevel level, std::size_t payload_len) {
  const SecurityWork w = security_work(level, payload_len);
  double cycles = static_cast<double>(w.aes_blocks) * cost.cycles_per_block +
                  static_cast<double>(w.processed_bytes) * cost.cycles_per_byte_overhead;
  if (w.keyed) cycles += cost.key_setup_cycles;
  if (w.mic) cycles += cost.mic_setup_cycles;
  return cycles / cost.clock_hz;
}

std::size_t frame_air_bytes(SecurityLevel level, std::size_t payload_len) {
  std::size_t n = kPhyHeaderLength + kMacHeaderLength + payload_len + mic_length(level) + kFcsLength;
  if (level != SecurityLevel::none) n += 5;
  return n;
}

double airtime(std::size_t air_bytes, double data_rate_bps) {
  return static_cast<double>(air_bytes) * 8.0 / data_rate_bps;
}

MessageTiming message_timing(std::size_t payload_len, double data_rate_bps, int level,
                             const CpuCostModel& cost) {
  const SecurityLevel lv = security_level_from(level);
  if (payload_len > kMaxMacFrameLength) throw Error("payload longer than a MAC frame");
  if (!(data_rate_bps > 0)) throw Error("data rate must be positive");
  return {airtime(frame_air_bytes(lv, payload_len), data_rate_bps), processing_time(cost, lv, payload_len)};
}

std::int64_t messages_per_active_period(const DutyCycle& duty, const MessageTiming& timing,
                                        double attack_rate) {
  if (attack_rate < 0) throw Error("attack rate must be non-negative");
  if (attack_rate == 0.0) return 0;
  const double spacing = std::max(timing.t_a(), 1.0 / attack_rate);
  // Guard against 0.1/0.1 style ratios landing a hair above an integer.
  return static_cast<std::int64_t>(std::ceil(duty.tau / spacing - 1e-12));
}

CycleEnergy cycle_energy(const DutyCycle& duty, const MessageTiming& timing, std::int64_t n_p,
                         const PowerProfile& p, const EnergyOptions& options) {
  if (n_p < 0) throw Error("n_p must be non-negative");
  const double n = static_cast<double>(n_p);
  const double busy = n * timing.t_a();
  const double radio = options.radio_on_during_decrypt ? std::max(busy, duty.tau)
                                                       : std::max(n * timing.t_rx, duty.tau);
  const double v = p.voltage * 1e-3;  // mA * s * V -> J

  CycleEnergy e;
  e.e_comp = n * (timing.t_dec * p.p_cpu_active + timing.t_rx * p.p_cpu_idle) * v;
  e.e_comm = radio * p.p_rx * v;
  if (busy < duty.tau) {
    e.e_sleep = (duty.period - duty.tau) * p.p_cpu_powersave * v;
    e.e_passive = (duty.tau - busy) * p.p_cpu_idle * v + e.e_sleep;
  } else {
    e.e_sleep = std::max(0.0, duty.period - busy) * p.p_cpu_powersave * v;
    e.e_passive = e.e_sleep;
  }
  e.e_p = e.e_comm + e.e_comp + e.e_passive;
  return e;
}

double lifetime_ratio(const DutyCycle& duty, const MessageTiming& timing, std::int64_t n_p,
                      const PowerProfile& p, const EnergyOptions& options) {
  if (n_p < 0) throw Error("n_p must be non-negative");
  if (n_p == 0) return 1.0;
  const double v = p.voltage * 1e-3;
  double baseline = duty.tau * (p.p_rx + p.p_cpu_idle) * v;
  if (options.include_sleep_cost) baseline += (duty.period - duty.tau) * p.p_cpu_powersave * v;
  const CycleEnergy e = cycle_energy(duty, timing, n_p, p, options);
  const double attacked = options.include_sleep_cost ? e.e_p : e.e_p - e.e_sleep;
  return baseline / attacked;
}

Battery Battery::full(double capacity_ah, double voltage, double threshold_ah) {
  return Battery{capacity_ah, capacity_ah, threshold_ah, voltage};
}

std::int64_t messages_to_depletion(const Battery& battery, double e_p) {
  if (!(e_p > 0)) throw NonPositiveCost();
  const double usable = battery.usable_joules();
  if (usable <= 0) return 0;
  return static_cast<std::int64_t>(std::ceil(usable / e_p));
}

Battery battery_drain(Battery battery, double current_ma, double duration_s) {
  if (duration_s < 0) throw Error("drain duration must be non-negative");
  if (current_ma < 0) throw Error("drain current must be non-negative");
  battery.remaining_ah = std::max(0.0, battery.remaining_ah - ah_from_mas(current_ma * duration_s));
  return battery;
}

}  // namespace zigdrain
