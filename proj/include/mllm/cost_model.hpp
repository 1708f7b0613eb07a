#pragma once

// Analytic on-device cost model: energy per token, battery runtime, per-token
// DRAM->SRAM weight traffic under a layer-sharing schedule, and a fleet-scale
// GPU count estimate.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mllm/config.hpp"
#include "mllm/errors.hpp"
#include "mllm/sharing.hpp"

namespace mllm {

struct CostEnvelope {
  double energy_per_token_per_b = 0.1;   // J per token per 1e9 parameters
  std::uint64_t sram_bytes = 20u << 20;  // on-chip capacity
  double battery_joules = 50e3;
  double bytes_per_param = 2.0;
  std::optional<double> dram_bandwidth;  // bytes/s

  void validate() const {
    if (!(energy_per_token_per_b > 0) || sram_bytes == 0 || !(battery_joules > 0) || !(bytes_per_param > 0) ||
        (dram_bandwidth && !(*dram_bandwidth > 0))) {
      throw ConfigError("hardware envelope values must all be positive");
    }
  }
};

inline double energy_per_token(double params, const CostEnvelope& env) {
  if (params < 0) throw ValueError("parameter count must be >= 0");
  return params / 1e9 * env.energy_per_token_per_b;
}

// Seconds of continuous generation a full battery sustains. Infinite for a
// model that costs no energy.
inline double battery_runtime(const CostEnvelope& env, double params, double tokens_per_s) {
  if (!(tokens_per_s > 0)) throw ValueError("token rate must be positive");
  const double watts = energy_per_token(params, env) * tokens_per_s;
  if (watts == 0) return std::numeric_limits<double>::infinity();
  return env.battery_joules / watts;
}

struct WeightTraffic {
  std::uint64_t dram_bytes = 0;        // fetched per generated token
  std::size_t executed_layers = 0;     // schedule length
  std::size_t fetches = 0;             // block loads from DRAM
  std::size_t forced_refetches = 0;    // loads caused by a block larger than SRAM
  std::optional<double> seconds;       // dram_bytes / bandwidth, when known
};

// Walks a schedule with room for one resident block: a step loads its block
// unless that block is the one currently resident. A block that does not fit
// in SRAM is streamed again at every step.
inline WeightTraffic weight_traffic(std::span<const std::size_t> schedule, std::uint64_t block_bytes,
                                    std::uint64_t sram_bytes) {
  WeightTraffic t;
  t.executed_layers = schedule.size();
  const bool fits = block_bytes <= sram_bytes;
  std::optional<std::size_t> resident;
  for (auto idx : schedule) {
    if (fits && resident == idx) continue;
    ++t.fetches;
    if (!fits) ++t.forced_refetches;
    t.dram_bytes += block_bytes;
    resident = fits ? std::optional<std::size_t>(idx) : std::nullopt;
  }
  return t;
}

inline std::uint64_t block_bytes(const ModelConfig& c, double bytes_per_param) {
  return static_cast<std::uint64_t>(static_cast<double>(block_param_count(c)) * bytes_per_param);
}

inline WeightTraffic weight_traffic_per_token(const ModelConfig& c, const CostEnvelope& env) {
  require_valid(c);
  const auto schedule = execution_schedule(c.sharing, c.n_layers, c.repeat_factor);
  auto t = weight_traffic(schedule, block_bytes(c, env.bytes_per_param), env.sram_bytes);
  if (env.dram_bandwidth) t.seconds = static_cast<double>(t.dram_bytes) / *env.dram_bandwidth;
  return t;
}

// Accelerators needed to serve a population continuously:
// population * usage * flops_per_token * tokens_per_s * day / (gpu_flops * day).
inline double fleet_gpus(double population, double usage_fraction, double flops_per_token, double tokens_per_s,
                         double gpu_flops_per_s) {
  if (population < 0 || usage_fraction < 0 || flops_per_token < 0 || tokens_per_s < 0 || !(gpu_flops_per_s > 0)) {
    throw ValueError("fleet_gpus: inputs must be non-negative and gpu throughput positive");
  }
  constexpr double kDay = 24.0 * 3600.0;
  return population * usage_fraction * flops_per_token * tokens_per_s * kDay / (gpu_flops_per_s * kDay);
}

}  // namespace mllm
