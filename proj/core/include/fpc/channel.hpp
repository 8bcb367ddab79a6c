#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace fpc {

/// Sentinel for a noiseless channel.
inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

struct ChannelConfig {
  double snr_db = 10.0;
  std::uint64_t seed = 1;

  bool noiseless() const noexcept { return snr_db == kNoiselessSnr; }
};

/// Per-component noise variance 1 / (2 * 10^(snr/10)); 0 for the noiseless
/// sentinel.
double noise_variance(double snr_db);

/// bit 0 -> +1, bit 1 -> -1.
std::vector<double> bpsk_modulate(std::span<const std::uint8_t> bits);

/// LLR = 2 y / sigma^2. In the noiseless case the LLR saturates at
/// +/- kNoiselessLlr with the sign of y.
std::vector<double> bpsk_demodulate_llr(std::span<const double> symbols, double snr_db);

inline constexpr double kNoiselessLlr = 1e6;

std::vector<std::uint8_t> hard_decision(std::span<const double> symbols);

/// y = x + N(0, sigma^2). The noise stream is keyed by (cfg.seed, stream) so
/// independent blocks draw independent, reproducible noise.
std::vector<double> awgn(std::span<const double> symbols, const ChannelConfig& cfg, std::uint64_t stream = 0);

}  // namespace fpc
