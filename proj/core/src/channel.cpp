#include "fpc/channel.hpp"

#include <cmath>
#include <random>

#include <boost/random/normal_distribution.hpp>

#include "fpc/error.hpp"
#include "fpc/rng.hpp"

namespace fpc {

double noise_variance(double snr_db) {
  if (snr_db == kNoiselessSnr) return 0.0;
  if (!std::isfinite(snr_db)) throw ConfigError("channel SNR must be finite or the noiseless sentinel");
  return 1.0 / (2.0 * std::pow(10.0, snr_db / 10.0));
}

std::vector<double> bpsk_modulate(std::span<const std::uint8_t> bits) {
  std::vector<double> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = (bits[i] & 1u) ? -1.0 : 1.0;
  return out;
}

std::vector<double> bpsk_demodulate_llr(std::span<const double> symbols, double snr_db) {
  const double var = noise_variance(snr_db);
  std::vector<double> llr(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (var == 0.0)
      llr[i] = symbols[i] >= 0 ? kNoiselessLlr : -kNoiselessLlr;
    else
      llr[i] = 2.0 * symbols[i] / var;
  }
  return llr;
}

std::vector<std::uint8_t> hard_decision(std::span<const double> symbols) {
  std::vector<std::uint8_t> bits(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) bits[i] = symbols[i] < 0 ? 1 : 0;
  return bits;
}

std::vector<double> awgn(std::span<const double> symbols, const ChannelConfig& cfg, std::uint64_t stream) {
  std::vector<double> out(symbols.begin(), symbols.end());
  const double var = noise_variance(cfg.snr_db);
  if (var == 0.0) return out;
  auto rng = make_rng(cfg.seed, StreamTag::geometry_noise, stream);
  boost::random::normal_distribution<double> noise(0.0, std::sqrt(var));
  for (double& y : out) y += noise(rng);
  return out;
}

}  // namespace fpc
