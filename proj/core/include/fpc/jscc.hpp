#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fpc/channel.hpp"
#include "fpc/param_store.hpp"
#include "fpc/tensor.hpp"

namespace fpc {

struct JsccConfig {
  std::size_t channels = 8;      // attribute channels in and out (C_a)
  std::size_t width = 40;        // channel feature width W
  std::size_t hidden = 20;       // narrow layer of the outer residual blocks
  std::size_t snr_width = 8;     // SNR broadcast block appended before the mod block
  double snr_scale = 1.0 / 20.0; // dB -> network input
  /// Encoder res2 reads b1 instead of the mod output.
  bool res2_on_b1 = false;

  void validate() const;
};

/// SNR values above this are fed to the network as this value; the noiseless
/// sentinel is infinite and cannot be used as an input directly.
inline constexpr double kSnrConditioningCapDb = 40.0;

/// y = fc2(fc1(x)) + skip(x). Without a skip layer the input is added as is.
struct ResidualFc {
  LinearLayer fc1, fc2;
  bool has_skip = false;
  LinearLayer skip;
};

/// h = shared(x | snr); y = x * (gate(h) + shift(h)).
struct SnrModulation {
  LinearLayer shared;  // leaky relu
  LinearLayer gate;    // sigmoid
  LinearLayer shift;   // linear
};

/// One side of the attribute codec: residual block, SNR modulation, residual
/// block. The encoder maps C -> W, the decoder W -> C.
struct JsccNet {
  ResidualFc res1;
  SnrModulation mod;
  ResidualFc res2;
  bool res2_on_b1 = false;

  /// Every weight and bias, in a fixed order (used by the optimizer).
  std::vector<std::vector<double>*> parameters();
  std::vector<const std::vector<double>*> parameters() const;
};

struct JsccModel {
  JsccConfig config;
  JsccNet encoder;
  JsccNet decoder;

  /// Parameter names: encoder.res1.fc1.w, ..., decoder.mod.gate.b, ...
  static ParamLayout layout(const JsccConfig& cfg);
  static JsccModel from_store(const ParamStore& store, const JsccConfig& cfg);
  static JsccModel seeded(std::uint64_t seed, const JsccConfig& cfg = {}) {
    return from_store(layout(cfg).init(seed), cfg);
  }
  ParamStore to_store() const;
};

/// Constant block appended to every row before the mod block.
Matrix snr_block(std::size_t rows, const JsccConfig& cfg, double snr_db);

Matrix jscc_encode(const Matrix& attrs, double snr_db, const JsccModel& model);
Matrix jscc_decode(const Matrix& received, double snr_db, const JsccModel& model);

struct ComplexSignal {
  std::vector<double> re;
  std::vector<double> im;
  double scale = 1.0;   // power normalization factor
  bool padded = false;  // one zero sample was appended to even out the count

  std::size_t samples() const noexcept { return re.size(); }
  /// Mean |s|^2 over complex samples.
  double mean_power() const;
};

/// Flattens rows in order; the first half of the values become the real
/// parts, the second half the imaginary parts.
ComplexSignal complex_map(const Matrix& features);
Matrix complex_unmap(const ComplexSignal& sig, std::size_t rows, std::size_t cols);

/// Scales to unit mean power and records the factor. All-zero input throws
/// DegenerateInputError.
ComplexSignal power_normalize(const ComplexSignal& sig);
ComplexSignal power_denormalize(const ComplexSignal& sig);

/// Independent N(0, 1 / (2 * 10^(snr/10))) noise on both components, keyed by
/// (cfg.seed, stream).
ComplexSignal complex_awgn(const ComplexSignal& sig, const ChannelConfig& cfg, std::uint64_t stream = 0);

/// Attribute symbols on disk with the feature shape needed to unmap them.
/// Text layout: "FPCA rows cols padded scale samples", then one "re im" line
/// per complex sample.
struct AttributeFrame {
  std::size_t rows = 0, cols = 0;
  ComplexSignal signal;

  void save(const std::filesystem::path& path) const;
  static AttributeFrame load(const std::filesystem::path& path);
};

double mse_loss(const Matrix& sent, const Matrix& received);

struct JsccTransmitResult {
  Matrix decoded;
  ComplexSignal transmitted;  // after power normalization, before noise
};

/// encode -> map -> normalize -> AWGN -> denormalize -> unmap -> decode
JsccTransmitResult jscc_transmit(const Matrix& attrs, const JsccModel& model, const ChannelConfig& cfg,
                                 std::uint64_t stream = 0);

}  // namespace fpc
