#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "fpc/jscc.hpp"

namespace fpc {

/// Channel noise for one frame in the flattened layout used by complex_map:
/// real-part noise for every sample, then imaginary-part noise. Identical to
/// what complex_awgn adds for the same (seed, stream).
std::vector<double> draw_attribute_noise(std::size_t samples, double snr_db, std::uint64_t seed,
                                         std::uint64_t stream);

/// Loss of one frame through the full attribute path with the given noise
/// (already scaled to the channel variance) held fixed. When `grads` is not
/// null it receives d loss / d parameter for every encoder and decoder
/// parameter (same layout as the model).
double jscc_loss(const Matrix& attrs, const JsccModel& model, double snr_db, const std::vector<double>& noise,
                 JsccModel* grads = nullptr);

/// Model with the same shapes and every parameter zero.
JsccModel zeros_like(const JsccModel& model);

struct AdamConfig {
  double lr = 1e-4;
  double weight_decay = 1e-5;  // decoupled
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer with decoupled weight decay over a fixed list of
/// parameter vectors.
class AdamW {
 public:
  AdamW(std::vector<std::vector<double>*> params, AdamConfig cfg);
  void step(const std::vector<const std::vector<double>*>& grads);
  long steps() const noexcept { return t_; }

 private:
  std::vector<std::vector<double>*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

struct TrainConfig {
  int epochs = 20;
  AdamConfig adam;
  double snr_low_db = 0.0;  // both ends at kNoiselessSnr: no channel noise
  double snr_high_db = 20.0;
  std::uint64_t seed = 1;
  /// Held-out evaluation after every epoch (skipped when the set is empty).
  std::vector<double> eval_snr_db{0, 5, 10, 15, 20};
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0;
  std::vector<double> eval_mse;  // one per eval SNR
};

struct TrainResult {
  JsccModel model;
  std::vector<double> loss_curve;  // mean training loss per epoch
  std::vector<EpochLog> log;
};

/// Phase-two training: one optimizer step per frame, SNR drawn uniformly in
/// dB per frame, frames shuffled every epoch. Throws TrainingError with the
/// epoch index when the loss becomes non-finite.
TrainResult train_phase_two(const std::vector<Matrix>& dataset, const JsccModel& init, const TrainConfig& cfg,
                            const std::vector<Matrix>& held_out = {},
                            const std::function<void(const EpochLog&)>& on_epoch = {});

/// Mean held-out MSE at one SNR; frame i uses noise stream i.
double jscc_eval_mse(const std::vector<Matrix>& frames, const JsccModel& model, double snr_db,
                     std::uint64_t seed);

void write_training_log(const std::filesystem::path& path, const TrainResult& result,
                        const std::vector<double>& eval_snr_db);

/// Correlated Gaussian attribute frames: a low-rank latent mixed into
/// `channels` columns plus per-channel offsets and a small isotropic term.
std::vector<Matrix> synthetic_attribute_frames(std::size_t count, std::size_t rows, std::size_t channels,
                                               std::uint64_t seed);

}  // namespace fpc
