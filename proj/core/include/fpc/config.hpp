#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fpc/jscc.hpp"
#include "fpc/ldpc.hpp"
#include "fpc/scene.hpp"
#include "fpc/upsampler.hpp"

namespace fpc {

struct LinkSettings {
  bool ldpc_enabled = true;
  LdpcParams ldpc;
  int max_iters = kDefaultLdpcIterations;
  std::size_t uncoded_block = 100;  // block length when LDPC is off
};

struct TrainSettings {
  std::size_t frames = 500;
  std::size_t held_out = 100;
  std::size_t rows = 64;  // voxels per synthetic attribute frame
  int epochs = 20;
  double lr = 1e-4;
  double weight_decay = 1e-5;
  double snr_low_db = 0.0;
  double snr_high_db = 20.0;
  std::vector<double> eval_snr_db{0, 5, 10, 15, 20};
};

struct SweepSettings {
  std::vector<int> expansion{0, 8, 16, 24, 32};
  std::vector<std::size_t> channels{2, 4, 6, 8};
  std::vector<std::size_t> width{10, 20, 40, 80};
  std::size_t width_train_frames = 200;
  std::vector<double> ber_snr_db{0, 1, 2, 3, 4, 5, 6, 8, 10, 15, 20};
  std::size_t ber_blocks = 1640;  // ~1e5 information bits at k = 61
};

struct PipelineConfig {
  static constexpr int kVersion = 1;

  std::uint64_t seed = 1;
  std::size_t frames = 4;
  unsigned workers = 0;  // 0 -> hardware concurrency
  std::filesystem::path output_dir = "out";
  std::size_t channels = 8;  // C_a
  std::vector<double> snr_db{10.0};
  SceneGenConfig scene;
  LinkSettings link;
  JsccConfig jscc;
  DiffusionConfig diffusion;
  bool run_attributes = true;
  bool run_upsample = true;
  // Parameter files; empty means seeded initialization from `seed`.
  std::filesystem::path compaction_weights, decompaction_weights, jscc_weights, upsampler_weights;
  std::string geometry_codec;  // external codec command; empty -> built-in octree
  TrainSettings train;
  SweepSettings sweeps;

  /// Throws ConfigError on the first violated precondition.
  void validate() const;
};

/// Strict JSON reader: "version" is required, every other key is optional,
/// and unknown keys are rejected. SNR entries may be the string "inf" for a
/// noiseless channel.
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const PipelineConfig& cfg);

}  // namespace fpc
