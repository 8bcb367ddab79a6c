#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fpc/config.hpp"
#include "fpc/geometry_link.hpp"
#include "fpc/jscc.hpp"
#include "fpc/jscc_train.hpp"
#include "fpc/source_codec.hpp"
#include "fpc/upsampler.hpp"

namespace fpc {

/// Channels of an input voxel: 3 coordinates plus 64 attributes.
inline constexpr std::size_t kInputDims = 3 + kFeatureChannels;

/// (n * c_in) / (n' * c_out). Throws DegenerateInputError for n' == 0 or
/// c_out == 0.
double compression_rate(std::size_t n, std::size_t c_in, std::size_t n_prime, std::size_t c_out);

/// Every learned component the pipeline runs, loaded from files or seeded.
struct PipelineModels {
  CompactionModel compaction;
  DecompactionModel decompaction;
  JsccModel jscc;
  UpsamplerModel upsampler;
  NormStats stats_g, stats_a;
  std::optional<LdpcCode> code;
  std::shared_ptr<const GeometryCodec> codec;  // null -> octree
};

/// Parameter files named in the config are loaded; the rest are seeded from
/// the master seed. Upsampler statistics come from the upsampler file when it
/// carries them, otherwise from a calibration scene.
PipelineModels load_models(const PipelineConfig& cfg);

struct FrameReport {
  std::uint64_t frame = 0;
  double snr_db = 0;
  std::size_t n = 0;        // input voxels
  std::size_t n_prime = 0;  // retained voxels
  std::size_t dims_in = 0;   // n * 67
  std::size_t dims_out = 0;  // n' * (3 + C_a)
  double cr = 0;             // 0 when n' == 0
  bool failsafe = false;
  bool geometry_ok = false;     // every block converged and the payload parsed
  bool geometry_exact = false;  // decoded coordinates equal the sent ones
  std::size_t channel_bits = 0;
  double ber_pre = 0;   // channel bit errors before decoding
  double ber_post = 0;  // payload bit errors after decoding
  std::size_t ldpc_blocks = 0;
  int ldpc_iterations = 0;
  double attr_mse = 0;   // sent vs received compacted attributes
  double tx_power = 0;   // mean power of the transmitted attribute signal
  std::size_t gt_voxels = 0;
  double mask_precision = 0;  // proxy metrics against box ground truth;
  double mask_recall = 0;     // 0 when undefined
  double focal_loss = 0;
  std::size_t upsampled_voxels = 0;
};

struct FrameTiming {
  std::uint64_t frame = 0;
  double snr_db = 0;
  double edge_ms = 0, geometry_ms = 0, attributes_ms = 0, cloud_ms = 0;
};

struct Aggregate {
  std::size_t frames = 0;
  std::size_t dims_in = 0, dims_out = 0;
  double cr = 0;  // sum(dims_in) / sum(dims_out)
  double geometry_ok_rate = 0;
  double geometry_failure_rate = 0;  // !ok or !exact
  double mean_ber_pre = 0, mean_ber_post = 0;
  double mean_attr_mse = 0;
  double max_power_error = 0;  // max |tx_power - 1| over frames with attributes
  double mean_precision = 0, mean_recall = 0;
  double mean_ldpc_iterations = 0;  // per block
};

Aggregate aggregate_reports(const std::vector<FrameReport>& frames);

/// One frame end to end at one SNR. Geometry failures are recorded, not
/// thrown.
FrameReport process_frame(const PipelineConfig& cfg, const PipelineModels& models, std::uint64_t frame,
                          double snr_db, FrameTiming* timing = nullptr);

struct E2eResult {
  std::vector<FrameReport> frames;  // ordered by (snr index, frame id)
  std::vector<FrameTiming> timings;
  Aggregate aggregate;
};

/// Every frame at every SNR of the config, on a worker pool.
E2eResult run_e2e(const PipelineConfig& cfg);
E2eResult run_e2e(const PipelineConfig& cfg, const PipelineModels& models);

/// frames.csv and aggregate.json (deterministic) plus timings.csv.
void write_e2e_reports(const std::filesystem::path& dir, const E2eResult& result);
std::string frames_csv(const std::vector<FrameReport>& frames);
std::string aggregate_json(const Aggregate& a);

// Sweeps ------------------------------------------------------------------------

struct BerRow {
  double snr_db = 0;
  double uncoded_ber = 0;
  double coded_ber = 0;
  double fer = 0;
  double mean_iters = 0;
};

/// Random information blocks through LDPC + BPSK + AWGN. The uncoded BER is
/// the hard-decision error rate of the same received symbols.
std::vector<BerRow> ber_sweep(const std::vector<double>& snr_db, std::size_t blocks, const LdpcCode& code,
                              std::uint64_t seed, int max_iters = kDefaultLdpcIterations);
std::string ber_csv(const std::vector<BerRow>& rows);

struct ExpansionRow {
  int expansion = 0;
  double gt_fraction = 0;  // share of input voxels inside the expanded masks
  double precision = 0, recall = 0;
  double oracle_cr = 0;    // CR when exactly the ground-truth voxels are kept
};
std::vector<ExpansionRow> sweep_expansion(const PipelineConfig& cfg, const PipelineModels& models);
std::string expansion_csv(const std::vector<ExpansionRow>& rows);

struct ChannelRow {
  std::size_t channels = 0;
  std::size_t dims_in = 0, dims_out = 0;
  double cr = 0;
};
/// Retention follows the ground-truth mask so n' does not depend on C_a.
std::vector<ChannelRow> sweep_channels(const PipelineConfig& cfg);
std::string channels_csv(const std::vector<ChannelRow>& rows);

/// Optimizer and schedule from the config's train settings.
TrainConfig make_train_config(const PipelineConfig& cfg);

struct JsccDatasets {
  std::vector<Matrix> train, held_out;
};
/// Synthetic attribute frames with C_a channels; training and held-out sets
/// use disjoint seeds.
JsccDatasets make_jscc_datasets(const PipelineConfig& cfg, std::size_t train_frames);

struct WidthRow {
  std::size_t width = 0;
  std::vector<double> mse;  // per train.eval_snr_db
};
/// Trains one attribute codec per width on synthetic frames.
std::vector<WidthRow> sweep_width(const PipelineConfig& cfg);
std::string width_csv(const std::vector<WidthRow>& rows, const std::vector<double>& eval_snr_db);

/// Retained voxels when exactly the ground-truth voxels are kept (failsafe
/// rule applied when none are).
std::size_t oracle_retained(const std::vector<Coord>& active, const VoxelMask& gt);

}  // namespace fpc
