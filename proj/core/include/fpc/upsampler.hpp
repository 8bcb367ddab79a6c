#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fpc/param_store.hpp"
#include "fpc/sparse_conv.hpp"

namespace fpc {

enum class Branch { geometry, attribute };

/// Per-channel mean and standard deviation used to normalize one branch.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
  Branch domain = Branch::attribute;

  std::size_t channels() const noexcept { return mean.size(); }
  /// Throws InvariantError unless lengths match and every std is > 0.
  void validate() const;

  static NormStats identity(std::size_t channels, Branch domain);
  /// Column statistics (population std). Constant columns get std 1.
  static NormStats compute(const Matrix& values, Branch domain);
};

Matrix normalize(const Matrix& values, const NormStats& stats);
Matrix denormalize(const Matrix& values, const NormStats& stats);

/// Stored as stats.<geometry|attribute>.mean / .std entries.
void store_stats(ParamStore& store, const NormStats& stats);
NormStats load_stats(const ParamStore& store, Branch domain, std::size_t channels);

/// Dilated 3^3 conv, BN, ReLU, then submanifold 3^3 conv, BN, ReLU.
struct PromptStage {
  SparseKernel dilated, sub;
  AffineNorm bn1, bn2;
};

/// FC_R(prompt | noisy) -> FC
struct FusionBlock {
  LinearLayer fc1, fc2;
};

/// FC_Si(t) -> FC
struct TimeEmbedding {
  LinearLayer fc1, fc2;
};

struct UpsamplerModel {
  static constexpr std::size_t kGeometryWidth = 3;
  static constexpr std::size_t kAttributeWidth = 64;

  PromptStage stage1, stage2;
  FusionBlock fuse_g, fuse_a;
  TimeEmbedding time_g, time_a;
  std::array<SparseKernel, 3> pred_g, pred_a;

  /// Fusion hidden widths equal the output widths (3 and 64).
  static ParamLayout layout();
  static UpsamplerModel from_store(const ParamStore& store);
  static UpsamplerModel seeded(std::uint64_t seed) { return from_store(layout().init(seed)); }
};

enum class GeometryOutput { anchored, free };

struct DiffusionConfig {
  int steps = 1;  // M
  std::uint64_t noise_seed = 1;
  UpscaleMode upscale = UpscaleMode::children8;
  GeometryOutput output = GeometryOutput::anchored;

  void validate() const;
};

/// Stage-1 pair, geometry upscale, stage-2 pair. 64 channels in and out.
SparseVoxelTensor prompt_generate(const SparseVoxelTensor& f4hat, const UpsamplerModel& model,
                                  UpscaleMode mode = UpscaleMode::children8);

/// Voxel coordinates as an n x 3 real matrix.
Matrix coords_matrix(const std::vector<Coord>& coords);

Matrix conditional_fuse(const Matrix& prompt_part, const Matrix& noisy_part, Branch branch,
                        const UpsamplerModel& model);

/// Embedding of step t (fed to the network as t / steps); width 3 for
/// geometry and 64 for attributes.
std::vector<double> time_embedding(int t, int steps, Branch branch, const UpsamplerModel& model);

/// Adds the time embedding to every row of `fused` and runs the three
/// submanifold convolutions of the branch on the fused tensor's active set.
Matrix predict_noise(Branch branch, const SparseVoxelTensor& fused, const std::vector<double>& t_embed,
                     const UpsamplerModel& model);

/// Initial noise on the prompt active set: geometry n x 3, then attributes
/// n x 64, drawn from (noise_seed, stream).
struct DiffusionNoise {
  Matrix geometry, attributes;
};
DiffusionNoise draw_diffusion_noise(std::size_t voxels, std::uint64_t noise_seed, std::uint64_t stream);

/// Full cloud-side upsampling. Output channels: 3 denoised geometry values
/// followed by 64 attributes. Anchored output keeps the prompt coordinates;
/// free output rounds the denoised geometry to voxels, clips to the grid and
/// keeps the first row (canonical prompt order) of any duplicate.
SparseVoxelTensor upsample(const SparseVoxelTensor& f4hat, const UpsamplerModel& model, const NormStats& stats_g,
                           const NormStats& stats_a, const DiffusionConfig& cfg, std::uint64_t stream = 0);

/// Statistics of the prompts for a calibration set.
std::pair<NormStats, NormStats> calibrate_stats(const std::vector<SparseVoxelTensor>& prompts);

}  // namespace fpc
