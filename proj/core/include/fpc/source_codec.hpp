#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fpc/param_store.hpp"
#include "fpc/sparse_conv.hpp"

namespace fpc {

inline constexpr std::size_t kFeatureChannels = 64;
inline constexpr std::size_t kDefaultCompactChannels = 8;

/// Three conv layers: expand (3^3), enhance (3^3), then 2x2x2 stride-2
/// downsampling. BN + ReLU follow the first two.
struct DownUnit {
  SparseKernel conv1, conv2, conv3;
  AffineNorm bn1, bn2;
};

struct BottleneckUnit {
  SparseKernel conv1, conv2;
  AffineNorm bn1, bn2;
};

/// Transposed conv back onto the mirrored skip's active set, concatenation
/// with that skip, then reduce (3^3) and enhance (3^3) with BN + ReLU.
struct UpUnit {
  SparseKernel convt, conv1, conv2;
  AffineNorm bn1, bn2;
};

struct SpatialUNet {
  std::array<DownUnit, 3> down;
  BottleneckUnit bottleneck;
  std::array<UpUnit, 3> up;
  SparseKernel head;
};

inline constexpr std::array<std::size_t, 3> kDownWidths{16, 32, 64};
inline constexpr std::size_t kBottleneckWidth = 128;
inline constexpr std::array<std::size_t, 3> kUpWidths{64, 32, 16};
/// Minimum grid extent for three stride-2 stages.
inline constexpr std::int32_t kMinUNetExtent = 8;

/// Edge-side compaction: SE channel gating, 1x1x1 channel reduction to
/// `channels` (C_a), and the voxel-relevance U-Net.
struct CompactionModel {
  std::size_t channels = kDefaultCompactChannels;
  LinearLayer se_reduce;  // 64 -> 8, relu
  LinearLayer se_expand;  // 8 -> 64, sigmoid
  SparseKernel reduce;    // 1^3, 64 -> C_a
  SpatialUNet unet;

  static ParamLayout layout(std::size_t channels);
  static CompactionModel from_store(const ParamStore& store, std::size_t channels);
  static CompactionModel seeded(std::uint64_t seed, std::size_t channels = kDefaultCompactChannels) {
    return from_store(layout(channels).init(seed), channels);
  }
};

/// Cloud-side decompaction: SE gating from the received channels and a 1x1x1
/// expansion back to 64 channels.
struct DecompactionModel {
  std::size_t channels = kDefaultCompactChannels;
  LinearLayer se_reduce;  // C_a -> 48, relu
  LinearLayer se_expand;  // 48 -> 64, sigmoid
  SparseKernel expand;    // 1^3, C_a -> 64

  static ParamLayout layout(std::size_t channels);
  static DecompactionModel from_store(const ParamStore& store, std::size_t channels);
  static DecompactionModel seeded(std::uint64_t seed, std::size_t channels = kDefaultCompactChannels) {
    return from_store(layout(channels).init(seed), channels);
  }
};

/// Channel weights W_C = sigmoid(FC(relu(FC(GAP(attrs))))).
std::vector<double> se_gate(const LinearLayer& reduce, const LinearLayer& expand, const Matrix& attrs);

SparseVoxelTensor channel_compact(const SparseVoxelTensor& f4, const CompactionModel& model);

/// Per-voxel relevance probability in canonical order.
std::vector<double> spatial_probs(const SparseVoxelTensor& fc, const CompactionModel& model);

struct CompactedFeature {
  SparseVoxelTensor tensor;
  std::vector<double> probs;  // of the retained voxels
  bool failsafe = false;
};

inline constexpr double kMaskThreshold = 0.5;
inline constexpr std::size_t kFailsafeVoxels = 128;

/// Keeps voxels with p > threshold; when none qualify, keeps the top
/// min(failsafe, n) by probability (ties by canonical order).
CompactedFeature spatial_compact_infer(const SparseVoxelTensor& fc, const std::vector<double>& probs,
                                       double threshold = kMaskThreshold,
                                       std::size_t failsafe = kFailsafeVoxels);

/// Soft (training-time) compaction: rows scaled by their probabilities.
SparseVoxelTensor spatial_compact_train_apply(const SparseVoxelTensor& fc, const std::vector<double>& probs);

SparseVoxelTensor channel_decompact(const SparseVoxelTensor& received, const DecompactionModel& model);

}  // namespace fpc
