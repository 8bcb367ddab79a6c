#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "fpc/sparse_tensor.hpp"

namespace fpc {

/// Axis-aligned object box; center and size in meters.
struct BoundingBox {
  std::array<double, 3> center{};
  std::array<double, 3> size{};
};

/// Scene extent in meters, feature grid in voxels, and the mask expansion
/// margin in voxels.
struct SceneSpec {
  std::array<double, 3> extent{};
  Grid grid;
  int expansion = 16;

  void validate() const;
};

/// Sorted, duplicate-free set of relevant voxels on a grid.
struct VoxelMask {
  std::vector<Coord> relevant;
  Grid grid;

  std::size_t size() const noexcept { return relevant.size(); }
  bool contains(const Coord& c) const;
  friend bool operator==(const VoxelMask&, const VoxelMask&) = default;
};

/// Voxels whose normalized index u / L4 lies inside the box's normalized
/// interval [x/L - l/2L, x/L + l/2L] on every axis (closed bounds), clipped to
/// the grid.
VoxelMask preliminary_voxels(const BoundingBox& box, const SceneSpec& spec);

/// Same interval test widened by spec.expansion voxels on every side.
VoxelMask expanded_voxels(const BoundingBox& box, const SceneSpec& spec);

/// Union of expanded_voxels over all boxes.
VoxelMask merge_boxes(const std::vector<BoundingBox>& boxes, const SceneSpec& spec);

/// 1 where the active coordinate is in the mask, 0 otherwise.
std::vector<int> sparse_labels(const VoxelMask& mask, const std::vector<Coord>& active);

inline constexpr double kFocalEpsilon = 1e-7;

/// Summed binary focal loss with probabilities clamped to [eps, 1 - eps].
double focal_loss(const std::vector<double>& probs, const std::vector<int>& labels, double gamma = 2.0);

// Box list file: one "x y z l w h" line per box.
std::vector<BoundingBox> load_boxes(const std::filesystem::path& path);
void save_boxes(const std::filesystem::path& path, const std::vector<BoundingBox>& boxes);

/// Mask as a tensor with one all-ones channel, for the text fixture format.
SparseVoxelTensor mask_to_tensor(const VoxelMask& mask);

}  // namespace fpc
